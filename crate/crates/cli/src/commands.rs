use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use u1qec::decoders::{self, summarize, BetaRule, PointSet, RealizationRecord, SweepConfig, SweepTask, ThresholdCurve};
use u1qec::observables::{linear_correlator_sum_rule, mean_and_error, Estimate, RealizationStats};
use u1qec::scaling::{
    self, default_nu_grid, find_crossings, predicted_jump, AlphaFit, Collapse, Quantity, ScalingFit, StiffnessDataset,
};

use crate::config::{grid, CollapseMode, CollapseSettings, FitSettings, Kind, RunConfig};
use crate::store::{self, OutputDir, ResultRecord, TaskKey, Timing, R1_FILE, SUMMARY_FILE};

/// Errors smaller than this are treated as this in weighted fits.
pub const ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub resume: bool,
    pub seed_override: Option<u64>,
    /// Stop after this many new tasks, leaving the sweep resumable.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Default)]
pub struct RunReport {
    pub total_tasks: usize,
    pub skipped: usize,
    pub computed: usize,
    pub failures: Vec<(SweepTask, String)>,
    pub summary: String,
}

pub fn load_config(path: &Path, seed_override: Option<u64>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = RunConfig::from_toml(&text)?;
    if let Some(s) = seed_override {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs (or resumes) a sweep, writing records in task order.
pub fn run_sweep(cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport> {
    if !cfg.is_sweep() {
        bail!("kind {:?} is not a sweep", cfg.kind);
    }
    let sweep = cfg.sweep_config();
    let tasks = decoders::sweep_tasks(&sweep);
    let out = OutputDir::new(&opts.out);
    let done = out.open(cfg, opts.resume)?;
    let todo: Vec<SweepTask> = tasks.iter().filter(|t| !done.contains(&TaskKey::from(*t))).copied().collect();
    let budget = opts.stop_after.unwrap_or(usize::MAX).min(todo.len());
    let workers = opts.workers.or(cfg.workers).unwrap_or_else(default_workers).max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let mut report = RunReport { total_tasks: tasks.len(), skipped: tasks.len() - todo.len(), ..Default::default() };

    for chunk in todo[..budget].chunks(workers * 4) {
        let results: Vec<(SweepTask, u1qec::Result<RealizationRecord>, f64)> = pool.install(|| {
            chunk
                .par_iter()
                .map(|t| {
                    let t0 = Instant::now();
                    let r = decoders::run_task(&sweep, t);
                    (*t, r, t0.elapsed().as_secs_f64())
                })
                .collect()
        });
        let mut recs = Vec::new();
        let mut times = Vec::new();
        for (task, r, wall_time) in results {
            match r {
                Ok(record) => {
                    let k = if cfg.dump_fields { Some(decoders::task_error(&task)?.into_values()) } else { None };
                    recs.push(ResultRecord {
                        schema_version: crate::config::SCHEMA_VERSION,
                        experiment_id: cfg.experiment_id.clone(),
                        record,
                        k,
                    });
                    times.push(Timing {
                        point_index: task.point_index,
                        size: task.size,
                        realization: task.realization,
                        wall_time,
                    });
                }
                Err(e) => report.failures.push((task, e.to_string())),
            }
        }
        out.append(&recs, &times)?;
        report.computed += recs.len();
        eprintln!("[{}/{}] tasks done", report.skipped + report.computed, report.total_tasks);
    }

    let records = store::read_records(out.root())?;
    let plain: Vec<RealizationRecord> = records.into_iter().map(|r| r.record).collect();
    let curve = summarize(&sweep, &plain)?;
    report.summary = summary_table(&curve);
    out.write(SUMMARY_FILE, &report.summary)?;
    if cfg.kind == Kind::Correlator {
        out.write(R1_FILE, &r1_table(&sweep, &plain)?)?;
    }
    Ok(report)
}

fn est(e: Estimate) -> String {
    format!("{}\t{}", e.value, e.error)
}

pub fn summary_table(curve: &ThresholdCurve) -> String {
    let mut s = String::from(
        "alpha\tbeta\tL\tn\tfailure\tfailure_err\tupsilon\tupsilon_err\tchi\tchi_err\tw2\tw2_err\tupsilon_minus_chi\tupsilon_minus_chi_err\n",
    );
    for p in &curve.curve {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.alpha,
            p.beta,
            p.size,
            p.n,
            est(p.failure_rate),
            est(p.upsilon),
            est(p.chi),
            est(p.w2),
            est(p.aggregate.upsilon_minus_chi)
        );
    }
    s
}

fn r1_table(sweep: &SweepConfig, records: &[RealizationRecord]) -> Result<String> {
    let curve = summarize(sweep, records)?;
    let mut s =
        String::from("alpha\tL\tr\tr1_naive\tr1_naive_err\tr1_jackknife\tr1_jackknife_err\tlinear\tlinear_err\n");
    for p in &curve.curve {
        let Some(r1) = &p.aggregate.r1 else { continue };
        let stats: Vec<RealizationStats> = records
            .iter()
            .filter(|r| r.task.point_index == p.point_index && r.task.size == p.size)
            .map(|r| r.stats.clone())
            .collect();
        for r in r1 {
            let lin = linear_correlator_sum_rule(&stats, r.distance)?;
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}",
                p.alpha,
                p.size,
                r.distance,
                est(r.naive),
                est(r.jackknife),
                est(lin)
            );
        }
    }
    Ok(s)
}

/// Config and curve of a finished sweep directory.
pub fn load_sweep(dir: &Path) -> Result<(RunConfig, Vec<RealizationRecord>)> {
    let cfg = store::read_config(&dir.join(store::CONFIG_FILE))?;
    let records = store::read_records(dir)?.into_iter().map(|r| r.record).collect();
    Ok((cfg, records))
}

pub fn dataset(dir: &Path, quantity: Quantity) -> Result<(RunConfig, ThresholdCurve, StiffnessDataset)> {
    let (cfg, records) = load_sweep(dir)?;
    let curve = summarize(&cfg.sweep_config(), &records)?;
    let data = StiffnessDataset::from_curve(&curve, quantity, ERROR_FLOOR)?;
    Ok((cfg, curve, data))
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub input: PathBuf,
    pub quantity: Quantity,
    pub fit: ScalingFit,
    /// With a fixed jump: the two-parameter fit at the located `α_c`.
    pub free_jump_at_c: Option<AlphaFit>,
    /// `2/π - D(α_c)` at the fitted point, for disordered sweeps.
    pub predicted_jump: Option<f64>,
}

pub fn fit(input: &Path, settings: &FitSettings) -> Result<FitReport> {
    let (cfg, _, data) = dataset(input, settings.quantity)?;
    let fit = scaling::weber_minnhagen_fit_with(&data, settings.fixed_jump, settings.refinement)?;
    let predicted_jump = match cfg.kind {
        Kind::CleanScan => None,
        _ => fit.alpha_c.map(predicted_jump),
    };
    let free_jump_at_c = match (settings.fixed_jump, fit.alpha_c) {
        (Some(_), Some(ac)) => Some(scaling::fit_at(&data, ac, None)?),
        _ => None,
    };
    Ok(FitReport { input: input.to_path_buf(), quantity: settings.quantity, fit, free_jump_at_c, predicted_jump })
}

#[derive(Debug, Serialize)]
pub struct CollapseReport {
    pub input: PathBuf,
    pub settings: CollapseSettings,
    pub alpha_c: f64,
    pub nu: Option<f64>,
    pub collapse: Collapse,
}

pub fn collapse(input: &Path, settings: &CollapseSettings) -> Result<CollapseReport> {
    let (_, _, data) = dataset(input, settings.quantity)?;
    let need = |v: Option<f64>, key: &str| v.with_context(|| format!("collapse.{key} is required for this mode"));
    let (alpha_c, nu, collapse) = match settings.mode {
        CollapseMode::Bkt => {
            let ac = need(settings.alpha_c, "alpha_c")?;
            (ac, None, scaling::bkt_collapse(&data, ac, need(settings.a, "a")?, need(settings.c, "c")?)?)
        }
        CollapseMode::PowerLaw => match (settings.alpha_c, settings.nu) {
            (Some(ac), Some(nu)) => (ac, Some(nu), scaling::power_law_collapse(&data, ac, nu)?),
            _ => {
                let alphas = grid(need_grid(settings.alpha_search, "alpha_search")?)?;
                let nus = match settings.nu_search {
                    Some(g) => grid(g)?,
                    None => default_nu_grid(),
                };
                let best = scaling::power_law_grid_search(&data, &alphas, &nus)?;
                (best.alpha_c, Some(best.nu), scaling::power_law_collapse(&data, best.alpha_c, best.nu)?)
            }
        },
    };
    Ok(CollapseReport { input: input.to_path_buf(), settings: settings.clone(), alpha_c, nu, collapse })
}

fn need_grid(g: Option<[f64; 3]>, key: &str) -> Result<[f64; 3]> {
    g.with_context(|| format!("collapse.{key} is required unless alpha_c and nu are both given"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    Failure,
    Upsilon,
    Chi,
    W2,
    /// Paired Ῡ and χ per point.
    Stiffness,
    /// Crossing points of χ (disordered) or Ῡ (clean) between adjacent sizes.
    Phase,
    R1,
}

/// Per-(point, L) mean and standard error straight from records; a lone
/// record gives its own value with error `nan`.
fn column(records: &[RealizationRecord], f: impl Fn(&RealizationStats) -> f64) -> Vec<(f64, f64, usize, Estimate)> {
    let mut groups: BTreeMap<(usize, usize), (f64, f64, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let g = groups.entry((r.task.point_index, r.task.size)).or_insert((r.task.alpha, r.task.beta, Vec::new()));
        g.2.push(f(&r.stats));
    }
    groups
        .into_iter()
        .map(|((_, size), (a, b, xs))| {
            let e = if xs.len() >= 2 { mean_and_error(&xs).unwrap() } else { Estimate::new(xs[0], f64::NAN) };
            (a, b, size, e)
        })
        .collect()
}

pub fn plot_data(input: &Path, kind: PlotKind) -> Result<String> {
    let (cfg, records) = load_sweep(input)?;
    if records.is_empty() {
        bail!("{}: no records", input.display());
    }
    let clean = cfg.kind == Kind::CleanScan;
    let x_name = if clean { "beta" } else { "alpha" };
    let x = |a: f64, b: f64| if clean { b } else { a };
    let mut s = String::new();
    let simple = |f: &dyn Fn(&RealizationStats) -> f64, s: &mut String| {
        let _ = writeln!(s, "{x_name}\tL\tvalue\terror");
        for (a, b, l, e) in column(&records, f) {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", x(a, b), l, e.value, e.error);
        }
    };
    match kind {
        PlotKind::Failure => simple(&|s| if s.decoded() { 0.0 } else { 1.0 }, &mut s),
        PlotKind::Upsilon => {
            simple(&|s| s.upsilon_k, &mut s);
            let reference = match cfg.sweep_config().points {
                PointSet::Alpha { rule: BetaRule::Nishimori, .. } => Some(1.0 / PI),
                PointSet::CleanBeta { .. } => Some(2.0 / PI),
                _ => None,
            };
            if let Some(v) = reference {
                let _ = writeln!(s, "ref\tinf\t{v}\t0");
            }
        }
        PlotKind::Chi => simple(&|s| s.chi_k(), &mut s),
        PlotKind::W2 => simple(&|s| s.w2_k(), &mut s),
        PlotKind::Stiffness => {
            let _ = writeln!(s, "{x_name}\tL\tupsilon\tupsilon_err\tchi\tchi_err");
            let u = column(&records, |s| s.upsilon_k);
            let c = column(&records, |s| s.chi_k());
            for ((a, b, l, eu), (_, _, _, ec)) in u.into_iter().zip(c) {
                let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}\t{}", x(a, b), l, eu.value, eu.error, ec.value, ec.error);
            }
        }
        PlotKind::Phase => {
            let quantity = if clean { Quantity::Upsilon } else { Quantity::Chi };
            let curve = summarize(&cfg.sweep_config(), &records)?;
            let data = StiffnessDataset::from_curve(&curve, quantity, ERROR_FLOOR)?;
            let _ = writeln!(s, "L_small\tL_large\t{x_name}_cross\tvalue\tprimary\tpredicted_jump");
            for pc in find_crossings(&data) {
                for c in &pc.crossings {
                    let primary = pc.primary.is_some_and(|p| p == *c);
                    let pj = if clean { f64::NAN } else { predicted_jump(c.alpha) };
                    let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}\t{}", pc.small, pc.large, c.alpha, c.value, primary, pj);
                }
            }
        }
        PlotKind::R1 => {
            if cfg.kind != Kind::Correlator {
                bail!("r1 tables need a correlator sweep, got {:?}", cfg.kind);
            }
            s = r1_table(&cfg.sweep_config(), &records)?;
        }
    }
    Ok(s)
}

pub fn fit_settings_from(cfg: &RunConfig) -> Result<(PathBuf, FitSettings)> {
    match (&cfg.input, &cfg.fit) {
        (Some(i), Some(f)) if cfg.kind == Kind::Fit => Ok((i.clone(), f.clone())),
        _ => bail!("config is not a fit config"),
    }
}

pub fn collapse_settings_from(cfg: &RunConfig) -> Result<(PathBuf, CollapseSettings)> {
    match (&cfg.input, &cfg.collapse) {
        (Some(i), Some(c)) if cfg.kind == Kind::Collapse => Ok((i.clone(), c.clone())),
        _ => bail!("config is not a collapse config"),
    }
}
