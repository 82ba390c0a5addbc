//! Optimal and min-cost-flow decoders, and sweeps of failure rate and
//! stiffness over error strength.
//!
//! The optimal decoder samples `Z_k` at `β = α` and picks the most frequent
//! winding sector of `J` relative to the sampled error; it succeeds when that
//! sector is strictly `(0, 0)`. Sweeps map every task
//! `(point, L, realization)` to a seed by hashing, so results do not depend
//! on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LinkField, TorusLattice};
use crate::mcf;
use crate::noise::{IntegerGaussian, NoiseParams};
use crate::observables::{aggregate, realization_stats, DisorderAggregate, Estimate, RealizationStats};
use crate::seeds::{self, Stream};
use crate::worm::{self, LoopModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderId {
    Optimal,
    Mcf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    pub decoder: DecoderId,
    /// Winding of `k - k̂`, the logical error left after correcting with the inferred error `k̂`.
    pub chosen_sector: (i64, i64),
    pub success: bool,
    pub confidence: Option<f64>,
    pub gap_uncertainty: Option<f64>,
    pub cost: Option<i64>,
}

impl DecodeOutcome {
    /// Verdict from the most frequent sector of `J = k̂ - k`.
    pub fn from_stats(stats: &RealizationStats) -> Self {
        let (wx, wy) = stats.most_likely_sector;
        Self {
            decoder: DecoderId::Optimal,
            chosen_sector: (-wx, -wy),
            success: stats.decoded(),
            confidence: Some(stats.confidence),
            gap_uncertainty: Some(stats.gap_uncertainty),
            cost: None,
        }
    }
}

/// Maximum-likelihood sector from a worm chain at `β = α`.
pub fn optimal_decode(k: &LinkField, alpha: f64, mc: &LoopModelParams) -> Result<DecodeOutcome> {
    if mc.beta != alpha {
        return Err(Error::OffNishimoriLine { alpha, beta: mc.beta });
    }
    let chain = worm::run_chain(k.lattice(), k, mc)?;
    Ok(DecodeOutcome::from_stats(&realization_stats(&chain)?))
}

/// How `β` follows `α` along a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "lowercase")]
pub enum BetaRule {
    Nishimori,
    Proportional(f64),
    Fixed(f64),
    /// `β = 0`: the ground state only, decoded by min-cost flow.
    Zero,
}

impl BetaRule {
    pub fn beta(&self, alpha: f64) -> f64 {
        match *self {
            BetaRule::Nishimori => alpha,
            BetaRule::Proportional(l) => l * alpha,
            BetaRule::Fixed(b) => b,
            BetaRule::Zero => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PointSet {
    /// Error strengths with `β` from a rule.
    Alpha { grid: Vec<f64>, rule: BetaRule },
    /// Disorder-free model at each `β`.
    CleanBeta { grid: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub points: PointSet,
    pub sizes: Vec<usize>,
    pub n_samples: usize,
    pub seed: u64,
    pub n_therm_loops: u64,
    pub n_measure_loops: u64,
    pub measure_correlator: bool,
    pub correlator_blocks: usize,
    pub step_cap: u64,
}

impl SweepConfig {
    pub fn new(points: PointSet, sizes: Vec<usize>, n_samples: usize, seed: u64) -> Self {
        Self {
            points,
            sizes,
            n_samples,
            seed,
            n_therm_loops: 100_000,
            n_measure_loops: 100_000,
            measure_correlator: false,
            correlator_blocks: worm::DEFAULT_CORRELATOR_BLOCKS,
            step_cap: worm::DEFAULT_STEP_CAP,
        }
    }

    pub fn with_loops(mut self, therm: u64, measure: u64) -> Self {
        self.n_therm_loops = therm;
        self.n_measure_loops = measure;
        self
    }

    pub fn decoder(&self) -> DecoderId {
        match self.points {
            PointSet::Alpha { rule: BetaRule::Zero, .. } => DecoderId::Mcf,
            _ => DecoderId::Optimal,
        }
    }

    /// `(α, β)` for every point, in grid order.
    pub fn alpha_beta(&self) -> Vec<(f64, f64)> {
        match &self.points {
            PointSet::Alpha { grid, rule } => grid.iter().map(|&a| (a, rule.beta(a))).collect(),
            PointSet::CleanBeta { grid } => grid.iter().map(|&b| (0.0, b)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let grid = match &self.points {
            PointSet::Alpha { grid, .. } | PointSet::CleanBeta { grid } => grid,
        };
        if grid.is_empty() {
            return Err(Error::InvalidParameter("empty grid".into()));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
        }
        for (a, b) in self.alpha_beta() {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {a}")));
            }
            if self.decoder() == DecoderId::Optimal && !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidParameter(format!("beta must be positive, got {b}")));
            }
            if self.decoder() == DecoderId::Mcf && a == 0.0 {
                return Err(Error::InvalidParameter("min-cost-flow sweeps need alpha > 0".into()));
            }
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|&l| TorusLattice::new(l).is_err()) {
            return Err(Error::InvalidParameter(format!("invalid size list {:?}", self.sizes)));
        }
        if self.n_samples < 2 {
            return Err(Error::InvalidParameter("n_samples must be >= 2".into()));
        }
        if self.decoder() == DecoderId::Optimal && self.n_measure_loops == 0 {
            return Err(Error::InvalidParameter("n_measure_loops must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTask {
    pub point_index: usize,
    pub alpha: f64,
    pub beta: f64,
    pub size: usize,
    pub realization: usize,
    pub seed: u64,
}

/// Tasks in `(point, L, realization)` order.
pub fn sweep_tasks(cfg: &SweepConfig) -> Vec<SweepTask> {
    let mut out = Vec::new();
    for (point_index, (alpha, beta)) in cfg.alpha_beta().into_iter().enumerate() {
        for &size in &cfg.sizes {
            for realization in 0..cfg.n_samples {
                let seed = seeds::realization_seed(cfg.seed, point_index, size, realization);
                out.push(SweepTask { point_index, alpha, beta, size, realization, seed });
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub task: SweepTask,
    pub outcome: DecodeOutcome,
    pub stats: RealizationStats,
    pub worm_attempts: u64,
    pub worm_accepted: u64,
    pub mean_energy: Option<f64>,
}

/// Error field drawn for a task; all zero at `α = 0`.
pub fn task_error(task: &SweepTask) -> Result<LinkField> {
    let lat = TorusLattice::new(task.size)?;
    if task.alpha == 0.0 {
        return Ok(LinkField::zeros(lat));
    }
    let noise = IntegerGaussian::new(NoiseParams::new(task.alpha)?);
    Ok(noise.sample_field(lat, &mut seeds::rng(task.seed, Stream::Disorder)))
}

pub fn run_task(cfg: &SweepConfig, task: &SweepTask) -> Result<RealizationRecord> {
    let k = task_error(task)?;
    match cfg.decoder() {
        DecoderId::Mcf => {
            let outcome = mcf::mcf_decode(&k)?;
            // J = r - k, so the ground-state winding is minus that of k - r.
            let w = outcome.chosen_sector;
            let stats =
                RealizationStats::ground_state(task.alpha, task.size, (-w.0, -w.1)).with_realization(task.realization);
            Ok(RealizationRecord { task: *task, outcome, stats, worm_attempts: 0, worm_accepted: 0, mean_energy: None })
        }
        DecoderId::Optimal => {
            let mut mc = LoopModelParams::new(task.alpha, task.beta, cfg.n_therm_loops, cfg.n_measure_loops, task.seed);
            mc.measure_correlator = cfg.measure_correlator;
            mc.correlator_blocks = cfg.correlator_blocks;
            mc.step_cap = cfg.step_cap;
            let chain = worm::run_chain(k.lattice(), &k, &mc)?;
            let stats = realization_stats(&chain)?.with_realization(task.realization);
            Ok(RealizationRecord {
                task: *task,
                outcome: DecodeOutcome::from_stats(&stats),
                stats,
                worm_attempts: chain.attempts,
                worm_accepted: chain.accepted,
                mean_energy: Some(chain.mean_energy()),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub point_index: usize,
    pub alpha: f64,
    pub beta: f64,
    pub size: usize,
    pub n: usize,
    pub failure_rate: Estimate,
    pub upsilon: Estimate,
    pub chi: Estimate,
    pub w2: Estimate,
    pub aggregate: DisorderAggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub decoder: DecoderId,
    pub points: PointSet,
    pub curve: Vec<CurvePoint>,
}

impl ThresholdCurve {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.curve.iter().map(|p| p.size).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Aggregates records per `(point, L)`; points without at least two realizations are skipped.
pub fn summarize(cfg: &SweepConfig, records: &[RealizationRecord]) -> Result<ThresholdCurve> {
    let mut curve = Vec::new();
    for (pi, (alpha, beta)) in cfg.alpha_beta().into_iter().enumerate() {
        for &size in &cfg.sizes {
            let stats: Vec<RealizationStats> = records
                .iter()
                .filter(|r| r.task.point_index == pi && r.task.size == size)
                .map(|r| r.stats.clone())
                .collect();
            if stats.len() < 2 {
                continue;
            }
            let agg = aggregate(&stats)?;
            curve.push(CurvePoint {
                point_index: pi,
                alpha,
                beta,
                size,
                n: agg.n_realizations,
                failure_rate: agg.failure_rate,
                upsilon: agg.upsilon_bar,
                chi: agg.chi,
                w2: agg.w2_bar,
                aggregate: agg,
            });
        }
    }
    Ok(ThresholdCurve { decoder: cfg.decoder(), points: cfg.points.clone(), curve })
}

/// Runs every task on the rayon pool and aggregates in task order.
pub fn sweep(cfg: &SweepConfig) -> Result<ThresholdCurve> {
    let (curve, _) = sweep_with_records(cfg)?;
    Ok(curve)
}

pub fn sweep_with_records(cfg: &SweepConfig) -> Result<(ThresholdCurve, Vec<RealizationRecord>)> {
    cfg.validate()?;
    let tasks = sweep_tasks(cfg);
    let records: Vec<RealizationRecord> = tasks.par_iter().map(|t| run_task(cfg, t)).collect::<Result<_>>()?;
    Ok((summarize(cfg, &records)?, records))
}
