//! Quick self-checks: enumeration oracle, min-cost-flow oracle, Nishimori
//! identities and closed forms, each small enough to finish in seconds.

use anyhow::Result;
use u1qec::decoders::{sweep, BetaRule, PointSet, SweepConfig};
use u1qec::mcf::{self, brute_force_mcf, build_network, has_negative_residual_cycle, solve_min_cost_flow};
use u1qec::noise::{self, IntegerGaussian, NoiseParams};
use u1qec::observables::{chain_estimates, nishimori_identity_report, Estimate};
use u1qec::oracle::{exact_loop_stats, DEFAULT_TAIL_TOLERANCE};
use u1qec::seeds::{self, Stream};
use u1qec::worm::{run_chain, LoopModelParams};
use u1qec::TorusLattice;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn dev(e: &Estimate, target: f64) -> f64 {
    (e.value - target) / e.error
}

pub fn enumeration_check() -> Result<Check> {
    let lat = TorusLattice::new(2)?;
    let noise = IntegerGaussian::new(NoiseParams::new(0.4)?);
    let k = noise.sample_field(lat, &mut seeds::rng(11, Stream::Disorder));
    let exact = exact_loop_stats(&k, 0.4, DEFAULT_TAIL_TOLERANCE)?;
    let params = LoopModelParams::new(0.4, 0.4, 20_000, 200_000, 5);
    let est = chain_estimates(&run_chain(lat, &k, &params)?, 32)?;
    let z = [dev(&est.w2x, exact.mean_w2.0), dev(&est.upsilon, exact.upsilon), dev(&est.energy, exact.energy)];
    let worst = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(check("worm vs enumeration (L=2)", worst < 4.0, format!("max |z| = {worst:.2}")))
}

pub fn mcf_check() -> Result<Check> {
    let lat = TorusLattice::new(3)?;
    let noise = IntegerGaussian::new(NoiseParams::new(0.3)?);
    let mut rng = seeds::rng(3, Stream::Disorder);
    let mut bad = 0;
    for _ in 0..20 {
        let k = noise.sample_field(lat, &mut rng);
        let s = k.divergence()?;
        let net = build_network(&s)?;
        let sol = solve_min_cost_flow(&net)?;
        if sol.total_cost != brute_force_mcf(&s, 3)?.total_cost || has_negative_residual_cycle(&net, &sol) {
            bad += 1;
        }
        mcf::mcf_decode(&k)?;
    }
    Ok(check("min-cost flow vs brute force (L=3)", bad == 0, format!("{bad}/20 mismatches")))
}

pub fn nishimori_check() -> Result<Check> {
    let cfg = SweepConfig::new(PointSet::Alpha { grid: vec![0.3], rule: BetaRule::Nishimori }, vec![4], 40, 1)
        .with_loops(2_000, 20_000);
    let curve = sweep(&cfg)?;
    let r = nishimori_identity_report(&curve.curve[0].aggregate)?;
    Ok(check("Nishimori identities (L=4, a=0.3)", !r.flagged, format!("z = {:.2}, {:.2}", r.z_upsilon_chi, r.z_w2)))
}

pub fn closed_form_check() -> Result<Check> {
    let vals = [
        (noise::phase_flip_probability(0.37), 0.34, 0.005),
        (noise::phase_flip_probability(0.265), 0.232, 0.005),
        (noise::invert_phase_flip(0.109)?, 0.179, 0.002),
        (IntegerGaussian::new(NoiseParams::new(0.37)?).prob_abs_at_least(2), 0.006, 0.001),
    ];
    let pass = vals.iter().all(|(v, t, tol)| (v - t).abs() <= *tol);
    let detail = vals.iter().map(|(v, _, _)| format!("{v:.4}")).collect::<Vec<_>>().join(" ");
    Ok(check("closed forms", pass, detail))
}

type CheckFn = fn() -> Result<Check>;

pub fn run_all() -> Vec<Check> {
    let checks: [(&'static str, CheckFn); 4] = [
        ("closed forms", closed_form_check),
        ("enumeration", enumeration_check),
        ("min-cost flow", mcf_check),
        ("nishimori", nishimori_check),
    ];
    checks.into_iter().map(|(name, f)| f().unwrap_or_else(|e| check(name, false, format!("error: {e:#}")))).collect()
}
