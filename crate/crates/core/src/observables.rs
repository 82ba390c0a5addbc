//! Helicity moduli, winding moments, correlators and their disorder averages.
//!
//! Per realization `k`:
//!
//! ```text
//! Υ_k = ½ Σ_μ (⟨W_μ²⟩_k - ⟨W_μ⟩_k²)
//! ```
//!
//! and over realizations `Ῡ = [Υ_k]`, `χ = ½ Σ_μ [⟨W_μ⟩_k²]`,
//! `⟨W²⟩ = ½ Σ_μ [⟨W_μ²⟩_k] = Ῡ + χ`. All error bars are the sample standard
//! deviation over realizations divided by `√N`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::worm::{axis_displacements, CorrelatorHistogram, WormChainResult};

/// A value with its one-sigma error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: f64, error: f64) -> Self {
        Self { value, error }
    }

    /// `value / error`, or 0 for an exact zero.
    pub fn z_score(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.value / self.error
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.error
    }
}

/// Neumaier-compensated sum in slice order.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Mean and `s / √N` with the `N - 1` sample deviation.
pub fn mean_and_error(xs: &[f64]) -> Result<Estimate> {
    if xs.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 values, got {}", xs.len())));
    }
    let n = xs.len() as f64;
    if xs.iter().all(|&x| x == xs[0]) {
        return Ok(Estimate::new(xs[0], 0.0));
    }
    let mean = compensated_sum(xs.iter().copied()) / n;
    let var = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
    Ok(Estimate::new(mean, (var / n).sqrt()))
}

/// Means of `samples` over `n_blocks` contiguous blocks of equal length; trailing samples are dropped.
pub fn block_means(samples: &[f64], n_blocks: usize) -> Result<Vec<f64>> {
    if n_blocks < 2 || samples.len() < n_blocks {
        return Err(Error::InsufficientData(format!("{} samples in {} blocks", samples.len(), n_blocks)));
    }
    let len = samples.len() / n_blocks;
    Ok(samples.chunks_exact(len).take(n_blocks).map(|c| compensated_sum(c.iter().copied()) / len as f64).collect())
}

/// Delete-one jackknife of `f` applied to per-block observable means.
pub fn jackknife(blocks: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> Result<Estimate> {
    let b = blocks.len();
    if b < 2 {
        return Err(Error::InsufficientData("jackknife needs at least 2 blocks".into()));
    }
    let m = blocks[0].len();
    let mean_excluding = |skip: Option<usize>| -> Vec<f64> {
        (0..m)
            .map(|i| {
                let xs = blocks.iter().enumerate().filter(|(j, _)| Some(*j) != skip).map(|(_, v)| v[i]);
                compensated_sum(xs) / (b - skip.is_some() as usize) as f64
            })
            .collect()
    };
    let full = f(&mean_excluding(None));
    let loo: Vec<f64> = (0..b).map(|j| f(&mean_excluding(Some(j)))).collect();
    let bar = compensated_sum(loo.iter().copied()) / b as f64;
    let var = compensated_sum(loo.iter().map(|x| (x - bar) * (x - bar))) * (b - 1) as f64 / b as f64;
    Ok(Estimate::new(b as f64 * full - (b - 1) as f64 * bar, var.sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorPoint {
    pub distance: usize,
    /// Axis-averaged `⟨e^{i(θ_x - θ_{x+r})}⟩_k`.
    pub value: f64,
    /// Jackknife error of `value` over measurement blocks.
    pub error: f64,
    pub sqrt_naive: f64,
    /// Bias-corrected square root.
    pub sqrt_jackknife: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationStats {
    pub realization: usize,
    pub alpha: f64,
    pub beta: f64,
    pub size: usize,
    pub n_samples: u64,
    pub mean_w: (f64, f64),
    pub mean_w2: (f64, f64),
    pub upsilon_k: f64,
    #[serde(with = "crate::sector_map")]
    pub sector_probs: BTreeMap<(i64, i64), f64>,
    pub most_likely_sector: (i64, i64),
    /// Another sector has the same top count.
    pub top_tied: bool,
    pub confidence: f64,
    /// Multinomial error of the gap between the two most frequent sectors.
    pub gap_uncertainty: f64,
    pub correlator: Option<Vec<CorrelatorPoint>>,
}

impl RealizationStats {
    /// Stats of a single fixed winding, as at `β = 0` where only the ground state contributes.
    pub fn ground_state(alpha: f64, size: usize, winding: (i64, i64)) -> Self {
        let (wx, wy) = (winding.0 as f64, winding.1 as f64);
        Self {
            realization: 0,
            alpha,
            beta: 0.0,
            size,
            n_samples: 1,
            mean_w: (wx, wy),
            mean_w2: (wx * wx, wy * wy),
            upsilon_k: 0.0,
            sector_probs: BTreeMap::from([(winding, 1.0)]),
            most_likely_sector: winding,
            top_tied: false,
            confidence: 1.0,
            gap_uncertainty: 0.0,
            correlator: None,
        }
    }

    pub fn with_realization(mut self, index: usize) -> Self {
        self.realization = index;
        self
    }

    /// Strict success: the top sector is `(0, 0)` and no other sector ties it.
    pub fn decoded(&self) -> bool {
        self.most_likely_sector == (0, 0) && !self.top_tied
    }

    pub fn chi_k(&self) -> f64 {
        0.5 * (self.mean_w.0 * self.mean_w.0 + self.mean_w.1 * self.mean_w.1)
    }

    pub fn w2_k(&self) -> f64 {
        0.5 * (self.mean_w2.0 + self.mean_w2.1)
    }

    pub fn correlator_at(&self, distance: usize) -> Result<&CorrelatorPoint> {
        self.correlator
            .as_ref()
            .ok_or_else(|| Error::InsufficientData("no correlator recorded".into()))?
            .iter()
            .find(|p| p.distance == distance)
            .ok_or_else(|| Error::InsufficientData(format!("no correlator at distance {distance}")))
    }
}

/// Winding moments and sector frequencies from a single chain.
pub fn realization_stats(result: &WormChainResult) -> Result<RealizationStats> {
    let n = result.winding_samples.len();
    if n == 0 {
        return Err(Error::InsufficientData("no winding samples".into()));
    }
    let mut s = [0i128; 4];
    for &(x, y) in &result.winding_samples {
        s[0] += x as i128;
        s[1] += y as i128;
        s[2] += (x as i128) * (x as i128);
        s[3] += (y as i128) * (y as i128);
    }
    let nf = n as f64;
    let mean_w = (s[0] as f64 / nf, s[1] as f64 / nf);
    let mean_w2 = (s[2] as f64 / nf, s[3] as f64 / nf);
    let upsilon_k = (0.5 * (mean_w2.0 - mean_w.0 * mean_w.0 + mean_w2.1 - mean_w.1 * mean_w.1)).max(0.0);

    let total: u64 = result.sector_counts.values().sum();
    let sector_probs: BTreeMap<_, _> =
        result.sector_counts.iter().map(|(&k, &c)| (k, c as f64 / total as f64)).collect();
    let mut ranked: Vec<_> = result.sector_counts.iter().map(|(&k, &c)| (c, k)).collect();
    // Highest count first; equal counts keep sector order so the pick is deterministic.
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let (c1, top) = ranked[0];
    let c2 = ranked.get(1).map_or(0, |r| r.0);
    let (p1, p2) = (c1 as f64 / total as f64, c2 as f64 / total as f64);

    let correlator = result.correlator.as_ref().map(correlator_points).transpose()?;
    Ok(RealizationStats {
        realization: 0,
        alpha: result.alpha,
        beta: result.beta,
        size: result.size,
        n_samples: n as u64,
        mean_w,
        mean_w2,
        upsilon_k,
        sector_probs,
        most_likely_sector: top,
        top_tied: c2 == c1,
        confidence: p1,
        gap_uncertainty: ((p1 + p2 - (p1 - p2) * (p1 - p2)) / total as f64).max(0.0).sqrt(),
        correlator,
    })
}

fn correlator_points(h: &CorrelatorHistogram) -> Result<Vec<CorrelatorPoint>> {
    let blocks: Vec<usize> = (0..h.loops.len()).filter(|&b| h.loops[b] > 0).collect();
    (0..=h.size / 2)
        .map(|r| {
            let disp = axis_displacements(r as i64);
            let g = h.estimate(&disp, None)?;
            let b = blocks.len();
            let (error, sqrt_jk) = if b >= 2 {
                let loo: Vec<f64> = blocks.iter().map(|&j| h.estimate(&disp, Some(j))).collect::<Result<_>>()?;
                let bar = compensated_sum(loo.iter().copied()) / b as f64;
                let var = compensated_sum(loo.iter().map(|x| (x - bar) * (x - bar))) * (b - 1) as f64 / b as f64;
                let sbar = compensated_sum(loo.iter().map(|x| x.sqrt())) / b as f64;
                (var.sqrt(), b as f64 * g.sqrt() - (b - 1) as f64 * sbar)
            } else {
                (0.0, g.sqrt())
            };
            Ok(CorrelatorPoint { distance: r, value: g, error, sqrt_naive: g.sqrt(), sqrt_jackknife: sqrt_jk })
        })
        .collect()
}

/// Block-jackknife estimates from one chain, for comparison with exact values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainEstimates {
    pub w2x: Estimate,
    pub upsilon: Estimate,
    pub energy: Estimate,
}

pub fn chain_estimates(result: &WormChainResult, n_blocks: usize) -> Result<ChainEstimates> {
    let cols: [Vec<f64>; 5] = [
        result.winding_samples.iter().map(|w| w.0 as f64).collect(),
        result.winding_samples.iter().map(|w| w.1 as f64).collect(),
        result.winding_samples.iter().map(|w| (w.0 * w.0) as f64).collect(),
        result.winding_samples.iter().map(|w| (w.1 * w.1) as f64).collect(),
        result.energy_trace.iter().map(|&e| e as f64).collect(),
    ];
    let per_col: Vec<Vec<f64>> = cols.iter().map(|c| block_means(c, n_blocks)).collect::<Result<_>>()?;
    let blocks: Vec<Vec<f64>> = (0..n_blocks).map(|b| per_col.iter().map(|c| c[b]).collect()).collect();
    Ok(ChainEstimates {
        w2x: jackknife(&blocks, |m| m[2])?,
        upsilon: jackknife(&blocks, |m| 0.5 * (m[2] - m[0] * m[0] + m[3] - m[1] * m[1]))?,
        energy: jackknife(&blocks, |m| m[4])?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Renyi1 {
    pub distance: usize,
    pub naive: Estimate,
    pub jackknife: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderAggregate {
    pub n_realizations: usize,
    pub alpha: f64,
    pub beta: f64,
    pub size: usize,
    pub upsilon_bar: Estimate,
    pub chi: Estimate,
    pub w2_bar: Estimate,
    pub failure_rate: Estimate,
    /// Paired per-realization `Υ_k - χ_k`.
    pub upsilon_minus_chi: Estimate,
    /// Paired per-realization `½ Σ_μ (⟨W_μ²⟩_k - 2⟨W_μ⟩_k²)`.
    pub w2_minus_2chi: Estimate,
    pub r1: Option<Vec<Renyi1>>,
}

fn ordered(stats: &[RealizationStats]) -> Vec<&RealizationStats> {
    let mut v: Vec<_> = stats.iter().collect();
    v.sort_by_key(|s| s.realization);
    v
}

fn check_metadata(stats: &[RealizationStats]) -> Result<()> {
    if stats.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 realizations, got {}", stats.len())));
    }
    let s0 = &stats[0];
    if stats.iter().any(|s| s.alpha != s0.alpha || s.beta != s0.beta || s.size != s0.size) {
        return Err(Error::InvalidParameter("realizations mix different (alpha, beta, L)".into()));
    }
    Ok(())
}

/// Disorder averages over realizations, reduced in realization-index order.
pub fn aggregate(stats: &[RealizationStats]) -> Result<DisorderAggregate> {
    check_metadata(stats)?;
    let v = ordered(stats);
    let col = |f: &dyn Fn(&RealizationStats) -> f64| -> Result<Estimate> {
        mean_and_error(&v.iter().map(|s| f(s)).collect::<Vec<_>>())
    };
    let upsilon_bar = col(&|s| s.upsilon_k)?;
    let chi = col(&|s| s.chi_k())?;
    let w2_bar = col(&|s| s.w2_k())?;
    debug_assert!((w2_bar.value - upsilon_bar.value - chi.value).abs() <= 1e-9 * w2_bar.value.max(1.0));
    let r1 = if v.iter().all(|s| s.correlator.is_some()) {
        let max_r = v[0].size / 2;
        Some((0..=max_r).map(|r| renyi1(stats, r)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    Ok(DisorderAggregate {
        n_realizations: v.len(),
        alpha: v[0].alpha,
        beta: v[0].beta,
        size: v[0].size,
        upsilon_bar,
        chi,
        w2_bar,
        failure_rate: col(&|s| if s.decoded() { 0.0 } else { 1.0 })?,
        upsilon_minus_chi: col(&|s| s.upsilon_k - s.chi_k())?,
        w2_minus_2chi: col(&|s| s.w2_k() - 2.0 * s.chi_k())?,
        r1,
    })
}

/// `R_1(r) = [√⟨e^{i(θ_x - θ_{x+r})}⟩_k]`, naive and block-jackknife corrected.
pub fn renyi1(stats: &[RealizationStats], distance: usize) -> Result<Renyi1> {
    check_metadata(stats)?;
    let v = ordered(stats);
    let pts: Vec<&CorrelatorPoint> = v.iter().map(|s| s.correlator_at(distance)).collect::<Result<_>>()?;
    Ok(Renyi1 {
        distance,
        naive: mean_and_error(&pts.iter().map(|p| p.sqrt_naive).collect::<Vec<_>>())?,
        jackknife: mean_and_error(&pts.iter().map(|p| p.sqrt_jackknife).collect::<Vec<_>>())?,
    })
}

fn require_nishimori(alpha: f64, beta: f64) -> Result<()> {
    if (alpha - beta).abs() > 1e-12 * alpha.abs().max(1.0) {
        return Err(Error::OffNishimoriLine { alpha, beta });
    }
    Ok(())
}

/// Disorder mean of the un-rooted correlator; equals 1 on the Nishimori line.
pub fn linear_correlator_sum_rule(stats: &[RealizationStats], distance: usize) -> Result<Estimate> {
    check_metadata(stats)?;
    require_nishimori(stats[0].alpha, stats[0].beta)?;
    let v = ordered(stats);
    let vals: Vec<f64> = v.iter().map(|s| s.correlator_at(distance).map(|p| p.value)).collect::<Result<_>>()?;
    mean_and_error(&vals)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NishimoriReport {
    pub upsilon_minus_chi: Estimate,
    pub z_upsilon_chi: f64,
    pub w2_minus_2chi: Estimate,
    pub z_w2: f64,
    /// Either identity is off by more than 3σ.
    pub flagged: bool,
}

pub fn nishimori_identity_report(agg: &DisorderAggregate) -> Result<NishimoriReport> {
    require_nishimori(agg.alpha, agg.beta)?;
    let z1 = agg.upsilon_minus_chi.z_score();
    let z2 = agg.w2_minus_2chi.z_score();
    Ok(NishimoriReport {
        upsilon_minus_chi: agg.upsilon_minus_chi,
        z_upsilon_chi: z1,
        w2_minus_2chi: agg.w2_minus_2chi,
        z_w2: z2,
        flagged: z1.abs() > 3.0 || z2.abs() > 3.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(samples: Vec<(i64, i64)>) -> WormChainResult {
        let mut sector_counts = BTreeMap::new();
        for &s in &samples {
            *sector_counts.entry(s).or_insert(0) += 1;
        }
        WormChainResult {
            size: 4,
            alpha: 0.3,
            beta: 0.3,
            seed: 0,
            energy_trace: vec![0; samples.len()],
            winding_samples: samples,
            sector_counts,
            correlator: None,
            attempts: 0,
            accepted: 0,
            therm_loops: 0,
        }
    }

    #[test]
    fn all_zero_windings() {
        let s = realization_stats(&chain(vec![(0, 0); 10])).unwrap();
        assert_eq!(s.upsilon_k, 0.0);
        assert_eq!(s.sector_probs[&(0, 0)], 1.0);
        assert!(s.decoded());
        assert!(realization_stats(&chain(vec![])).is_err());
    }

    #[test]
    fn alternating_windings() {
        let s = realization_stats(&chain(vec![(1, 0), (-1, 0), (1, 0), (-1, 0)])).unwrap();
        assert_eq!(s.mean_w.0, 0.0);
        assert_eq!(s.mean_w2.0, 1.0);
        assert_eq!(s.upsilon_k, 0.5);
        assert!(s.top_tied);
        assert!(!s.decoded());
    }

    #[test]
    fn tie_with_zero_sector_fails() {
        let s = realization_stats(&chain(vec![(0, 0), (1, 0), (0, 0), (1, 0), (0, 1)])).unwrap();
        assert_eq!(s.most_likely_sector, (0, 0));
        assert!(s.top_tied && !s.decoded());
        let sum: f64 = s.sector_probs.values().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_realizations_have_zero_error() {
        let s = realization_stats(&chain(vec![(0, 0), (1, 0), (0, 0)])).unwrap();
        let v: Vec<_> = (0..5).map(|i| s.clone().with_realization(i)).collect();
        let a = aggregate(&v).unwrap();
        assert_eq!(a.upsilon_bar.error, 0.0);
        assert_eq!(a.chi.error, 0.0);
        assert!(aggregate(&v[..1]).is_err());
    }

    #[test]
    fn chi_from_opposite_means() {
        let a = RealizationStats::ground_state(0.3, 4, (1, 0)).with_realization(0);
        let b = RealizationStats::ground_state(0.3, 4, (-1, 0)).with_realization(1);
        let agg = aggregate(&[a, b]).unwrap();
        assert_eq!(agg.chi.value, 0.5);
        assert_eq!(agg.w2_bar.value, agg.upsilon_bar.value + agg.chi.value);
    }

    #[test]
    fn aggregate_is_order_invariant() {
        let v: Vec<_> = (0..20)
            .map(|i| {
                let s = vec![(i % 3 - 1, 0), (0, i % 2), (0, 0), (1, 1)];
                realization_stats(&chain(s)).unwrap().with_realization(i as usize)
            })
            .collect();
        let mut rev = v.clone();
        rev.reverse();
        assert_eq!(aggregate(&v).unwrap(), aggregate(&rev).unwrap());
    }

    #[test]
    fn nishimori_report_guard_and_zero() {
        let mut agg = DisorderAggregate {
            n_realizations: 2,
            alpha: 0.45,
            beta: 0.15,
            size: 8,
            upsilon_bar: Estimate::new(0.2, 0.01),
            chi: Estimate::new(0.2, 0.01),
            w2_bar: Estimate::new(0.4, 0.01),
            failure_rate: Estimate::new(0.0, 0.0),
            upsilon_minus_chi: Estimate::new(0.0, 0.01),
            w2_minus_2chi: Estimate::new(0.0, 0.01),
            r1: None,
        };
        assert!(matches!(nishimori_identity_report(&agg), Err(Error::OffNishimoriLine { .. })));
        agg.beta = 0.45;
        let r = nishimori_identity_report(&agg).unwrap();
        assert_eq!(r.z_upsilon_chi, 0.0);
        assert!(!r.flagged);
    }

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let xs: Vec<f64> = (0..10).map(|i| (i * i % 7) as f64).collect();
        let blocks: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let jk = jackknife(&blocks, |m| m[0]).unwrap();
        let se = mean_and_error(&xs).unwrap();
        assert!((jk.value - se.value).abs() < 1e-12);
        assert!((jk.error - se.error).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }
}
