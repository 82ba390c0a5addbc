//! Finite-size scaling: Weber–Minnhagen fits and scaling collapses.
//!
//! At a BKT point the stiffness follows
//!
//! ```text
//! Υ(L) = Υ_∞ + 1 / (π (ln L + c))
//! ```
//!
//! which is fitted at every `α` of a dataset; the critical point is where
//! the weighted rms residual is smallest. Collapses map `(α, L, value)` to
//! scaling coordinates and score how well different sizes overlap.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoders::ThresholdCurve;
use crate::error::{Error, Result};
use crate::noise::disorder_variance;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub alpha: f64,
    pub size: usize,
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Upsilon,
    Chi,
    W2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StiffnessDataset {
    points: Vec<DataPoint>,
}

impl StiffnessDataset {
    pub fn new(points: Vec<DataPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InsufficientData("empty dataset".into()));
        }
        for p in &points {
            if !(p.error > 0.0 && p.error.is_finite()) || !p.value.is_finite() || !p.alpha.is_finite() || p.size < 2 {
                return Err(Error::InvalidParameter(format!("bad data point {p:?}")));
            }
        }
        Ok(Self { points })
    }

    /// Curve values with errors floored at `error_floor`, which must be positive.
    /// For clean scans the control parameter is `β`.
    pub fn from_curve(curve: &ThresholdCurve, quantity: Quantity, error_floor: f64) -> Result<Self> {
        let clean = matches!(curve.points, crate::decoders::PointSet::CleanBeta { .. });
        Self::new(
            curve
                .curve
                .iter()
                .map(|p| {
                    let e = match quantity {
                        Quantity::Upsilon => p.upsilon,
                        Quantity::Chi => p.chi,
                        Quantity::W2 => p.w2,
                    };
                    DataPoint {
                        alpha: if clean { p.beta } else { p.alpha },
                        size: p.size,
                        value: e.value,
                        error: e.error.max(error_floor),
                    }
                })
                .collect(),
        )
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn alphas(&self) -> Vec<f64> {
        let mut a: Vec<f64> = self.points.iter().map(|p| p.alpha).collect();
        a.sort_by(f64::total_cmp);
        a.dedup();
        a
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.points.iter().map(|p| p.size).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn at(&self, alpha: f64) -> Vec<DataPoint> {
        let mut v: Vec<DataPoint> = self.points.iter().filter(|p| p.alpha == alpha).copied().collect();
        v.sort_by_key(|p| p.size);
        v
    }

    pub fn of_size(&self, size: usize) -> Vec<DataPoint> {
        let mut v: Vec<DataPoint> = self.points.iter().filter(|p| p.size == size).copied().collect();
        v.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    Bkt1,
    Bkt2,
    PowerLaw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Refinement {
    None,
    #[default]
    Parabolic,
    /// Intersect straight lines through the two grid points on each side of the minimum.
    LinearExtrapolation,
}

/// Weber–Minnhagen fit at one `α`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha: f64,
    pub rms: f64,
    pub jump: f64,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub kind: FitKind,
    /// `None` when the dataset is identically zero.
    pub alpha_c: Option<f64>,
    /// Grid point with the smallest rms.
    pub alpha_c_grid: Option<f64>,
    pub jump: Option<f64>,
    pub c: Option<f64>,
    pub nu: Option<f64>,
    pub profile: Vec<AlphaFit>,
    /// Refinement actually applied; falls back to `None` at the grid edges.
    pub refinement: Refinement,
    pub deep_disordered: bool,
}

const C_SCAN: usize = 600;
const C_MAX: f64 = 1e3;

struct WmProblem {
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    fixed: Option<f64>,
}

impl WmProblem {
    fn g(&self, i: usize, c: f64) -> f64 {
        1.0 / (PI * (self.x[i] + c))
    }

    fn jump_for(&self, c: f64) -> f64 {
        match self.fixed {
            Some(j) => j,
            None => {
                let sw: f64 = self.w.iter().sum();
                let s: f64 = (0..self.x.len()).map(|i| self.w[i] * (self.y[i] - self.g(i, c))).sum();
                (s / sw).clamp(f64::MIN_POSITIVE, 1.0)
            }
        }
    }

    fn sse(&self, jump: f64, c: f64) -> f64 {
        (0..self.x.len())
            .map(|i| {
                let r = self.y[i] - jump - self.g(i, c);
                self.w[i] * r * r
            })
            .sum()
    }

    fn profile(&self, c: f64) -> f64 {
        self.sse(self.jump_for(c), c)
    }
}

/// Fits `Υ_∞` (unless fixed) and `c` for the points at a single `α`.
pub fn fit_at_alpha(points: &[DataPoint], fixed_jump: Option<f64>) -> Result<AlphaFit> {
    let mut sizes: Vec<usize> = points.iter().map(|p| p.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(Error::InsufficientData(format!("need 3 sizes per alpha, got {}", sizes.len())));
    }
    let prob = WmProblem {
        x: points.iter().map(|p| (p.size as f64).ln()).collect(),
        y: points.iter().map(|p| p.value).collect(),
        w: points.iter().map(|p| 1.0 / (p.error * p.error)).collect(),
        fixed: fixed_jump,
    };
    let xmin = prob.x.iter().cloned().fold(f64::INFINITY, f64::min);
    // c = e^t - ln L_min keeps ln L + c > 0.
    let c_of = |t: f64| t.exp() - xmin;
    let (t_lo, t_hi) = (1e-6f64.ln(), (C_MAX + xmin).ln());
    let ts: Vec<f64> = (0..C_SCAN).map(|i| t_lo + (t_hi - t_lo) * i as f64 / (C_SCAN - 1) as f64).collect();
    let vals: Vec<f64> = ts.iter().map(|&t| prob.profile(c_of(t))).collect();
    let best = (0..C_SCAN).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    let (mut a, mut b) = (ts[best.saturating_sub(1)], ts[(best + 1).min(C_SCAN - 1)]);
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut t1 = b - gr * (b - a);
    let mut t2 = a + gr * (b - a);
    let (mut f1, mut f2) = (prob.profile(c_of(t1)), prob.profile(c_of(t2)));
    for _ in 0..200 {
        if f1 <= f2 {
            b = t2;
            t2 = t1;
            f2 = f1;
            t1 = b - gr * (b - a);
            f1 = prob.profile(c_of(t1));
        } else {
            a = t1;
            t1 = t2;
            f1 = f2;
            t2 = a + gr * (b - a);
            f2 = prob.profile(c_of(t2));
        }
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    let mut c = c_of(0.5 * (a + b));
    let mut jump = prob.jump_for(c);
    let mut sse = prob.sse(jump, c);

    // Gauss-Newton polish in (Υ_∞, c), or c alone when the jump is fixed.
    for _ in 0..30 {
        let n = prob.x.len();
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let r = prob.y[i] - jump - prob.g(i, c);
            let dc = 1.0 / (PI * (prob.x[i] + c).powi(2));
            let w = prob.w[i];
            a11 += w;
            a12 += w * dc;
            a22 += w * dc * dc;
            g1 += w * r;
            g2 += w * r * dc;
        }
        let (dj, dc) = if fixed_jump.is_some() {
            (0.0, g2 / a22)
        } else {
            let det = a11 * a22 - a12 * a12;
            if det.abs() < 1e-300 {
                break;
            }
            ((a22 * g1 - a12 * g2) / det, (a11 * g2 - a12 * g1) / det)
        };
        let nc = c + dc;
        let nj = if fixed_jump.is_some() { jump } else { (jump + dj).clamp(f64::MIN_POSITIVE, 1.0) };
        if !(nc + xmin > 0.0 && nc <= C_MAX) {
            break;
        }
        let ns = prob.sse(nj, nc);
        if !(ns <= sse) {
            break;
        }
        let done = (nc - c).abs() <= 1e-15 * c.abs().max(1.0);
        c = nc;
        jump = nj;
        sse = ns;
        if done {
            break;
        }
    }
    let sw: f64 = prob.w.iter().sum();
    Ok(AlphaFit { alpha: points[0].alpha, rms: (sse / sw).sqrt(), jump, c })
}

/// Weber–Minnhagen scan with parabolic refinement of the rms minimum.
pub fn weber_minnhagen_fit(data: &StiffnessDataset, fixed_jump: Option<f64>) -> Result<ScalingFit> {
    weber_minnhagen_fit_with(data, fixed_jump, Refinement::Parabolic)
}

pub fn weber_minnhagen_fit_with(
    data: &StiffnessDataset,
    fixed_jump: Option<f64>,
    refinement: Refinement,
) -> Result<ScalingFit> {
    let kind = if fixed_jump.is_some() { FitKind::Bkt1 } else { FitKind::Bkt2 };
    if let Some(j) = fixed_jump {
        if !(j > 0.0 && j <= 1.0) {
            return Err(Error::InvalidParameter(format!("fixed jump must be in (0, 1], got {j}")));
        }
    }
    if data.points().iter().all(|p| p.value == 0.0) {
        return Ok(ScalingFit {
            kind,
            alpha_c: None,
            alpha_c_grid: None,
            jump: None,
            c: None,
            nu: None,
            profile: Vec::new(),
            refinement: Refinement::None,
            deep_disordered: true,
        });
    }
    let alphas = data.alphas();
    let profile: Vec<AlphaFit> =
        alphas.par_iter().map(|&a| fit_at_alpha(&data.at(a), fixed_jump)).collect::<Result<_>>()?;
    let i = (0..profile.len()).min_by(|&a, &b| profile[a].rms.total_cmp(&profile[b].rms)).unwrap();
    let (alpha_c, used) = refine_minimum(&profile, i, refinement);
    let at_c = fit_at_alpha(&interpolate_dataset(data, alpha_c), fixed_jump).ok();
    let (jump, c) = match at_c {
        Some(f) if used != Refinement::None => (f.jump, f.c),
        _ => (profile[i].jump, profile[i].c),
    };
    Ok(ScalingFit {
        kind,
        alpha_c: Some(alpha_c),
        alpha_c_grid: Some(profile[i].alpha),
        jump: Some(jump),
        c: Some(c),
        nu: None,
        profile,
        refinement: used,
        deep_disordered: false,
    })
}

/// Fit at an arbitrary `alpha`, interpolating each size linearly between grid points.
/// With `fixed_jump = None` this gives the free jump at a critical point located by other means.
pub fn fit_at(data: &StiffnessDataset, alpha: f64, fixed_jump: Option<f64>) -> Result<AlphaFit> {
    fit_at_alpha(&interpolate_dataset(data, alpha), fixed_jump)
}

fn refine_minimum(profile: &[AlphaFit], i: usize, refinement: Refinement) -> (f64, Refinement) {
    let n = profile.len();
    let at = |j: usize| (profile[j].alpha, profile[j].rms);
    match refinement {
        Refinement::Parabolic if i > 0 && i + 1 < n => {
            let ((x0, y0), (x1, y1), (x2, y2)) = (at(i - 1), at(i), at(i + 1));
            let d = (x0 - x1) * (x0 - x2) * (x1 - x2);
            let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / d;
            let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / d;
            if a > 0.0 {
                ((-b / (2.0 * a)).clamp(x0, x2), Refinement::Parabolic)
            } else {
                (x1, Refinement::None)
            }
        }
        Refinement::LinearExtrapolation if i >= 2 && i + 2 < n => {
            let ((xa, ya), (xb, yb)) = (at(i - 2), at(i - 1));
            let ((xc, yc), (xd, yd)) = (at(i + 1), at(i + 2));
            let (m1, m2) = ((yb - ya) / (xb - xa), (yd - yc) / (xd - xc));
            if m1 < 0.0 && m2 > 0.0 {
                let x = (yc - m2 * xc - yb + m1 * xb) / (m1 - m2);
                (x.clamp(xb, xc), Refinement::LinearExtrapolation)
            } else {
                (profile[i].alpha, Refinement::None)
            }
        }
        _ => (profile[i].alpha, Refinement::None),
    }
}

/// Per-size linear interpolation of the dataset at `alpha`.
fn interpolate_dataset(data: &StiffnessDataset, alpha: f64) -> Vec<DataPoint> {
    data.sizes()
        .into_iter()
        .filter_map(|l| {
            let pts = data.of_size(l);
            interpolate(&pts.iter().map(|p| (p.alpha, p.value, p.error)).collect::<Vec<_>>(), alpha)
                .map(|(v, e)| DataPoint { alpha, size: l, value: v, error: e })
        })
        .collect()
}

/// Linear interpolation of `(x, y, err)` sorted by `x`; `None` outside the range.
fn interpolate(curve: &[(f64, f64, f64)], x: f64) -> Option<(f64, f64)> {
    let j = curve.partition_point(|p| p.0 < x);
    if j < curve.len() && curve[j].0 == x {
        return Some((curve[j].1, curve[j].2));
    }
    if j == 0 || j == curve.len() {
        return None;
    }
    let (a, b) = (curve[j - 1], curve[j]);
    let t = (x - a.0) / (b.0 - a.0);
    Some((a.1 + t * (b.1 - a.1), a.2 + t * (b.2 - a.2)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapsePoint {
    pub alpha: f64,
    pub size: usize,
    pub x: f64,
    pub y: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejected {
    pub alpha: f64,
    pub size: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Collapse {
    pub points: Vec<CollapsePoint>,
    /// Mean squared normalized deviation from the other sizes' interpolated curves.
    pub quality: f64,
    pub rejected: Vec<Rejected>,
}

/// Overlap score: for each point, distance to every other size's curve at the same `x`.
/// One size scores 0; sizes that never overlap score infinity.
pub fn collapse_quality(points: &[CollapsePoint]) -> f64 {
    let mut sizes: Vec<usize> = points.iter().map(|p| p.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 2 {
        return 0.0;
    }
    let curves: Vec<Vec<(f64, f64, f64)>> = sizes
        .iter()
        .map(|&l| {
            let mut c: Vec<_> = points.iter().filter(|p| p.size == l).map(|p| (p.x, p.y, p.error)).collect();
            c.sort_by(|a, b| a.0.total_cmp(&b.0));
            c
        })
        .collect();
    let mut sum = 0.0;
    let mut count = 0usize;
    for p in points {
        for (ci, &l) in sizes.iter().enumerate() {
            if l == p.size {
                continue;
            }
            if let Some((y, e)) = interpolate(&curves[ci], p.x) {
                sum += (p.y - y).powi(2) / (p.error * p.error + e * e);
                count += 1;
            }
        }
    }
    if count == 0 {
        f64::INFINITY
    } else {
        sum / count as f64
    }
}

/// `f = -ln L + a (1/α - 1/α_c)^{-1/2}`, `g = value / (1 + 1/(ln L + c))`, for `α < α_c` only.
pub fn bkt_collapse(data: &StiffnessDataset, alpha_c: f64, a: f64, c: f64) -> Result<Collapse> {
    let mut points = Vec::new();
    let mut rejected = Vec::new();
    for p in data.points() {
        let ln_l = (p.size as f64).ln();
        if p.alpha >= alpha_c {
            rejected.push(Rejected { alpha: p.alpha, size: p.size, reason: "alpha >= alpha_c".into() });
            continue;
        }
        if ln_l + c <= 0.0 {
            rejected.push(Rejected { alpha: p.alpha, size: p.size, reason: "ln L + c <= 0".into() });
            continue;
        }
        let s = 1.0 / (1.0 + 1.0 / (ln_l + c));
        points.push(CollapsePoint {
            alpha: p.alpha,
            size: p.size,
            x: -ln_l + a / (1.0 / p.alpha - 1.0 / alpha_c).sqrt(),
            y: p.value * s,
            error: p.error * s,
        });
    }
    if points.is_empty() {
        return Err(Error::InsufficientData("no points below alpha_c".into()));
    }
    let quality = collapse_quality(&points);
    Ok(Collapse { points, quality, rejected })
}

/// `x = L^{1/ν} (α - α_c)` against the raw value.
pub fn power_law_collapse(data: &StiffnessDataset, alpha_c: f64, nu: f64) -> Result<Collapse> {
    if data.sizes().len() < 3 {
        return Err(Error::InsufficientData(format!("need 3 sizes, got {}", data.sizes().len())));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("nu must be positive, got {nu}")));
    }
    let points: Vec<CollapsePoint> = data
        .points()
        .iter()
        .map(|p| CollapsePoint {
            alpha: p.alpha,
            size: p.size,
            x: (p.size as f64).powf(1.0 / nu) * (p.alpha - alpha_c),
            y: p.value,
            error: p.error,
        })
        .collect();
    let quality = collapse_quality(&points);
    Ok(Collapse { points, quality, rejected: Vec::new() })
}

/// `1.00, 1.02, …, 4.00`.
pub fn default_nu_grid() -> Vec<f64> {
    (0..=150).map(|i| 1.0 + 0.02 * i as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawSearch {
    pub alpha_c: f64,
    pub nu: f64,
    pub quality: f64,
    /// `(α_c, ν, quality)` for every grid point, α_c-major.
    pub table: Vec<(f64, f64, f64)>,
}

impl PowerLawSearch {
    pub fn as_fit(&self) -> ScalingFit {
        ScalingFit {
            kind: FitKind::PowerLaw,
            alpha_c: Some(self.alpha_c),
            alpha_c_grid: Some(self.alpha_c),
            jump: None,
            c: None,
            nu: Some(self.nu),
            profile: Vec::new(),
            refinement: Refinement::None,
            deep_disordered: false,
        }
    }
}

/// Grid point minimizing the power-law collapse quality; ties go to the earliest point.
pub fn power_law_grid_search(data: &StiffnessDataset, alpha_grid: &[f64], nu_grid: &[f64]) -> Result<PowerLawSearch> {
    if alpha_grid.is_empty() || nu_grid.is_empty() {
        return Err(Error::InvalidParameter("empty search grid".into()));
    }
    let pairs: Vec<(f64, f64)> = alpha_grid.iter().flat_map(|&a| nu_grid.iter().map(move |&n| (a, n))).collect();
    let table: Vec<(f64, f64, f64)> = pairs
        .par_iter()
        .map(|&(a, n)| power_law_collapse(data, a, n).map(|c| (a, n, c.quality)))
        .collect::<Result<_>>()?;
    let best = table.iter().copied().fold(None::<(f64, f64, f64)>, |acc, t| match acc {
        Some(b) if b.2 <= t.2 => Some(b),
        _ => Some(t),
    });
    let (alpha_c, nu, quality) = best.unwrap();
    Ok(PowerLawSearch { alpha_c, nu, quality, table })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub alpha: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCrossings {
    pub small: usize,
    pub large: usize,
    pub crossings: Vec<Crossing>,
    /// Crossing where the difference changes fastest.
    pub primary: Option<Crossing>,
}

/// Sign changes of `value(L_large) - value(L_small)` for each adjacent pair of sizes.
pub fn find_crossings(data: &StiffnessDataset) -> Vec<PairCrossings> {
    let sizes = data.sizes();
    sizes
        .windows(2)
        .map(|w| {
            let (s, l) = (data.of_size(w[0]), data.of_size(w[1]));
            let common: Vec<(f64, f64, f64)> = s
                .iter()
                .filter_map(|p| l.iter().find(|q| q.alpha == p.alpha).map(|q| (p.alpha, p.value, q.value - p.value)))
                .collect();
            let mut crossings = Vec::new();
            let mut best: Option<(f64, Crossing)> = None;
            for pair in common.windows(2) {
                let ((a0, v0, d0), (a1, v1, d1)) = (pair[0], pair[1]);
                if d0 == 0.0 || (d0 < 0.0) != (d1 < 0.0) && d1 != 0.0 {
                    let t = if d0 == d1 { 0.0 } else { d0 / (d0 - d1) };
                    let c = Crossing { alpha: a0 + t * (a1 - a0), value: v0 + t * (v1 - v0) };
                    let slope = ((d1 - d0) / (a1 - a0)).abs();
                    if best.is_none_or(|b| slope > b.0) {
                        best = Some((slope, c));
                    }
                    crossings.push(c);
                }
            }
            if let Some(&(a, v, d)) = common.last() {
                if d == 0.0 {
                    crossings.push(Crossing { alpha: a, value: v });
                    best.get_or_insert((0.0, Crossing { alpha: a, value: v }));
                }
            }
            PairCrossings { small: w[0], large: w[1], crossings, primary: best.map(|b| b.1) }
        })
        .collect()
}

/// Stiffness jump expected above the Nishimori line, `2/π - D(α)`.
pub fn predicted_jump(alpha: f64) -> f64 {
    2.0 / PI - disorder_variance(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wm(l: usize, jump: f64, c: f64) -> f64 {
        jump + 1.0 / (PI * ((l as f64).ln() + c))
    }

    fn manufactured(alpha_c: f64, jump: f64, c: f64) -> StiffnessDataset {
        let mut pts = Vec::new();
        for i in 0..11 {
            let a = 0.32 + 0.01 * i as f64;
            for &l in &[8usize, 16, 32, 64] {
                // Off the critical point the size dependence is no longer logarithmic.
                let dev = (a - alpha_c) * (l as f64).powf(0.7) * 0.01;
                pts.push(DataPoint { alpha: a, size: l, value: wm(l, jump, c) + dev, error: 0.01 });
            }
        }
        StiffnessDataset::new(pts).unwrap()
    }

    #[test]
    fn recovers_manufactured_parameters() {
        let ac = 0.32 + 0.01 * 5.0;
        let d = manufactured(ac, 1.0 / PI, 7.11);
        let one = weber_minnhagen_fit_with(&d, Some(1.0 / PI), Refinement::None).unwrap();
        assert_eq!(one.alpha_c, Some(ac));
        assert!((one.c.unwrap() - 7.11).abs() < 1e-8, "{:?}", one.c);
        let at = one.profile.iter().find(|p| p.alpha == ac).unwrap();
        assert!(at.rms < 1e-10);
        let two = weber_minnhagen_fit_with(&d, None, Refinement::None).unwrap();
        assert_eq!(two.alpha_c, Some(ac));
        assert!((two.jump.unwrap() - 1.0 / PI).abs() < 1e-8);
        assert!((two.c.unwrap() - 7.11).abs() < 1e-8);
    }

    #[test]
    fn fit_at_interpolates_between_grid_points() {
        let d = manufactured(0.37, 1.0 / PI, 7.11);
        let on_grid = fit_at(&d, 0.37, None).unwrap();
        assert!((on_grid.jump - 1.0 / PI).abs() < 1e-8);
        let between = fit_at(&d, 0.365, None).unwrap();
        assert_eq!(between.alpha, 0.365);
        assert!((between.jump - 1.0 / PI).abs() < 0.02);
        assert!(fit_at(&d, 0.5, None).is_err());
    }

    #[test]
    fn degenerate_dataset_flagged() {
        let pts = (0..3)
            .flat_map(|i| {
                [8, 16, 32].map(|l| DataPoint { alpha: 0.1 + 0.01 * i as f64, size: l, value: 0.0, error: 1e-3 })
            })
            .collect();
        let f = weber_minnhagen_fit(&StiffnessDataset::new(pts).unwrap(), Some(1.0 / PI)).unwrap();
        assert!(f.deep_disordered);
        assert!(f.alpha_c.is_none());
    }

    #[test]
    fn too_few_sizes() {
        let pts = vec![
            DataPoint { alpha: 0.3, size: 8, value: 0.3, error: 0.01 },
            DataPoint { alpha: 0.3, size: 16, value: 0.3, error: 0.01 },
        ];
        assert!(weber_minnhagen_fit(&StiffnessDataset::new(pts).unwrap(), None).is_err());
    }

    #[test]
    fn refinements() {
        let prof: Vec<AlphaFit> = (0..7)
            .map(|i| {
                let a = 0.1 * i as f64;
                AlphaFit { alpha: a, rms: (a - 0.33).abs(), jump: 0.0, c: 0.0 }
            })
            .collect();
        let (x, used) = refine_minimum(&prof, 3, Refinement::LinearExtrapolation);
        assert_eq!(used, Refinement::LinearExtrapolation);
        assert!((x - 0.33).abs() < 1e-12);
        let q: Vec<AlphaFit> = prof.iter().map(|p| AlphaFit { rms: (p.alpha - 0.27).powi(2), ..*p }).collect();
        let (x, used) = refine_minimum(&q, 3, Refinement::Parabolic);
        assert_eq!(used, Refinement::Parabolic);
        assert!((x - 0.27).abs() < 1e-12);
        assert_eq!(refine_minimum(&q, 0, Refinement::Parabolic).1, Refinement::None);
    }

    fn phi(x: f64) -> f64 {
        0.5 * (1.0 + (3.0 * x).tanh())
    }

    fn power_data(ac: f64, nu: f64) -> StiffnessDataset {
        let mut pts = Vec::new();
        for &l in &[16usize, 32, 64, 128] {
            for i in 0..41 {
                let a = 0.24 + 0.00125 * i as f64;
                pts.push(DataPoint {
                    alpha: a,
                    size: l,
                    value: phi((l as f64).powf(1.0 / nu) * (a - ac)),
                    error: 0.01,
                });
            }
        }
        StiffnessDataset::new(pts).unwrap()
    }

    #[test]
    fn power_law_grid_recovers_parameters() {
        let d = power_data(0.265, 2.2);
        let alphas: Vec<f64> = (0..21).map(|i| 0.255 + 0.001 * i as f64).collect();
        let s = power_law_grid_search(&d, &alphas, &default_nu_grid()).unwrap();
        assert!((s.alpha_c - 0.265).abs() < 1e-9, "{}", s.alpha_c);
        assert!((s.nu - 2.2).abs() < 1e-9, "{}", s.nu);
        let off = power_law_collapse(&d, 0.267, 2.2).unwrap().quality;
        assert!(off > s.quality);
    }

    #[test]
    fn single_size_collapse_is_perfect() {
        let pts =
            (0..5).map(|i| DataPoint { alpha: 0.2 + 0.01 * i as f64, size: 16, value: 0.1, error: 0.01 }).collect();
        let d = StiffnessDataset::new(pts).unwrap();
        assert_eq!(bkt_collapse(&d, 0.37, 7.6, 7.11).unwrap().quality, 0.0);
        assert!(power_law_collapse(&d, 0.3, 2.0).is_err());
    }

    #[test]
    fn bkt_collapse_of_manufactured_data() {
        let (ac, a, c) = (0.37, 7.6, 7.11);
        let g = |f: f64| 0.3 / (1.0 + (0.5 * f).exp());
        let mut pts = Vec::new();
        for &l in &[8usize, 16, 32, 64] {
            for i in 0..28 {
                let al = 0.20 + 0.006 * i as f64;
                let ln_l = (l as f64).ln();
                let f = -ln_l + a / (1.0 / al - 1.0 / ac).sqrt();
                pts.push(DataPoint { alpha: al, size: l, value: g(f) * (1.0 + 1.0 / (ln_l + c)), error: 0.01 });
            }
            pts.push(DataPoint { alpha: 0.40, size: l, value: 0.3, error: 0.01 });
        }
        let d = StiffnessDataset::new(pts).unwrap();
        let good = bkt_collapse(&d, ac, a, c).unwrap();
        assert_eq!(good.rejected.len(), 4);
        assert!(good.quality < 0.01, "{}", good.quality);
        let worse = bkt_collapse(&d, ac - 0.02, a, c).unwrap();
        assert!(worse.quality > good.quality);
    }

    #[test]
    fn crossing_finder() {
        let mut pts = Vec::new();
        for &l in &[16usize, 32] {
            for i in 0..5 {
                let a = 0.25 + 0.01 * i as f64;
                pts.push(DataPoint { alpha: a, size: l, value: 0.3 + (a - 0.265) * l as f64 * 0.1, error: 0.01 });
            }
        }
        let c = find_crossings(&StiffnessDataset::new(pts).unwrap());
        assert_eq!(c.len(), 1);
        let p = c[0].primary.unwrap();
        assert!((p.alpha - 0.265).abs() < 1e-12);
        assert!((p.value - 0.3).abs() < 1e-12);
    }

    #[test]
    fn predicted_jump_limits() {
        assert_eq!(predicted_jump(0.0), 2.0 / PI);
        assert!(predicted_jump(0.37) < 2.0 / PI);
    }
}
