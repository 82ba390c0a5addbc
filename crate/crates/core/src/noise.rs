//! Discrete Gaussian error model `p_k ∝ exp(-k² / 2α)` on every link.

use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{LinkField, TorusLattice};

pub const DEFAULT_TAIL_EPSILON: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    pub alpha: f64,
    pub tail_epsilon: f64,
}

impl NoiseParams {
    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_tail(alpha, DEFAULT_TAIL_EPSILON)
    }

    pub fn with_tail(alpha: f64, tail_epsilon: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if !(tail_epsilon > 0.0 && tail_epsilon < 1e-3) {
            return Err(Error::InvalidParameter(format!("tail_epsilon out of range: {tail_epsilon}")));
        }
        Ok(Self { alpha, tail_epsilon })
    }
}

#[inline]
fn weight(alpha: f64, k: i64) -> f64 {
    let k = k as f64;
    (-k * k / (2.0 * alpha)).exp()
}

/// Largest |k| whose weight still matters relative to `eps`.
fn series_cutoff(alpha: f64, eps: f64) -> i64 {
    // exp(-k^2 / 2α) < eps * 1e-3  <=>  k > sqrt(2α ln(1e3 / eps))
    let k = (2.0 * alpha * (1e3 / eps).ln()).sqrt().ceil() as i64;
    k.max(1) + 1
}

/// `θ₃(0, q) = Σ_k q^{k²}` for `q = exp(-1/2α)`.
pub fn theta3(alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 1.0;
    }
    let kmax = series_cutoff(alpha, 1e-18);
    // Small terms first.
    (1..=kmax).rev().map(|k| 2.0 * weight(alpha, k)).sum::<f64>() + 1.0
}

/// `θ₂(0, q) = Σ_{n∈ℤ} q^{(n+1/2)²}` evaluated at nome `q = exp(-2/α)`.
pub fn theta2_at_nome_exp_minus_two_over(alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let ln_q = -2.0 / alpha;
    let nmax = series_cutoff(alpha, 1e-18);
    (0..=nmax)
        .rev()
        .map(|n| {
            let h = n as f64 + 0.5;
            2.0 * (h * h * ln_q).exp()
        })
        .sum()
}

/// Normalized discrete Gaussian on ℤ with a truncated sampling table.
#[derive(Clone, Debug)]
pub struct IntegerGaussian {
    alpha: f64,
    norm: f64,
    k_max: i64,
    /// `cum_mag[m] = P(|k| <= m)` for `m = 0..=k_max`, last entry forced to 1.
    cum_mag: Vec<f64>,
}

impl IntegerGaussian {
    pub fn new(params: NoiseParams) -> Self {
        let alpha = params.alpha;
        if alpha == 0.0 {
            return Self { alpha, norm: 1.0, k_max: 0, cum_mag: vec![1.0] };
        }
        let norm = theta3(alpha);
        let mut cum_mag = vec![1.0 / norm];
        let mut k = 0;
        loop {
            let tail = 1.0 - cum_mag[k as usize];
            if tail < params.tail_epsilon {
                break;
            }
            k += 1;
            let next = cum_mag[k as usize - 1] + 2.0 * weight(alpha, k) / norm;
            cum_mag.push(next);
            // Rounding can leave the tail stuck just above epsilon.
            if 2.0 * weight(alpha, k + 1) / norm < params.tail_epsilon * 1e-3 {
                break;
            }
        }
        *cum_mag.last_mut().unwrap() = 1.0;
        Self { alpha, norm, k_max: k, cum_mag }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Normalization `θ₃(0, e^{-1/2α})`.
    pub fn normalization(&self) -> f64 {
        self.norm
    }

    /// Largest |k| the sampler can emit.
    pub fn k_max(&self) -> i64 {
        self.k_max
    }

    pub fn pmf(&self, k: i64) -> f64 {
        if self.alpha == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        weight(self.alpha, k) / self.norm
    }

    /// `P(|k| >= m)`.
    pub fn prob_abs_at_least(&self, m: i64) -> f64 {
        if m <= 0 {
            return 1.0;
        }
        let below: f64 = (1 - m..m).map(|k| self.pmf(k)).sum();
        (1.0 - below).max(0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        if u < self.cum_mag[0] {
            return 0;
        }
        let mag = self.cum_mag.iter().position(|&c| u < c).unwrap_or(self.cum_mag.len() - 1) as i64;
        if rng.random::<bool>() {
            mag
        } else {
            -mag
        }
    }

    /// i.i.d. draw on every link in canonical link order.
    pub fn sample_field<R: Rng + ?Sized>(&self, lattice: TorusLattice, rng: &mut R) -> LinkField {
        let values = (0..lattice.num_links()).map(|_| self.sample(rng)).collect();
        LinkField::from_values(lattice, values).expect("length matches lattice")
    }
}

pub fn sample_error<R: Rng + ?Sized>(lattice: TorusLattice, params: NoiseParams, rng: &mut R) -> LinkField {
    IntegerGaussian::new(params).sample_field(lattice, rng)
}

/// Variance of a single link error, `Σ k² e^{-k²/2α} / Σ e^{-k²/2α}`.
pub fn disorder_variance(alpha: f64) -> f64 {
    if alpha <= 0.0 {
        return 0.0;
    }
    let kmax = series_cutoff(alpha, 1e-18);
    let num: f64 = (1..=kmax).rev().map(|k| 2.0 * (k * k) as f64 * weight(alpha, k)).sum();
    num / theta3(alpha)
}

/// Effective phase-flip probability seen by a decoder that only learns
/// charges mod 2: the odd-k mass, `θ₂(0, e^{-2/α}) / θ₃(0, e^{-1/2α})`.
pub fn phase_flip_probability(alpha: f64) -> f64 {
    if alpha <= 0.0 {
        return 0.0;
    }
    theta2_at_nome_exp_minus_two_over(alpha) / theta3(alpha)
}

/// Inverts [`phase_flip_probability`] by bisection.
pub fn invert_phase_flip(p_target: f64) -> Result<f64> {
    if !(p_target > 0.0 && p_target < 0.5) {
        return Err(Error::InvalidParameter(format!("phase-flip probability must lie in (0, 1/2), got {p_target}")));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while phase_flip_probability(hi) < p_target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidParameter(format!("cannot bracket p = {p_target}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phase_flip_probability(mid) < p_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let miss = (phase_flip_probability(alpha) - p_target).abs();
    if miss >= 1e-10 {
        return Err(Error::InvalidParameter(format!("bisection stalled {miss:e} away from p = {p_target}")));
    }
    Ok(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dist(alpha: f64) -> IntegerGaussian {
        IntegerGaussian::new(NoiseParams::new(alpha).unwrap())
    }

    #[test]
    fn tiny_alpha_is_point_mass() {
        let d = dist(1e-6);
        assert_eq!(d.pmf(0), 1.0);
        assert_eq!(d.pmf(1), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lat = TorusLattice::new(708).unwrap(); // 1,002,528 links
        assert!(d.sample_field(lat, &mut rng).is_zero());
        assert_eq!(dist(0.0).pmf(0), 1.0);
        assert_eq!(dist(0.0).sample(&mut rng), 0);
    }

    #[test]
    fn neighbor_ratio_is_boltzmann_factor() {
        for alpha in [0.05, 0.3, 0.37, 1.0, 4.0] {
            let d = dist(alpha);
            let want = (-1.0 / (2.0 * alpha)).exp();
            assert!((d.pmf(1) / d.pmf(0) - want).abs() < 1e-14 * want.max(1e-300));
        }
    }

    #[test]
    fn heavy_error_probability_at_037() {
        let p = dist(0.37).prob_abs_at_least(2);
        assert!((p - 0.006).abs() < 0.001, "{p}");
    }

    #[test]
    fn pmf_normalized_symmetric_monotone() {
        for alpha in [0.01, 0.2, 0.5, 2.0, 30.0] {
            let d = dist(alpha);
            let total: f64 = (-d.k_max()..=d.k_max()).map(|k| d.pmf(k)).sum();
            assert!((1.0 - DEFAULT_TAIL_EPSILON - 1e-15..=1.0 + 1e-15).contains(&total), "{alpha}: {total}");
            for k in 0..=d.k_max() + 2 {
                assert_eq!(d.pmf(k), d.pmf(-k));
                assert!(d.pmf(k + 1) <= d.pmf(k));
            }
        }
    }

    #[test]
    fn sampler_histogram_matches_pmf() {
        let d = dist(0.37);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000_000u64;
        let mut counts = std::collections::BTreeMap::<i64, u64>::new();
        for _ in 0..n {
            *counts.entry(d.sample(&mut rng)).or_default() += 1;
        }
        for k in -3..=3 {
            let p = d.pmf(k);
            let expect = p * n as f64;
            let sigma = (n as f64 * p * (1.0 - p)).sqrt().max(1.0);
            let got = *counts.get(&k).unwrap_or(&0) as f64;
            assert!((got - expect).abs() < 4.0 * sigma, "k={k}: {got} vs {expect}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let lat = TorusLattice::new(16).unwrap();
        let p = NoiseParams::new(0.3).unwrap();
        let a = sample_error(lat, p, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_error(lat, p, &mut ChaCha8Rng::seed_from_u64(9));
        let c = sample_error(lat, p, &mut ChaCha8Rng::seed_from_u64(10));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn disorder_variance_values() {
        assert_eq!(disorder_variance(0.0), 0.0);
        let q = (-10.0f64).exp();
        let two_term = 2.0 * q / (1.0 + 2.0 * q);
        assert!(((disorder_variance(0.05) - two_term) / two_term).abs() < 1e-12);
        let grid: Vec<f64> = (1..=20).map(|i| 0.05 * i as f64).collect();
        for w in grid.windows(2) {
            assert!(disorder_variance(w[1]) > disorder_variance(w[0]));
        }
    }

    #[test]
    fn phase_flip_closed_forms() {
        assert_eq!(phase_flip_probability(0.0), 0.0);
        assert!((phase_flip_probability(0.37) - 0.34).abs() < 0.005);
        assert!((phase_flip_probability(0.265) - 0.232).abs() < 0.005);
        let a = invert_phase_flip(0.109).unwrap();
        assert!((a - 0.179).abs() < 0.002, "{a}");
        let back = invert_phase_flip(phase_flip_probability(0.3)).unwrap();
        assert!((back - 0.3).abs() < 1e-8);
    }

    #[test]
    fn odd_mass_matches_theta_ratio() {
        let mut alpha = 0.01;
        while alpha <= 2.0 {
            let d = dist(alpha);
            let odd: f64 = (-61..=61).filter(|k| k % 2 != 0).map(|k| d.pmf(k)).sum();
            assert!((odd - phase_flip_probability(alpha)).abs() < 1e-12, "{alpha}");
            alpha += 0.01;
        }
    }

    #[test]
    fn inversion_is_monotone_and_validates() {
        let ps = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3];
        let alphas: Vec<f64> = ps.iter().map(|&p| invert_phase_flip(p).unwrap()).collect();
        assert!(alphas.windows(2).all(|w| w[1] > w[0]));
        assert!(invert_phase_flip(0.0).is_err());
        assert!(invert_phase_flip(0.5).is_err());
        assert!(invert_phase_flip(-0.1).is_err());
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(NoiseParams::new(-0.1).is_err());
        assert!(NoiseParams::new(f64::NAN).is_err());
    }
}
