//! Worm-algorithm sampler for the disordered integer loop model
//!
//! ```text
//! Z_k = Σ_{J : ΔJ = 0} exp(-Σ_{iμ} (J_iμ + k_iμ)² / 2β)
//! ```
//!
//! One worm step starts the head and tail at a uniformly chosen site and
//! lets the head random-walk with Metropolis acceptance until it returns to
//! the tail. Moving the head along +μ increments `J` on the link it crosses;
//! moving along -μ decrements the link it crosses. With that convention the
//! tail carries divergence +1 and the head -1 while the worm is open.
//!
//! Every head-move attempt is one time step of the extended chain. Attempts
//! made while the worm is closed occur exactly once per loop, so the ratio
//! of open-state attempts at head-tail displacement `d` to the number of
//! loops estimates the translation-averaged two-point function
//! `⟨e^{i(θ_t - θ_{t+d})}⟩`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Direction, LinkField, TorusLattice};
use crate::seeds::{self, SimRng, Stream};

pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;
pub const DEFAULT_CORRELATOR_BLOCKS: usize = 16;

/// `(J + k)² / 2β`.
pub fn link_cost(j: i64, k: i64, beta: f64) -> f64 {
    let v = (j + k) as f64;
    v * v / (2.0 * beta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopModelParams {
    pub beta: f64,
    /// Disorder strength used to draw `k`; the sampler itself only sees `beta`.
    pub alpha: f64,
    pub n_therm_loops: u64,
    pub n_measure_loops: u64,
    pub measure_correlator: bool,
    pub seed: u64,
    pub step_cap: u64,
    pub correlator_blocks: usize,
}

impl LoopModelParams {
    pub fn new(alpha: f64, beta: f64, n_therm_loops: u64, n_measure_loops: u64, seed: u64) -> Self {
        Self {
            beta,
            alpha,
            n_therm_loops,
            n_measure_loops,
            measure_correlator: false,
            seed,
            step_cap: DEFAULT_STEP_CAP,
            correlator_blocks: DEFAULT_CORRELATOR_BLOCKS,
        }
    }

    pub fn with_correlator(mut self) -> Self {
        self.measure_correlator = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if self.n_measure_loops == 0 {
            return Err(Error::InvalidParameter("n_measure_loops must be >= 1".into()));
        }
        if self.step_cap == 0 {
            return Err(Error::InvalidParameter("step_cap must be >= 1".into()));
        }
        if self.measure_correlator && self.correlator_blocks == 0 {
            return Err(Error::InvalidParameter("correlator_blocks must be >= 1".into()));
        }
        Ok(())
    }
}

/// Loop configuration, frozen disorder and worm endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct WormState {
    pub j: LinkField,
    pub k: LinkField,
    pub head: usize,
    pub tail: usize,
    pub open: bool,
}

impl WormState {
    pub fn closed(k: LinkField) -> Self {
        let j = LinkField::zeros(k.lattice());
        Self { j, k, head: 0, tail: 0, open: false }
    }

    pub fn lattice(&self) -> TorusLattice {
        self.k.lattice()
    }

    /// `Σ (J + k)²`.
    pub fn energy(&self) -> i64 {
        self.j.values().iter().zip(self.k.values()).map(|(j, k)| (j + k) * (j + k)).sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoopOutcome {
    pub attempts: u64,
    pub accepted: u64,
    pub winding: (i64, i64),
}

/// Open-state visit counts, kept per measurement block for jackknife errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorHistogram {
    pub size: usize,
    /// `visits[b][dy * L + dx]`: open attempts in block `b` with head - tail = (dx, dy).
    pub visits: Vec<Vec<u64>>,
    /// Closed completions (loops) in each block.
    pub loops: Vec<u64>,
}

impl CorrelatorHistogram {
    fn new(size: usize, blocks: usize) -> Self {
        Self { size, visits: vec![vec![0; size * size]; blocks], loops: vec![0; blocks] }
    }

    pub fn total_loops(&self) -> u64 {
        self.loops.iter().sum()
    }

    fn index(&self, dx: i64, dy: i64) -> usize {
        let l = self.size as i64;
        (dy.rem_euclid(l) * l + dx.rem_euclid(l)) as usize
    }

    /// Visits summed over blocks at the displacement `(dx, dy)`.
    pub fn visits_at(&self, dx: i64, dy: i64) -> u64 {
        let i = self.index(dx, dy);
        self.visits.iter().map(|b| b[i]).sum()
    }

    /// Ratio estimate from a subset of blocks; `exclude` drops one block.
    pub fn estimate(&self, displacements: &[(i64, i64)], exclude: Option<usize>) -> Result<f64> {
        let keep = |b: usize| Some(b) != exclude;
        let loops: u64 = (0..self.loops.len()).filter(|&b| keep(b)).map(|b| self.loops[b]).sum();
        if loops == 0 {
            return Err(Error::InsufficientData("correlator histogram has no loops".into()));
        }
        let mut acc = 0.0;
        for &(dx, dy) in displacements {
            if self.index(dx, dy) == 0 {
                acc += 1.0;
                continue;
            }
            let i = self.index(dx, dy);
            let v: u64 = (0..self.visits.len()).filter(|&b| keep(b)).map(|b| self.visits[b][i]).sum();
            acc += v as f64 / loops as f64;
        }
        Ok(acc / displacements.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WormChainResult {
    pub size: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub winding_samples: Vec<(i64, i64)>,
    #[serde(with = "crate::sector_map")]
    pub sector_counts: BTreeMap<(i64, i64), u64>,
    pub correlator: Option<CorrelatorHistogram>,
    pub energy_trace: Vec<i64>,
    pub attempts: u64,
    pub accepted: u64,
    pub therm_loops: u64,
}

impl WormChainResult {
    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }

    pub fn mean_energy(&self) -> f64 {
        self.energy_trace.iter().map(|&e| e as f64).sum::<f64>() / self.energy_trace.len().max(1) as f64
    }
}

const ACCEPT_TABLE: usize = 512;

/// The sampler: state plus precomputed neighbour and acceptance tables.
pub struct Worm {
    state: WormState,
    beta: f64,
    step_cap: u64,
    rng: SimRng,
    nbr: Vec<[u32; 4]>,
    link: Vec<[u32; 4]>,
    /// `accept[m / 2] = exp(-m / 2β)` for odd `m`.
    accept: Vec<f64>,
    wind: (i64, i64),
    energy: i64,
}

impl Worm {
    pub fn new(k: LinkField, beta: f64, seed: u64) -> Result<Self> {
        Self::from_state(WormState::closed(k), beta, seeds::rng(seed, Stream::Chain))
    }

    pub fn from_state(state: WormState, beta: f64, rng: SimRng) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        if state.open || state.j.lattice() != state.k.lattice() || !state.j.is_divergenceless()? {
            return Err(Error::InvalidParameter("worm must start from a closed configuration".into()));
        }
        let lat = state.lattice();
        let n = lat.num_sites();
        let mut nbr = Vec::with_capacity(n);
        let mut link = Vec::with_capacity(n);
        for s in 0..n {
            let mut a = [0u32; 4];
            let mut b = [0u32; 4];
            for d in Direction::ALL {
                a[d as usize] = lat.neighbor(s, d) as u32;
                b[d as usize] = lat.step_link(s, d) as u32;
            }
            nbr.push(a);
            link.push(b);
        }
        let accept = (0..ACCEPT_TABLE).map(|h| (-((2 * h + 1) as f64) / (2.0 * beta)).exp()).collect();
        let (wx, wy) = state.j.winding()?.as_integers().expect("closed J");
        let energy = state.energy();
        Ok(Self { state, beta, step_cap: DEFAULT_STEP_CAP, rng, nbr, link, accept, wind: (wx, wy), energy })
    }

    pub fn with_step_cap(mut self, cap: u64) -> Self {
        self.step_cap = cap;
        self
    }

    pub fn state(&self) -> &WormState {
        &self.state
    }

    pub fn into_state(self) -> WormState {
        self.state
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn winding(&self) -> (i64, i64) {
        self.wind
    }

    /// Current `Σ (J + k)²`, tracked incrementally.
    pub fn energy(&self) -> i64 {
        self.energy
    }

    /// One closed-loop completion.
    pub fn worm_step(&mut self) -> Result<LoopOutcome> {
        self.run_loop(None)
    }

    fn run_loop(&mut self, mut hist: Option<(&mut [u64], usize)>) -> Result<LoopOutcome> {
        let n = self.nbr.len();
        let size = self.state.lattice().size() as i64;
        let start = self.rng.random_range(0..n);
        self.state.tail = start;
        self.state.head = start;
        self.state.open = true;

        let j = self.state.j.values_mut();
        let k = self.state.k.values();
        let mut head = start;
        let (mut dx, mut dy) = (0i64, 0i64);
        let mut out = LoopOutcome::default();
        let mut first = true;
        loop {
            if out.attempts >= self.step_cap {
                self.state.head = head;
                return Err(Error::StepCapExceeded { cap: self.step_cap });
            }
            if !first {
                if let Some((h, l)) = hist.as_mut() {
                    h[(dy * *l as i64 + dx) as usize] += 1;
                }
            }
            first = false;
            out.attempts += 1;

            let r: u64 = self.rng.random();
            let dir = (r & 3) as usize;
            let sign: i64 = if dir & 1 == 0 { 1 } else { -1 };
            let l = self.link[head][dir] as usize;
            let v = j[l] + k[l];
            let m = 2 * sign * v + 1;
            let ok = if m <= 0 {
                true
            } else {
                let u = (r >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                let p = match self.accept.get((m / 2) as usize) {
                    Some(&p) => p,
                    None => (-(m as f64) / (2.0 * self.beta)).exp(),
                };
                u < p
            };
            if ok {
                j[l] = j[l].checked_add(sign).ok_or(Error::Overflow("worm link"))?;
                self.energy += m;
                out.accepted += 1;
                head = self.nbr[head][dir] as usize;
                if dir < 2 {
                    self.wind.0 += sign;
                    dx += sign;
                    if dx == size {
                        dx = 0;
                    } else if dx < 0 {
                        dx += size;
                    }
                } else {
                    self.wind.1 += sign;
                    dy += sign;
                    if dy == size {
                        dy = 0;
                    } else if dy < 0 {
                        dy += size;
                    }
                }
            }
            // Ends the loop both on return and on a rejected first move.
            if head == start {
                break;
            }
        }
        self.state.head = head;
        self.state.open = false;
        debug_assert!(self.state.j.is_divergenceless().unwrap());
        // `wind` holds Σ J_μ; exact division is guaranteed for closed J.
        debug_assert!(self.wind.0 % size == 0 && self.wind.1 % size == 0);
        out.winding = (self.wind.0 / size, self.wind.1 / size);
        Ok(out)
    }
}

/// Drives one worm chain on frozen disorder `k`: discards `n_therm_loops`
/// completions, then records one measurement per completion.
pub fn run_chain(lattice: TorusLattice, k: &LinkField, params: &LoopModelParams) -> Result<WormChainResult> {
    params.validate()?;
    if k.lattice() != lattice {
        return Err(Error::LatticeMismatch(lattice.size(), k.lattice().size()));
    }
    let mut worm = Worm::new(k.clone(), params.beta, params.seed)?.with_step_cap(params.step_cap);
    let mut attempts = 0;
    let mut accepted = 0;
    for _ in 0..params.n_therm_loops {
        let o = worm.worm_step()?;
        attempts += o.attempts;
        accepted += o.accepted;
    }

    let n = params.n_measure_loops as usize;
    let mut winding_samples = Vec::with_capacity(n);
    let mut energy_trace = Vec::with_capacity(n);
    let mut sector_counts = BTreeMap::new();
    let mut correlator =
        params.measure_correlator.then(|| CorrelatorHistogram::new(lattice.size(), params.correlator_blocks));
    let blocks = params.correlator_blocks.max(1) as u64;
    for i in 0..params.n_measure_loops {
        let o = match correlator.as_mut() {
            Some(c) => {
                let b = (i * blocks / params.n_measure_loops) as usize;
                c.loops[b] += 1;
                worm.run_loop(Some((&mut c.visits[b], lattice.size())))?
            }
            None => worm.run_loop(None)?,
        };
        attempts += o.attempts;
        accepted += o.accepted;
        winding_samples.push(o.winding);
        energy_trace.push(worm.energy());
        *sector_counts.entry(o.winding).or_insert(0) += 1;
    }
    Ok(WormChainResult {
        size: lattice.size(),
        alpha: params.alpha,
        beta: params.beta,
        seed: params.seed,
        winding_samples,
        sector_counts,
        correlator,
        energy_trace,
        attempts,
        accepted,
        therm_loops: params.n_therm_loops,
    })
}

/// Translation-averaged `⟨e^{i(θ_t - θ_{t+d})}⟩` for `d = (dx, dy)`; exactly 1 at `d = 0`.
pub fn estimate_correlator(result: &WormChainResult, displacement: (i64, i64)) -> Result<f64> {
    let hist = result
        .correlator
        .as_ref()
        .ok_or_else(|| Error::InsufficientData("chain was run without correlator measurement".into()))?;
    hist.estimate(&[displacement], None)
}

/// Axis displacements at distance `r`, used to average the correlator over directions.
pub fn axis_displacements(r: i64) -> [(i64, i64); 4] {
    [(r, 0), (-r, 0), (0, r), (0, -r)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{IntegerGaussian, NoiseParams};

    fn lat(l: usize) -> TorusLattice {
        TorusLattice::new(l).unwrap()
    }

    #[test]
    fn link_cost_examples() {
        assert_eq!(link_cost(0, 0, 0.7), 0.0);
        for k in -3..=3 {
            assert_eq!(link_cost(-k, k, 0.3), 0.0);
        }
        assert_eq!(link_cost(1, 1, 0.5), 4.0);
    }

    #[test]
    fn every_step_ends_closed() {
        let l = lat(5);
        let mut rng = seeds::rng(3, Stream::Disorder);
        let k = IntegerGaussian::new(NoiseParams::new(0.4).unwrap()).sample_field(l, &mut rng);
        let mut w = Worm::new(k.clone(), 0.4, 1).unwrap();
        for _ in 0..2000 {
            let o = w.worm_step().unwrap();
            let st = w.state();
            assert!(!st.open);
            assert_eq!(st.head, st.tail);
            assert!(st.j.is_divergenceless().unwrap());
            assert_eq!(st.j.integer_winding().unwrap(), o.winding);
            assert_eq!(st.energy(), w.energy());
            assert_eq!(st.k, k);
        }
    }

    #[test]
    fn frozen_at_tiny_beta() {
        let l = lat(4);
        let mut w = Worm::new(LinkField::zeros(l), 1e-4, 5).unwrap();
        for _ in 0..1000 {
            w.worm_step().unwrap();
        }
        assert!(w.state().j.is_zero());
    }

    #[test]
    fn chain_is_deterministic() {
        let l = lat(4);
        let k = LinkField::zeros(l);
        let p = LoopModelParams::new(0.0, 0.8, 100, 500, 77).with_correlator();
        let a = run_chain(l, &k, &p).unwrap();
        let b = run_chain(l, &k, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sector_counts.values().sum::<u64>(), 500);
        assert_eq!(a.correlator.as_ref().unwrap().total_loops(), 500);
        let mut p2 = p.clone();
        p2.seed = 78;
        assert_ne!(run_chain(l, &k, &p2).unwrap().winding_samples, a.winding_samples);
    }

    #[test]
    fn correlator_normalization_and_errors() {
        let l = lat(4);
        let k = LinkField::zeros(l);
        let p = LoopModelParams::new(0.0, 0.5, 10, 200, 1);
        let r = run_chain(l, &k, &p).unwrap();
        assert!(estimate_correlator(&r, (1, 0)).is_err());
        let r = run_chain(l, &k, &p.clone().with_correlator()).unwrap();
        assert_eq!(estimate_correlator(&r, (0, 0)).unwrap(), 1.0);
        assert_eq!(estimate_correlator(&r, (4, -4)).unwrap(), 1.0);
        assert!(estimate_correlator(&r, (1, 0)).unwrap() >= 0.0);
    }

    #[test]
    fn step_cap_aborts() {
        let l = lat(8);
        let mut w = Worm::new(LinkField::zeros(l), 50.0, 2).unwrap().with_step_cap(3);
        let mut saw = false;
        for _ in 0..100 {
            if let Err(Error::StepCapExceeded { cap: 3 }) = w.worm_step() {
                saw = true;
                break;
            }
        }
        assert!(saw);
    }

    #[test]
    fn invalid_params_rejected() {
        let l = lat(2);
        let k = LinkField::zeros(l);
        assert!(run_chain(l, &k, &LoopModelParams::new(0.1, 0.0, 0, 1, 0)).is_err());
        assert!(run_chain(l, &k, &LoopModelParams::new(0.1, 0.1, 0, 0, 0)).is_err());
        assert!(run_chain(lat(3), &k, &LoopModelParams::new(0.1, 0.1, 0, 1, 0)).is_err());
    }

    #[test]
    fn ordered_phase_explores_winding_sectors() {
        let l = lat(8);
        let p = LoopModelParams::new(0.0, 1.5, 1000, 100_000, 4);
        let r = run_chain(l, &LinkField::zeros(l), &p).unwrap();
        for s in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
            assert!(r.sector_counts.get(&s).copied().unwrap_or(0) > 0, "{s:?} missing");
        }
    }

    #[test]
    fn disordered_phase_has_little_winding() {
        let l = lat(16);
        let p = LoopModelParams::new(0.0, 0.3, 1000, 50_000, 4);
        let r = run_chain(l, &LinkField::zeros(l), &p).unwrap();
        let w2 = r.winding_samples.iter().map(|&(x, y)| (x * x + y * y) as f64).sum::<f64>()
            / (2.0 * r.winding_samples.len() as f64);
        assert!(w2 < 0.01, "{w2}");
        assert!(r.sector_counts[&(0, 0)] as f64 > 0.99 * 50_000.0);
    }
}
