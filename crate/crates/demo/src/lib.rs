//! Browser bindings: sample an error and its min-cost-flow recovery, the
//! closed-form noise curves, and a short worm run's winding histogram.

use u1qec::mcf::{mcf_decode_with, CostModel};
use u1qec::noise::{self, IntegerGaussian, NoiseParams};
use u1qec::seeds::{self, Stream};
use u1qec::worm::{run_chain, LoopModelParams};
use u1qec::TorusLattice;
use wasm_bindgen::prelude::*;

const MAX_SIZE: usize = 64;
const MAX_LOOPS: u32 = 200_000;

#[wasm_bindgen]
pub struct Decoded {
    size: usize,
    error: Vec<i32>,
    recovery: Vec<i32>,
    charges: Vec<i32>,
    sector: (i64, i64),
    cost: i64,
}

#[wasm_bindgen]
impl Decoded {
    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.size
    }

    /// Link values, link `2i` along x and `2i + 1` along y from site `i = y L + x`.
    #[wasm_bindgen(getter)]
    pub fn error(&self) -> Vec<i32> {
        self.error.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn recovery(&self) -> Vec<i32> {
        self.recovery.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn charges(&self) -> Vec<i32> {
        self.charges.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn wx(&self) -> i32 {
        self.sector.0 as i32
    }

    #[wasm_bindgen(getter)]
    pub fn wy(&self) -> i32 {
        self.sector.1 as i32
    }

    #[wasm_bindgen(getter)]
    pub fn cost(&self) -> i32 {
        self.cost as i32
    }

    #[wasm_bindgen(getter)]
    pub fn success(&self) -> bool {
        self.sector == (0, 0)
    }
}

fn lattice(size: usize) -> u1qec::Result<TorusLattice> {
    if size > MAX_SIZE {
        return Err(u1qec::Error::InvalidSize(size));
    }
    TorusLattice::new(size)
}

fn to_i32(v: &[i64]) -> Vec<i32> {
    v.iter().map(|&x| x as i32).collect()
}

pub fn sample_and_decode(size: usize, alpha: f64, seed: u64, quadratic: bool) -> u1qec::Result<Decoded> {
    let lat = lattice(size)?;
    let noise = IntegerGaussian::new(NoiseParams::new(alpha)?);
    let k = noise.sample_field(lat, &mut seeds::rng(seed, Stream::Disorder));
    let model = if quadratic { CostModel::PiecewiseQuadratic } else { CostModel::Linear };
    let (out, sol) = mcf_decode_with(&k, model)?;
    Ok(Decoded {
        size,
        error: to_i32(k.values()),
        recovery: to_i32(sol.recovery.values()),
        charges: to_i32(k.divergence()?.charges()),
        sector: out.chosen_sector,
        cost: out.cost.unwrap_or(0),
    })
}

/// Flattened `[alpha, p_z, D]` rows on `n` evenly spaced points.
pub fn noise_curves(alpha_min: f64, alpha_max: f64, n: usize) -> u1qec::Result<Vec<f64>> {
    NoiseParams::new(alpha_min)?;
    NoiseParams::new(alpha_max)?;
    let n = n.max(2);
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        let a = alpha_min + (alpha_max - alpha_min) * i as f64 / (n - 1) as f64;
        out.extend([a, noise::phase_flip_probability(a), noise::disorder_variance(a)]);
    }
    Ok(out)
}

/// Flattened `[wx, wy, count]` rows from a worm chain at `β = α`.
pub fn sector_histogram(size: usize, alpha: f64, loops: u32, seed: u64) -> u1qec::Result<Vec<i32>> {
    let lat = lattice(size)?;
    let noise = IntegerGaussian::new(NoiseParams::new(alpha)?);
    let k = noise.sample_field(lat, &mut seeds::rng(seed, Stream::Disorder));
    let loops = u64::from(loops.min(MAX_LOOPS));
    let params = LoopModelParams::new(alpha, alpha, loops / 10, loops, seed);
    let res = run_chain(lat, &k, &params)?;
    Ok(res
        .sector_counts
        .iter()
        .flat_map(|(&(wx, wy), &c)| [wx as i32, wy as i32, c.min(i32::MAX as u64) as i32])
        .collect())
}

fn js(e: u1qec::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = sampleAndDecode)]
pub fn sample_and_decode_js(size: usize, alpha: f64, seed: u32, quadratic: bool) -> Result<Decoded, JsError> {
    sample_and_decode(size, alpha, u64::from(seed), quadratic).map_err(js)
}

#[wasm_bindgen(js_name = noiseCurves)]
pub fn noise_curves_js(alpha_min: f64, alpha_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    noise_curves(alpha_min, alpha_max, n).map_err(js)
}

#[wasm_bindgen(js_name = sectorHistogram)]
pub fn sector_histogram_js(size: usize, alpha: f64, loops: u32, seed: u32) -> Result<Vec<i32>, JsError> {
    sector_histogram(size, alpha, loops, u64::from(seed)).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovery_cancels_the_syndrome() {
        let d = sample_and_decode(8, 0.3, 4, false).unwrap();
        let lat = TorusLattice::new(8).unwrap();
        let diff: Vec<i64> = d.error.iter().zip(&d.recovery).map(|(&a, &b)| i64::from(a - b)).collect();
        let rel = u1qec::LinkField::from_values(lat, diff).unwrap();
        assert!(rel.is_divergenceless().unwrap());
        assert_eq!(rel.integer_winding().unwrap(), d.sector);
        assert_eq!(d.charges.len(), 64);
    }

    #[test]
    fn curves_have_three_columns() {
        let c = noise_curves(0.1, 0.5, 5).unwrap();
        assert_eq!(c.len(), 15);
        assert!((c[12] - 0.5).abs() < 1e-12);
        assert!(c[1] < c[13]);
    }

    #[test]
    fn histogram_counts_every_loop() {
        let h = sector_histogram(4, 0.3, 1000, 2).unwrap();
        let total: i32 = h.chunks(3).map(|r| r[2]).sum();
        assert_eq!(total, 1000);
    }

    #[test]
    fn oversized_lattice_is_rejected() {
        assert!(sample_and_decode(MAX_SIZE + 1, 0.3, 0, false).is_err());
    }
}
