//! Isotropic symmetric α-stable increments by subordination.
//!
//! `Z_dt = B(2 S_dt)` where `B` is a standard Brownian motion and `S` a
//! one-sided stable subordinator with `E exp(-u S_dt) = exp(-dt u^{α/2})`.
//! Conditionally on `S`, `B(2S)` is centred Gaussian with covariance `2S·I`,
//! so `E exp(iκ·Z) = E exp(-|κ|² S) = exp(-dt |κ|^α)`.

use crate::error::{param, Error, Result};
use crate::rng::stream_rng;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const BLOCK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub dim: usize,
    pub seed: u64,
}

impl StableParams {
    pub fn new(alpha: f64, dim: usize, seed: u64) -> Result<Self> {
        let p = Self { alpha, dim, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return param(format!("alpha = {} must lie in (1, 2)", self.alpha));
        }
        if self.dim == 0 {
            return param("dim must be at least 1");
        }
        Ok(())
    }
}

/// `n` increments stored row-major (`n × dim`).
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementBatch {
    pub dt: f64,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl IncrementBatch {
    pub fn len(&self) -> usize {
        self.values.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }
}

/// One draw of the standard positive `a`-stable law, `E exp(-u S) = exp(-u^a)`
/// (Kanter's representation).
#[inline]
pub fn positive_stable<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() * PI;
        let e: f64 = Exp1.sample(rng);
        if u <= 0.0 || e <= 0.0 {
            continue;
        }
        let s1 = (a * u).sin() / u.sin().powf(1.0 / a);
        let s2 = (((1.0 - a) * u).sin() / e).powf((1.0 - a) / a);
        let s = s1 * s2;
        if s.is_finite() && s > 0.0 {
            return s;
        }
    }
}

/// Writes one increment `Z_dt − Z_0` into `out` (length = dimension).
#[inline]
pub fn draw_increment<R: Rng + ?Sized>(alpha: f64, dt: f64, rng: &mut R, out: &mut [f64]) {
    let a = 0.5 * alpha;
    let s = dt.powf(1.0 / a) * positive_stable(a, rng);
    let sd = (2.0 * s).sqrt();
    for o in out.iter_mut() {
        let g: f64 = StandardNormal.sample(rng);
        *o = sd * g;
    }
}

fn check_count(n: usize, dim: usize) -> Result<usize> {
    n.checked_mul(dim)
        .filter(|&m| m <= isize::MAX as usize / 8)
        .ok_or_else(|| Error::Capacity(format!("{n} samples of dimension {dim} overflow")))
}

/// i.i.d. rows distributed as `Z_dt − Z_0`; bit-reproducible from `(params, dt, n)`.
pub fn sample_increments(params: &StableParams, dt: f64, n: usize) -> Result<IncrementBatch> {
    params.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return param(format!("dt = {dt} must be positive"));
    }
    let len = check_count(n, params.dim)?;
    let mut values = vec![0.0; len];
    let dim = params.dim;
    values
        .par_chunks_mut(BLOCK * dim)
        .enumerate()
        .for_each(|(b, chunk)| {
            let mut rng = stream_rng(params.seed, b as u64);
            for row in chunk.chunks_exact_mut(dim) {
                draw_increment(params.alpha, dt, &mut rng, row);
            }
        });
    Ok(IncrementBatch { dt, dim, values })
}

/// i.i.d. positive samples with `E exp(-u S) = exp(-dt u^{alpha_half})`.
pub fn sample_subordinator(alpha_half: f64, dt: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(alpha_half > 0.5 && alpha_half < 1.0) {
        return param(format!("alpha/2 = {alpha_half} must lie in (1/2, 1)"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return param(format!("dt = {dt} must be positive"));
    }
    check_count(n, 1)?;
    let scale = dt.powf(1.0 / alpha_half);
    let mut out = vec![0.0; n];
    out.par_chunks_mut(BLOCK).enumerate().for_each(|(b, chunk)| {
        let mut rng = stream_rng(seed ^ 0xA5A5_5A5A_0F0F_F0F0, b as u64);
        for s in chunk.iter_mut() {
            *s = scale * positive_stable(alpha_half, &mut rng);
        }
    });
    Ok(out)
}

/// Empirical characteristic function `mean exp(iκ·row)` with its standard
/// errors `(re, im, se_re, se_im)`.
pub fn empirical_char_fn(batch: &IncrementBatch, kappa: &[f64]) -> (f64, f64, f64, f64) {
    assert_eq!(kappa.len(), batch.dim);
    let (c, s): (Vec<f64>, Vec<f64>) = batch
        .rows()
        .map(|r| {
            let ph: f64 = r.iter().zip(kappa).map(|(x, k)| x * k).sum();
            (ph.cos(), ph.sin())
        })
        .unzip();
    let (mc, sc) = crate::stats::mean_stderr(&c);
    let (ms, ss) = crate::stats::mean_stderr(&s);
    (mc, ms, sc, ss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinism_and_shape() {
        let p = StableParams::new(1.5, 3, 42).unwrap();
        let a = sample_increments(&p, 0.3, 10_000).unwrap();
        let b = sample_increments(&p, 0.3, 10_000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10_000);
        assert!(a.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn parameter_and_capacity_errors() {
        assert!(StableParams::new(2.0, 3, 0).is_err());
        assert!(StableParams::new(1.0, 3, 0).is_err());
        let p = StableParams { alpha: 1.5, dim: usize::MAX / 2, seed: 0 };
        assert!(matches!(sample_increments(&p, 1.0, 4), Err(Error::Capacity(_))));
        assert!(sample_subordinator(0.5, 1.0, 3, 0).is_err());
    }

    #[test]
    fn subordinator_empty_and_positive() {
        assert!(sample_subordinator(0.75, 1.0, 0, 1).unwrap().is_empty());
        let s = sample_subordinator(0.6, 0.01, 50_000, 9).unwrap();
        assert!(s.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn subordinator_laplace_transform() {
        let s = sample_subordinator(0.75, 1.0, 100_000, 11).unwrap();
        let e: Vec<f64> = s.iter().map(|x| (-x).exp()).collect();
        let (m, se) = crate::stats::mean_stderr(&e);
        assert!((m - (-1.0f64).exp()).abs() <= 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn mean_is_zero() {
        let p = StableParams::new(1.5, 3, 5).unwrap();
        let b = sample_increments(&p, 1.0, 100_000).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = b.rows().map(|r| r[j]).collect();
            let (m, se) = crate::stats::mean_stderr(&col);
            assert!(m.abs() <= 3.5 * se, "component {j}: {m} ± {se}");
        }
    }

    #[test]
    fn char_fn_at_unit_frequency() {
        let p = StableParams::new(1.5, 3, 77).unwrap();
        let b = sample_increments(&p, 1.0, 100_000).unwrap();
        let (re, _, se, _) = empirical_char_fn(&b, &[0.0, 0.6, 0.8]);
        assert!((re - (-1.0f64).exp()).abs() <= 3.0 * se);
    }
}
