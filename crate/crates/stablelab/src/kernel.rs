//! Whole-space radial kernels of functions of `A = (−Δ)^{α/2}` on `ℝ^d`.
//!
//! A radial symbol `m(|k|)` has kernel
//! `K(r) = (2π)^{−d/2} r^{−ν} ∫₀^∞ m(k) k^{d/2} J_ν(kr) dk`, `ν = d/2 − 1`.
//! For odd `d` the Bessel function is the real part of an elementary Hankel
//! function, which decays in the upper half plane; the contour is turned by
//! `θ = π/(4α)` so the oscillatory tail becomes exponentially damped. Even `d`
//! is obtained by integrating the `(d+1)`-dimensional kernel along a line.
//! Small arguments of the heat kernel use its convergent power series.

use crate::error::{param, Error, Result};
use crate::quad::integrate_half_line;
use crate::spectral::check_alpha;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};
use std::f64::consts::PI;

const REL_TOL: f64 = 1e-12;

/// Surface area of the unit sphere in `ℝ^d`.
pub fn sphere_area(dim: usize) -> f64 {
    let d = dim as f64;
    2.0 * PI.powf(d / 2.0) / gamma(d / 2.0)
}

/// Riesz potential kernel of `A^{−β/α} = (−Δ)^{−β/2}`, `0 < β < d`.
pub fn riesz_kernel(dim: usize, beta: f64, r: f64) -> f64 {
    let d = dim as f64;
    gamma((d - beta) / 2.0) / (2f64.powf(beta) * PI.powf(d / 2.0) * gamma(beta / 2.0)) * r.powf(beta - d)
}

fn ray_transform_odd(dim: usize, r: f64, scale: f64, theta: f64, m: &(dyn Fn(Complex64) -> Complex64 + Sync)) -> Result<f64> {
    let d = dim as f64;
    let rot = Complex64::from_polar(1.0, theta);
    let half = (dim - 1) / 2;
    let (nn, coeffs): (usize, Vec<Complex64>) = if dim == 1 {
        (0, vec![Complex64::new(1.0, 0.0)])
    } else {
        let n = (dim - 3) / 2;
        let c = (0..=n)
            .map(|j| {
                let num = ln_gamma((n + j + 1) as f64) - ln_gamma((j + 1) as f64) - ln_gamma((n - j + 1) as f64);
                Complex64::i().powu(j as u32) * (num.exp() / 2f64.powi(j as i32))
            })
            .collect();
        (n, c)
    };
    let integrand = |u: f64| -> Complex64 {
        if u == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let k = rot * u;
        let z = k * r;
        let mut series = Complex64::new(0.0, 0.0);
        let zinv = 1.0 / z;
        let mut zp = Complex64::new(1.0, 0.0);
        for c in &coeffs {
            series += c * zp;
            zp *= zinv;
        }
        m(k) * k.powu(half as u32) * (Complex64::i() * z).exp() * series * rot
    };
    let (val, _) = integrate_half_line(integrand, scale, 1e-300, REL_TOL)?;
    let phase = if dim == 1 { Complex64::new(1.0, 0.0) } else { (-Complex64::i()).powu(nn as u32 + 1) };
    let nu = d / 2.0 - 1.0;
    let pref = (2.0 * PI).powf(-d / 2.0) * r.powf(-nu) * (2.0 / (PI * r)).sqrt();
    Ok(pref * (phase * val).re)
}

/// Kernel of the radial symbol `m` in dimension `dim` at distance `r > 0`.
/// `scale` is a frequency scale of the integrand (used to seed the panels).
pub fn radial_transform(dim: usize, r: f64, scale: f64, theta: f64, m: &(dyn Fn(Complex64) -> Complex64 + Sync)) -> Result<f64> {
    if dim == 0 {
        return param("dimension must be positive");
    }
    if !(r > 0.0) {
        return param(format!("radial transform needs r > 0, got {r}"));
    }
    let scale = scale.min(2.0 / r);
    if dim % 2 == 1 {
        return ray_transform_odd(dim, r, scale, theta, m);
    }
    let line = |z: f64| -> Complex64 {
        let rr = (r * r + z * z).sqrt();
        Complex64::new(ray_transform_odd(dim + 1, rr, scale, theta, m).unwrap_or(f64::NAN), 0.0)
    };
    let (v, _) = integrate_half_line(line, r.max(1.0 / scale), 1e-300, 1e-10)?;
    if !v.re.is_finite() {
        return Err(Error::Numerical { msg: "even-dimensional projection failed".into(), diagnostics: format!("r = {r}") });
    }
    Ok(2.0 * v.re)
}

fn heat_series(alpha: f64, dim: usize, t: f64, r: f64) -> f64 {
    let d = dim as f64;
    let nu = d / 2.0 - 1.0;
    let mut sum = 0.0;
    let mut max_term: f64 = 0.0;
    let x = r / 2.0;
    for n in 0..400 {
        let nf = n as f64;
        let lt = ((2.0 * nf + d) / alpha).ln_gamma_safe() - ln_gamma(nf + 1.0) - ln_gamma(nf + d / 2.0)
            + if x > 0.0 { 2.0 * nf * x.ln() } else if n == 0 { 0.0 } else { f64::NEG_INFINITY }
            - (2.0 * nf + d) / alpha * t.ln();
        let term = lt.exp();
        let term = if n % 2 == 1 { -term } else { term };
        sum += term;
        max_term = max_term.max(term.abs());
        if n > 4 && term.abs() < 1e-18 * max_term {
            break;
        }
    }
    (2.0 * PI).powf(-d / 2.0) * 2f64.powf(-nu) / alpha * sum
}

trait LnGammaSafe {
    fn ln_gamma_safe(self) -> f64;
}

impl LnGammaSafe for f64 {
    fn ln_gamma_safe(self) -> f64 {
        ln_gamma(self)
    }
}

/// `p_t(r)`, the `α`-stable transition density at distance `r`.
pub fn heat_kernel_value(alpha: f64, dim: usize, t: f64, r: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(t > 0.0) {
        return param(format!("t = {t} must be positive"));
    }
    if !(r >= 0.0) {
        return param(format!("r = {r} must be nonnegative"));
    }
    let s = r * t.powf(-1.0 / alpha);
    if s <= 2.0 {
        return Ok(heat_series(alpha, dim, t, r));
    }
    let theta = PI / (4.0 * alpha);
    let m = move |k: Complex64| (-(k.powf(alpha)) * t).exp();
    radial_transform(dim, r, 2.0 * t.powf(-1.0 / alpha), theta, &m)
}

/// `∂_r p_t(r) = −2π r p_t^{(d+2)}(r)`.
pub fn heat_kernel_radial_derivative(alpha: f64, dim: usize, t: f64, r: f64) -> Result<f64> {
    Ok(-2.0 * PI * r * heat_kernel_value(alpha, dim + 2, t, r)?)
}

/// Kernel of `(μ + A)^{−γ}` at distance `r > 0`.
pub fn resolvent_kernel_value(alpha: f64, dim: usize, mu: f64, gamma_pow: f64, r: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(mu > 0.0) {
        return param(format!("mu = {mu} must be positive"));
    }
    let theta = PI / (4.0 * alpha);
    let m = move |k: Complex64| (k.powf(alpha) + mu).powf(-gamma_pow);
    radial_transform(dim, r, 2.0 * mu.powf(1.0 / alpha), theta, &m)
}

/// `∂_r` of the `(μ + A)^{−γ}` kernel.
pub fn resolvent_kernel_radial_derivative(alpha: f64, dim: usize, mu: f64, gamma_pow: f64, r: f64) -> Result<f64> {
    Ok(-2.0 * PI * r * resolvent_kernel_value(alpha, dim + 2, mu, gamma_pow, r)?)
}

/// `p_t(0)` in closed form.
pub fn heat_kernel_at_origin(alpha: f64, dim: usize, t: f64) -> f64 {
    let d = dim as f64;
    (2.0 * PI).powf(-d) * sphere_area(dim) * gamma(d / alpha) / alpha * t.powf(-d / alpha)
}

/// Envelope `t^{−d/α} ∧ t r^{−d−α}`.
pub fn envelope(alpha: f64, dim: usize, t: f64, r: f64) -> f64 {
    let d = dim as f64;
    let near = t.powf(-d / alpha);
    if r == 0.0 {
        near
    } else {
        near.min(t * r.powf(-d - alpha))
    }
}

/// Fitted constants of the two-sided kernel envelope over a `(t, r)` grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelBoundFit {
    /// Largest `C` with `p_t(r) ≥ C·env` on the grid.
    pub c_lower: f64,
    /// Smallest `K` with `|∂_r p_t(r)| ≤ K t^{−1/α} env` on the grid.
    pub k_gradient: f64,
    /// Upper comparability constant `p_t(r) ≤ C' env`.
    pub c_upper: f64,
    pub lower_violations: usize,
    pub gradient_violations: usize,
    pub points: Vec<KernelSample>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelSample {
    pub t: f64,
    pub r: f64,
    pub p: f64,
    pub dp: f64,
    pub envelope: f64,
}

/// Evaluates `p_t(r)` and `∂_r p_t(r)` on the tensor grid and fits one constant
/// per bound.
pub fn fit_kernel_bounds(alpha: f64, dim: usize, ts: &[f64], rs: &[f64]) -> Result<KernelBoundFit> {
    let pairs: Vec<(f64, f64)> = ts.iter().flat_map(|&t| rs.iter().map(move |&r| (t, r))).collect();
    let points: Vec<KernelSample> = pairs
        .par_iter()
        .map(|&(t, r)| {
            Ok(KernelSample {
                t,
                r,
                p: heat_kernel_value(alpha, dim, t, r)?,
                dp: if r > 0.0 { heat_kernel_radial_derivative(alpha, dim, t, r)? } else { 0.0 },
                envelope: envelope(alpha, dim, t, r),
            })
        })
        .collect::<Result<_>>()?;
    let lower: Vec<f64> = points.iter().map(|s| s.p / s.envelope).collect();
    let grad: Vec<f64> = points.iter().map(|s| s.dp.abs() / (s.t.powf(-1.0 / alpha) * s.envelope)).collect();
    let c_lower = lower.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_upper = lower.iter().cloned().fold(0.0, f64::max);
    let k_gradient = grad.iter().cloned().fold(0.0, f64::max);
    let lower_violations = lower.iter().filter(|&&x| !(x >= c_lower)).count();
    let gradient_violations = grad.iter().filter(|&&x| !(x <= k_gradient)).count();
    Ok(KernelBoundFit { c_lower, k_gradient, c_upper, lower_violations, gradient_violations, points })
}

/// Sampling plan for the pointwise resolvent-gradient constant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MSampleSpec {
    pub pairs: Vec<(f64, f64)>,
    /// Candidate `κ` values, increasing.
    pub kappas: Vec<f64>,
    /// Accept the first `κ` whose constant is within this factor of the `κ → ∞` limit.
    pub kappa_tolerance: f64,
}

impl MSampleSpec {
    /// `μ` and `r` log-spaced over the given decades, `per_decade` points each.
    pub fn log_grid(mu_decades: (f64, f64), r_decades: (f64, f64), per_decade: usize) -> Self {
        let axis = |(a, b): (f64, f64)| -> Vec<f64> {
            let n = ((b - a) * per_decade as f64).round() as usize;
            (0..=n).map(|i| 10f64.powf(a + (b - a) * i as f64 / n as f64)).collect()
        };
        let mus = axis(mu_decades);
        let rs = axis(r_decades);
        let pairs = mus.iter().flat_map(|&m| rs.iter().map(move |&r| (m, r))).collect();
        Self { pairs, kappas: (0..11).map(|j| 2f64.powi(j)).collect(), kappa_tolerance: 1.05 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MEstimate {
    pub m_est: f64,
    pub kappa_est: f64,
    /// `(κ, m(κ))` over the ladder.
    pub ladder: Vec<(f64, f64)>,
    /// Constant against the Riesz potential `A^{−(α−1)/α}` (the `κ → ∞` limit).
    pub m_riesz: f64,
    /// Constant at `κ = 1`.
    pub m_kappa_one: f64,
    /// `K/C · Γ(1 − 1/α)` from the fitted kernel envelopes.
    pub analytic_bound: f64,
    pub k_gradient: f64,
    pub c_lower: f64,
}

/// Smallest `m` with `|∂_r(μ+A)^{−1}(r)| ≤ m (κ^{−1}μ + A)^{−(α−1)/α}(r)` on the
/// sampled pairs, for each `κ` in the ladder.
pub fn estimate_m_dalpha(alpha: f64, dim: usize, spec: &MSampleSpec) -> Result<MEstimate> {
    check_alpha(alpha)?;
    if spec.pairs.is_empty() {
        return param("estimate_m_dalpha needs at least one (mu, r) pair");
    }
    if spec.kappas.is_empty() {
        return param("estimate_m_dalpha needs at least one kappa");
    }
    let g = (alpha - 1.0) / alpha;
    let lhs: Vec<f64> = spec
        .pairs
        .par_iter()
        .map(|&(mu, r)| Ok(resolvent_kernel_radial_derivative(alpha, dim, mu, 1.0, r)?.abs()))
        .collect::<Result<_>>()?;
    let m_riesz = spec
        .pairs
        .iter()
        .zip(&lhs)
        .map(|(&(_, r), l)| l / riesz_kernel(dim, alpha - 1.0, r))
        .fold(0.0, f64::max);
    let mut ladder = Vec::new();
    for &kappa in &spec.kappas {
        let ratios: Vec<f64> = spec
            .pairs
            .par_iter()
            .zip(&lhs)
            .map(|(&(mu, r), l)| Ok(l / resolvent_kernel_value(alpha, dim, mu / kappa, g, r)?))
            .collect::<Result<_>>()?;
        ladder.push((kappa, ratios.into_iter().fold(0.0, f64::max)));
    }
    let (kappa_est, m_est) = ladder
        .iter()
        .cloned()
        .find(|&(_, m)| m <= spec.kappa_tolerance * m_riesz)
        .unwrap_or(*ladder.last().unwrap());
    let m_kappa_one = if spec.kappas[0] == 1.0 {
        ladder[0].1
    } else {
        let ratios: Vec<f64> = spec
            .pairs
            .par_iter()
            .zip(&lhs)
            .map(|(&(mu, r), l)| Ok(l / resolvent_kernel_value(alpha, dim, mu, g, r)?))
            .collect::<Result<_>>()?;
        ratios.into_iter().fold(0.0, f64::max)
    };
    let s: Vec<f64> = (0..=60).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 60.0)).collect();
    let fit = fit_kernel_bounds(alpha, dim, &[1.0], &s)?;
    let analytic_bound = fit.k_gradient / fit.c_lower * gamma(1.0 - 1.0 / alpha);
    Ok(MEstimate {
        m_est,
        kappa_est,
        ladder,
        m_riesz,
        m_kappa_one,
        analytic_bound,
        k_gradient: fit.k_gradient,
        c_lower: fit.c_lower,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_limit_shape_in_one_dimension() {
        // d = 1: p_t integrates to one.
        let (v, _) = integrate_half_line(
            |r| Complex64::new(heat_kernel_value(1.5, 1, 1.0, r).unwrap(), 0.0),
            1.0,
            1e-14,
            1e-9,
        )
        .unwrap();
        assert!((2.0 * v.re - 1.0).abs() < 1e-7, "{}", v.re);
    }

    #[test]
    fn series_and_contour_agree_at_switch() {
        for dim in [1, 3, 5] {
            let a = heat_series(1.5, dim, 1.0, 2.0);
            let theta = PI / 6.0;
            let m = |k: Complex64| (-(k.powf(1.5))).exp();
            let b = radial_transform(dim, 2.0, 2.0, theta, &m).unwrap();
            assert!((a - b).abs() < 1e-10 * a.abs(), "d={dim}: {a} vs {b}");
        }
    }

    #[test]
    fn origin_closed_form() {
        for dim in [1, 2, 3] {
            let a = heat_kernel_value(1.5, dim, 0.7, 0.0).unwrap();
            assert!((a / heat_kernel_at_origin(1.5, dim, 0.7) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn even_dimension_via_projection() {
        let a = heat_kernel_value(1.5, 2, 1.0, 1.5).unwrap();
        let theta = PI / 6.0;
        let m = |k: Complex64| (-(k.powf(1.5))).exp();
        let b = radial_transform(2, 1.5, 2.0, theta, &m).unwrap();
        assert!((a - b).abs() < 1e-8 * a, "{a} vs {b}");
    }

    #[test]
    fn resolvent_kernel_matches_riesz_near_origin() {
        // (μ+A)^{-1}(r) ~ I_α(r) as r → 0 in d = 3
        let r = 1e-4;
        let v = resolvent_kernel_value(1.5, 3, 1.0, 1.0, r).unwrap();
        let riesz = riesz_kernel(3, 1.5, r);
        assert!((v / riesz - 1.0).abs() < 1e-2, "{v} vs {riesz}");
    }

    #[test]
    fn empty_sample_is_error() {
        let spec = MSampleSpec { pairs: vec![], kappas: vec![1.0], kappa_tolerance: 1.05 };
        assert!(estimate_m_dalpha(1.5, 3, &spec).is_err());
    }
}
