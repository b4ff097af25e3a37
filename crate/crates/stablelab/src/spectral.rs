//! Standard Fourier multipliers for `A = (−Δ)^{α/2}` on the torus.

use crate::error::{param, Result};
use crate::grid::TorusGrid;
use crate::operator::Operator;
use num_complex::Complex64;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return param(format!("alpha = {alpha} must lie in (1, 2)"));
    }
    Ok(())
}

fn real_symbol(grid: &TorusGrid, f: impl Fn(f64) -> f64) -> Vec<Complex64> {
    grid.abs_k().into_iter().map(|k| Complex64::new(f(k), 0.0)).collect()
}

/// `A = (−Δ)^{α/2}`: multiplier `|k|^α`.
pub fn frac_laplacian(grid: &TorusGrid, alpha: f64) -> Result<Operator> {
    check_alpha(alpha)?;
    Operator::multiplier(grid, real_symbol(grid, |k| k.powf(alpha)), true, format!("|k|^{alpha}"))
}

/// `(μ + A)^{−γ}` for `γ ∈ (0, 1]`.
pub fn resolvent_power(grid: &TorusGrid, alpha: f64, mu: f64, gamma: f64) -> Result<Operator> {
    check_alpha(alpha)?;
    if !(mu > 0.0) {
        return param(format!("mu = {mu} must be positive"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return param(format!("gamma = {gamma} must lie in (0, 1]"));
    }
    shifted_power(grid, alpha, Complex64::new(mu, 0.0), -gamma)
}

/// `(ζ + A)^{s}` for any real `s` and `Re ζ > 0` (principal branch).
pub fn shifted_power(grid: &TorusGrid, alpha: f64, zeta: Complex64, s: f64) -> Result<Operator> {
    if !(zeta.re > 0.0) && s != 0.0 {
        return param(format!("shift {zeta} must have positive real part"));
    }
    let sym = grid.abs_k().into_iter().map(|k| (zeta + k.powf(alpha)).powf(s)).collect();
    Operator::multiplier(grid, sym, zeta.im == 0.0, format!("({zeta}+|k|^{alpha})^{s}"))
}

/// `(λ − Δ)^{s}`.
pub fn laplacian_shifted_power(grid: &TorusGrid, lambda: f64, s: f64) -> Result<Operator> {
    if !(lambda > 0.0) {
        return param(format!("lambda = {lambda} must be positive"));
    }
    Operator::multiplier(grid, real_symbol(grid, |k| (lambda + k * k).powf(s)), true, format!("({lambda}+|k|^2)^{s}"))
}

/// `(μ + A)^{−τ}` for `τ ∈ (0, 1)` by quadrature of
/// `(sin πτ/π) ∫₀^∞ t^{−τ}(t + μ + A)^{−1} dt`.
///
/// Trapezoidal rule in `s = ln t` with `per_unit` nodes per unit of `s`; the
/// window is cut where the integrand falls below `1e-14` of its scale.
pub fn balakrishnan_power(grid: &TorusGrid, alpha: f64, mu: f64, tau: f64, per_unit: usize) -> Result<Operator> {
    check_alpha(alpha)?;
    if !(mu > 0.0) {
        return param(format!("mu = {mu} must be positive"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return param(format!("tau = {tau} must lie in (0, 1)"));
    }
    if per_unit == 0 {
        return param("per_unit must be positive");
    }
    let lam: Vec<f64> = grid.abs_k().into_iter().map(|k| mu + k.powf(alpha)).collect();
    let lo_scale = mu.ln();
    let hi_scale = lam.iter().cloned().fold(mu, f64::max).ln();
    let cut = 14.0 * std::f64::consts::LN_10;
    let s_lo = lo_scale - cut / (1.0 - tau);
    let s_hi = hi_scale + cut / tau;
    let hs = 1.0 / per_unit as f64;
    let nodes = ((s_hi - s_lo) / hs).ceil() as usize;
    let c = (std::f64::consts::PI * tau).sin() / std::f64::consts::PI * hs;
    let mut sym = vec![0.0f64; lam.len()];
    for j in 0..=nodes {
        let s = s_lo + j as f64 * hs;
        let t = s.exp();
        let w = c * t.powf(1.0 - tau);
        for (y, l) in sym.iter_mut().zip(&lam) {
            *y += w / (t + l);
        }
    }
    let sym = sym.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    Operator::multiplier(grid, sym, true, format!("balakrishnan({mu},{tau})"))
}

/// Heat semigroup `e^{−tA}`.
pub fn heat_semigroup(grid: &TorusGrid, alpha: f64, t: f64) -> Result<Operator> {
    check_alpha(alpha)?;
    if !(t >= 0.0) {
        return param(format!("t = {t} must be nonnegative"));
    }
    Operator::multiplier(grid, real_symbol(grid, |k| (-t * k.powf(alpha)).exp()), true, format!("exp(-{t}|k|^{alpha})"))
}

/// Partial derivative `∂_j`: multiplier `i k_j`, zero on the Nyquist bin so
/// that real fields stay real.
pub fn partial(grid: &TorusGrid, axis: usize) -> Result<Operator> {
    if axis >= grid.dim {
        return param(format!("axis {axis} out of range"));
    }
    let sym = (0..grid.len())
        .map(|idx| {
            let a = grid.unravel(idx)[axis];
            if grid.is_nyquist(a) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, grid.wavenumber(a))
            }
        })
        .collect();
    Operator::multiplier(grid, sym, true, format!("ik_{axis}"))
}

/// Projection removing the constant (zero) mode.
pub fn mean_free_projection(grid: &TorusGrid) -> Result<Operator> {
    let mut sym = vec![Complex64::new(1.0, 0.0); grid.len()];
    sym[0] = Complex64::new(0.0, 0.0);
    Operator::multiplier(grid, sym, true, "P0")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Field;

    #[test]
    fn resolvent_inverse_pair() {
        let g = TorusGrid::new(2, 4.0, 16).unwrap();
        let f = g.sample(|x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp() + 0.1 * x[0].sin());
        let r = resolvent_power(&g, 1.5, 2.0, 1.0).unwrap();
        let a = frac_laplacian(&g, 1.5).unwrap();
        let u = r.apply(&f).unwrap();
        let back = a.apply(&u).unwrap().axpy(2.0, &u);
        assert!(back.rel_diff(&f) < 1e-12);
        let one = r.apply(&Field::constant(&g, 1.0)).unwrap();
        assert!(one.data.iter().all(|v| (v.re - 0.5).abs() < 1e-14));
        assert!(resolvent_power(&g, 1.5, 1.0, 1.2).is_err());
        assert!(resolvent_power(&g, 1.5, 0.0, 0.5).is_err());
    }

    #[test]
    fn derivative_of_sine() {
        let g = TorusGrid::new(1, std::f64::consts::PI, 16).unwrap();
        let f = g.sample(|x| (3.0 * x[0]).sin());
        let d = partial(&g, 0).unwrap().apply(&f).unwrap();
        let e = g.sample(|x| 3.0 * (3.0 * x[0]).cos());
        assert!(d.rel_diff(&e) < 1e-12);
        assert!(d.real);
    }
}
