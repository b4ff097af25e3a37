//! Adaptive Gauss–Kronrod quadrature for complex-valued integrands.

use crate::error::{Error, Result};
use num_complex::Complex64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += s * WGK[j];
        if j % 2 == 1 {
            rg += s * WG[j / 2];
        }
    }
    ((rk * h), ((rk - rg) * h).norm())
}

/// Integral of `f` over `[a, b]` to `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(Complex64, f64)> {
    let (v, e) = gk15(&f, a, b);
    let mut segs = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    for _ in 0..4000 {
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return Ok((total, err));
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (sa, sb, sv, se) = segs.swap_remove(idx);
        let m = 0.5 * (sa + sb);
        let (v1, e1) = gk15(&f, sa, m);
        let (v2, e2) = gk15(&f, m, sb);
        total += v1 + v2 - sv;
        err += e1 + e2 - se;
        segs.push((sa, m, v1, e1));
        segs.push((m, sb, v2, e2));
    }
    if err <= 10.0 * abs_tol.max(rel_tol * total.norm()) {
        return Ok((total, err));
    }
    Err(Error::Numerical {
        msg: "adaptive quadrature did not converge".into(),
        diagnostics: format!("interval [{a}, {b}], estimate {total}, error {err:.3e}"),
    })
}

/// Integral over `[0, ∞)` split into geometric panels starting at `scale`.
///
/// Stops once three consecutive panels contribute below the tolerance.
pub fn integrate_half_line<F: Fn(f64) -> Complex64>(
    f: F,
    scale: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(Complex64, f64)> {
    let (mut total, mut err) = integrate(&f, 0.0, scale, abs_tol * 0.1, rel_tol * 0.1)?;
    let mut lo = scale;
    let mut quiet = 0;
    for _ in 0..200 {
        let hi = 2.0 * lo;
        let (v, e) = integrate(&f, lo, hi, abs_tol * 0.1, rel_tol * 0.1)?;
        total += v;
        err += e;
        if v.norm() <= abs_tol.max(rel_tol * total.norm()) * 0.01 {
            quiet += 1;
            if quiet >= 3 {
                return Ok((total, err));
            }
        } else {
            quiet = 0;
        }
        lo = hi;
    }
    Err(Error::Numerical {
        msg: "half-line quadrature tail did not decay".into(),
        diagnostics: format!("last panel end {lo:.3e}, estimate {total}"),
    })
}

/// Composite Simpson weights for `m` (even) equal intervals of width `h`.
pub fn simpson_weights(m: usize, h: f64) -> Vec<f64> {
    assert!(m >= 2 && m.is_multiple_of(2), "Simpson needs an even interval count");
    (0..=m)
        .map(|j| {
            let c = if j == 0 || j == m {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(f: impl Fn(f64) -> f64) -> impl Fn(f64) -> Complex64 {
        move |x| Complex64::new(f(x), 0.0)
    }

    #[test]
    fn polynomial_and_gaussian() {
        let (v, _) = integrate(re(|x| x * x * x), 0.0, 2.0, 1e-14, 1e-13).unwrap();
        assert!((v.re - 4.0).abs() < 1e-12);
        let (g, _) = integrate_half_line(re(|x| (-x * x).exp()), 1.0, 1e-14, 1e-12).unwrap();
        assert!((g.re - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-11);
    }

    #[test]
    fn endpoint_singularity() {
        let (v, _) = integrate(re(|x: f64| x.powf(-0.5)), 0.0, 1.0, 1e-12, 1e-10).unwrap();
        assert!((v.re - 2.0).abs() < 1e-8);
    }

    #[test]
    fn simpson_exact_on_cubics() {
        let w = simpson_weights(4, 0.25);
        let s: f64 = w.iter().enumerate().map(|(j, w)| w * (0.25 * j as f64).powi(3)).sum();
        assert!((s - 0.25).abs() < 1e-14);
    }
}
