//! Weights `η = (1+|x|²)^ν`, their truncations `η_n = θ_n(η)`, the conjugated
//! generator `A_η = η^{−1}Aη` and checks of the weighted estimates.

use crate::drift::VectorFieldLattice;
use crate::error::{param, Error, Result};
use crate::grid::{fft_nd, Field, TorusGrid};
use crate::operator::Operator;
use crate::report::VerificationReport;
use crate::resolvent::{assemble_theta2, assemble_theta_p, lp_operator_norm, ResolventAssembly, ThetaPParams};
use crate::rng::stream_rng;
use crate::spectral::{check_alpha, frac_laplacian, heat_semigroup};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// `θ(s) = s` on `(0,1)`, `2` beyond `2`, joined by the quintic matching value,
/// slope and curvature at both ends; `θ_n(s) = nθ(s/n)`.
pub fn theta_n(s: f64, n: f64) -> f64 {
    let u = s / n;
    if u <= 1.0 {
        s
    } else if u >= 2.0 {
        2.0 * n
    } else {
        let v = u - 1.0;
        n * (1.0 + v + 4.0 * v.powi(3) - 7.0 * v.powi(4) + 3.0 * v.powi(5))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightSpec {
    pub nu: f64,
    pub truncation: Option<f64>,
    #[serde(skip)]
    pub lattice: Option<Field>,
}

impl WeightSpec {
    /// `η` (or `θ_n(η)` when `truncation = Some(n)`) on the lattice.
    pub fn new(nu: f64, alpha: f64, truncation: Option<f64>, grid: &TorusGrid) -> Result<Self> {
        check_alpha(alpha)?;
        if !(nu >= 0.0 && nu < alpha / 2.0) {
            return param(format!("nu = {nu} must lie in [0, alpha/2)"));
        }
        if let Some(n) = truncation {
            if !(n >= 1.0) {
                return param(format!("truncation level {n} must be at least 1"));
            }
        }
        let f = grid.sample(|x| {
            let e = (1.0 + x.iter().map(|v| v * v).sum::<f64>()).powf(nu);
            truncation.map_or(e, |n| theta_n(e, n))
        });
        Ok(Self { nu, truncation, lattice: Some(f) })
    }

    pub fn field(&self) -> &Field {
        self.lattice.as_ref().expect("weight sampled on a grid")
    }

    pub fn inverse(&self) -> Field {
        self.field().map_real(|v| 1.0 / v)
    }

    /// `‖f‖_{p,η} = (Σ|f|^p η² h^d)^{1/p}`.
    pub fn norm(&self, f: &Field, p: f64) -> f64 {
        let w = self.field();
        if p.is_infinite() {
            return f.norm_inf();
        }
        let terms: Vec<f64> = f.data.iter().zip(&w.data).map(|(v, e)| v.norm().powf(p) * e.re * e.re).collect();
        (crate::stats::pairwise_sum(&terms) * f.grid.cell_volume()).powf(1.0 / p)
    }

    /// `⟨f, g⟩_η = Σ f ḡ η² h^d`.
    pub fn inner(&self, f: &Field, g: &Field) -> Complex64 {
        let w2 = self.field().mul(self.field());
        f.mul(&w2).inner(g)
    }

    /// `X ↦ η^{−1} X η`.
    pub fn conjugate(&self, x: &Operator) -> Operator {
        Operator::compose(&[Operator::pointwise(self.field(), "eta"), x.clone(), Operator::pointwise(&self.inverse(), "1/eta")])
    }
}

/// `A_η = η^{−1}Aη`.
pub fn conjugated_generator(weight: &WeightSpec, alpha: f64, grid: &TorusGrid) -> Result<Operator> {
    Ok(weight.conjugate(&frac_laplacian(grid, alpha)?))
}

/// `e^{−tA_η} = η^{−1}e^{−tA}η`.
pub fn conjugated_semigroup(weight: &WeightSpec, alpha: f64, t: f64, grid: &TorusGrid) -> Result<Operator> {
    Ok(weight.conjugate(&heat_semigroup(grid, alpha, t)?))
}

/// Lattice kernel of `e^{−tA}` indexed by displacement.
fn heat_kernel_lattice(grid: &TorusGrid, alpha: f64, t: f64) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = grid.abs_k().into_iter().map(|k| Complex64::new((-t * k.powf(alpha)).exp(), 0.0)).collect();
    fft_nd(grid, &mut v, true);
    v
}

fn circular_convolve(grid: &TorusGrid, kernel: &[Complex64], f: &Field) -> Vec<f64> {
    let mut k = kernel.to_vec();
    fft_nd(grid, &mut k, false);
    let mut v = f.data.clone();
    fft_nd(grid, &mut v, false);
    v.iter_mut().zip(&k).for_each(|(a, b)| *a *= b);
    fft_nd(grid, &mut v, true);
    v.into_iter().map(|c| c.re).collect()
}

/// `‖η_n e^{−tA} η_n^{−1}‖_{1→1} = max_y Σ_x η_n(x)|p_t(x−y)|/η_n(y)`, exact on
/// the lattice.
pub fn weighted_l1_norm(weight: &WeightSpec, alpha: f64, t: f64) -> Result<f64> {
    let w = weight.field();
    let g = w.grid;
    let abs_kernel: Vec<Complex64> = heat_kernel_lattice(&g, alpha, t).into_iter().map(|c| Complex64::new(c.norm(), 0.0)).collect();
    let conv = circular_convolve(&g, &abs_kernel, w);
    Ok(conv.iter().zip(&w.data).map(|(c, e)| c / e.re).fold(0.0, f64::max))
}

/// Fits `ω` with `‖η_n e^{−tA}η_n^{−1}‖_{1→1} ≤ e^{ωt}` for each truncation
/// level (multiples of the median of `η`) and checks its uniformity in `n`.
pub fn verify_weighted_markov(
    nu: f64,
    alpha: f64,
    t_list: &[f64],
    level_factors: &[f64],
    grid: &TorusGrid,
    seed: u64,
) -> Result<VerificationReport> {
    if t_list.iter().any(|&t| !(t >= 0.0)) {
        return param("times must be nonnegative");
    }
    let mut rep = VerificationReport::new("weighted_markov", "omega + A_eta is a symmetric Markov generator on L^2_eta");
    rep.input("nu", nu).input("alpha", alpha).input("t_list", t_list).input("level_factors", level_factors);
    rep.input("grid_n", grid.n).input("half_length", grid.half_length);
    let eta = WeightSpec::new(nu, alpha, None, grid)?;
    let mut vals = eta.field().re();
    vals.sort_by(f64::total_cmp);
    let median = vals[vals.len() / 2];
    rep.metric("eta_median", median);
    let mut omegas = Vec::new();
    let mut min_pos = f64::INFINITY;
    let mut sup_ratio = 0.0f64;
    for &fac in level_factors {
        let w = WeightSpec::new(nu, alpha, Some(fac * median), grid)?;
        let mut omega = 0.0f64;
        for &t in t_list {
            if t == 0.0 {
                continue;
            }
            let nrm = weighted_l1_norm(&w, alpha, t)?;
            omega = omega.max(nrm.ln() / t);
        }
        omegas.push(omega);
        for (i, &t) in t_list.iter().enumerate() {
            let f = Field::random_normal(grid, seed.wrapping_add(i as u64)).map_real(|v| v.abs());
            let op = Operator::compose(&[
                Operator::pointwise(&w.inverse(), "1/eta_n"),
                heat_semigroup(grid, alpha, t)?,
                Operator::pointwise(w.field(), "eta_n"),
            ]);
            let out = op.apply(&f)?;
            min_pos = min_pos.min(out.min_re() / f.norm_inf());
            let s = Field::random_signs(grid, seed.wrapping_add(100 + i as u64));
            let sup = w.conjugate(&heat_semigroup(grid, alpha, t)?).apply(&s)?.norm_inf() * (-omega * t).exp();
            sup_ratio = sup_ratio.max(sup);
        }
    }
    rep.metric("omega_per_level", &omegas);
    let (lo, hi) = omegas.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &o| (a.min(o), b.max(o)));
    let spread = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
    rep.metric("omega_spread", spread);
    rep.check_true("omega_finite", omegas.iter().all(|o| o.is_finite()));
    rep.check_le("omega_spread", spread, 0.2);
    rep.check_ge("positivity_min", min_pos, -1e-10);
    rep.check_le("sup_contraction_with_omega", sup_ratio, 1.0 + 1e-10);
    Ok(rep)
}

/// Random smooth bumps supported in balls of radius at most `L/4`, centred
/// within `L/2` of the origin.
pub fn bump_probes(grid: &TorusGrid, count: usize, seed: u64) -> Vec<Field> {
    let l = grid.half_length;
    (0..count)
        .map(|i| {
            let mut rng = stream_rng(seed, 1000 + i as u64);
            let rho = rng.random_range((2.0 * grid.h()).min(l / 4.0)..=l / 4.0);
            let c: Vec<f64> = if i == 0 {
                vec![0.0; grid.dim]
            } else {
                (0..grid.dim).map(|_| rng.random_range(-l / 2.0..l / 2.0)).collect()
            };
            let amp: f64 = rng.random_range(0.5..1.5) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            grid.sample(|x| {
                let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                let s = r2.sqrt() / rho;
                if s >= 1.0 {
                    0.0
                } else {
                    amp * (-1.0 / (1.0 - s * s)).exp()
                }
            })
        })
        .collect()
}

fn check_weighted_p(dim: usize, alpha: f64, nu: f64, p: f64) -> Result<()> {
    let d = dim as f64;
    let need = (d - alpha + 1.0).max(d / (2.0 * nu) + 2.0);
    if !(p > need) {
        return Err(Error::Admissibility {
            hypothesis: "p > (d-alpha+1) v (d/(2 nu)+2)".into(),
            detail: format!("p = {p} must exceed {need:.6}"),
        });
    }
    Ok(())
}

/// Headroom over the reference-drift ratio allowed at every level `m`.
pub const UNIFORM_SLACK: f64 = 1.1;

/// Probes the weighted resolvent estimates with `Θ = (μ+Λ(b_ref))^{−1}`:
/// `sup` is `‖ηΘη⁻¹h‖_∞/‖h‖_{p,η}`, `sup_b` and `lp_b` insert the factors
/// `|b_m|` and `|b_m|^{1/p}` for each listed level. Uniformity in `m` is
/// checked against the ratios of `b_ref` itself, the lattice limit of the
/// approximants.
#[allow(clippy::too_many_arguments)]
pub fn verify_weighted_estimates(
    b_ref: &VectorFieldLattice,
    levels: &[(u32, VectorFieldLattice)],
    weight: &WeightSpec,
    alpha: f64,
    p: f64,
    mu_list: &[f64],
    probes: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let g = b_ref.grid;
    check_weighted_p(g.dim, alpha, weight.nu, p)?;
    let mut rep = VerificationReport::new("weighted_estimates", "weighted resolvent estimates for compactly supported h and large mu");
    rep.input("p", p).input("nu", weight.nu).input("mu_list", mu_list).input("probes", probes);
    rep.input("levels", levels.iter().map(|(m, _)| *m).collect::<Vec<_>>());
    let hs = bump_probes(&g, probes, seed);
    let eta = Operator::pointwise(weight.field(), "eta");
    let eta_inv = Operator::pointwise(&weight.inverse(), "1/eta");
    let mut all_levels: Vec<(String, &VectorFieldLattice)> = levels.iter().map(|(m, b)| (format!("m={m}"), b)).collect();
    all_levels.push(("ref".to_string(), b_ref));
    let nl = all_levels.len();
    let mut e2: Vec<Vec<f64>> = vec![Vec::new(); nl];
    let mut e3: Vec<Vec<f64>> = vec![Vec::new(); nl];
    let mut e1s = Vec::new();
    for &mu in mu_list {
        let th = assemble_theta2(b_ref, alpha, Complex64::new(mu, 0.0))?;
        let core = Operator::compose(&[eta.clone(), th.theta.clone(), eta_inv.clone()]);
        let mut r1 = 0.0f64;
        for h in &hs {
            let lhs = core.apply(h)?.norm_inf();
            r1 = r1.max(lhs / weight.norm(h, p));
        }
        e1s.push(r1);
        rep.metric(&format!("sup[mu={mu}]"), r1);
        for (li, (tag, bm)) in all_levels.iter().enumerate() {
            let mag = bm.magnitude();
            let mag_p = mag.map_real(|v| v.powf(1.0 / p));
            let (mut r2, mut r3) = (0.0f64, 0.0f64);
            for h in &hs {
                let rhs = weight.norm(&mag_p.mul(h), p);
                if rhs == 0.0 {
                    continue;
                }
                let u = core.apply(&mag.mul(h))?;
                r2 = r2.max(u.norm_inf() / rhs);
                r3 = r3.max(weight.norm(&mag_p.mul(&u), p) / rhs);
            }
            rep.metric(&format!("sup_b[mu={mu},{tag}]"), r2);
            rep.metric(&format!("lp_b[mu={mu},{tag}]"), r3);
            e2[li].push(r2);
            e3[li].push(r3);
        }
    }
    let all: Vec<f64> = e1s.iter().chain(e2.iter().flatten()).chain(e3.iter().flatten()).copied().collect();
    rep.check_true("ratios_finite", all.iter().all(|v| v.is_finite()));
    for (li, (m, _)) in levels.iter().enumerate() {
        rep.check_decreasing(&format!("lp_b[m={m}]"), &e3[li]);
    }
    for (name, series) in [("sup_b", &e2), ("lp_b", &e3)] {
        for k in 0..mu_list.len() {
            let limit = series[nl - 1][k];
            let worst = series[..nl - 1].iter().map(|s| s[k]).fold(0.0, f64::max);
            rep.check_le(&format!("{name}_uniform_in_m[mu={}]", mu_list[k]), worst, UNIFORM_SLACK * limit);
        }
    }
    Ok(rep)
}

/// `‖η^{−1}|b|^{1/p}‖_{p,η}`.
pub fn eta_b_norm(b: &VectorFieldLattice, weight: &WeightSpec, p: f64) -> f64 {
    let f = b.magnitude().map_real(|v| v.powf(1.0 / p)).mul(&weight.inverse());
    weight.norm(&f, p)
}

/// Refinement stability of `‖η^{−1}|b|^{1/p}‖_{p,η}` over the given drift
/// samples (one per grid).
pub fn verify_eta_b_integrability(
    samples: &[VectorFieldLattice],
    nu: f64,
    alpha: f64,
    p: f64,
    max_growth: f64,
) -> Result<VerificationReport> {
    let mut rep =
        VerificationReport::new("eta_b_integrability", "eta^{-1}|b|^{1/p} in L^p_eta for p > d/(2 nu) + 2");
    rep.input("nu", nu).input("p", p);
    let mut vals = Vec::new();
    for b in samples {
        let w = WeightSpec::new(nu, alpha, None, &b.grid)?;
        vals.push(eta_b_norm(b, &w, p));
    }
    rep.metric("norms", &vals);
    rep.input("grids", samples.iter().map(|b| (b.grid.n, b.grid.half_length)).collect::<Vec<_>>());
    if let Some(d) = samples.first().map(|b| b.grid.dim as f64) {
        rep.metric("threshold_p", d / (2.0 * nu) + 2.0);
    }
    for w in vals.windows(2) {
        rep.check_le("relative_growth", if w[0] > 0.0 { w[1] / w[0] - 1.0 } else { 0.0 }, max_growth);
    }
    Ok(rep)
}

/// The weighted representation `η^{−1}Θ_pη` built from conjugated blocks.
pub fn weighted_theta_p(assembly: &ResolventAssembly, weight: &WeightSpec) -> Operator {
    weight.conjugate(&assembly.theta)
}

/// Relative difference between `η^{−1}Θ_p η h` and the same representation
/// assembled from `A_η`, `T_{p,η}`, `Q_{p,η}`, `G_{p,η}`.
pub fn weighted_representation_residual(
    b: &VectorFieldLattice,
    alpha: f64,
    params: ThetaPParams,
    weight: &WeightSpec,
    h: &Field,
) -> Result<f64> {
    let a = assemble_theta_p(b, alpha, params, None, 4, 0)?;
    let direct = Operator::compose(&[
        Operator::pointwise(weight.field(), "eta"),
        a.theta.clone(),
        Operator::pointwise(&weight.inverse(), "1/eta"),
    ])
    .apply(h)?;
    let g = &b.grid;
    let z = Complex64::new(params.mu, 0.0);
    let beta = -1.0 + 1.0 / alpha;
    let cp = |s: f64| -> Result<Operator> { Ok(weight.conjugate(&crate::spectral::shifted_power(g, alpha, z, s)?)) };
    let rp = params.r / (params.r - 1.0);
    let tp = weight.conjugate(&a.handles["T_p"]);
    let qp = weight.conjugate(&a.handles["Q_p"]);
    let gp = weight.conjugate(&a.handles["G_p"]);
    let corr = Operator::compose(&[cp(beta / rp)?, gp, tp.neumann_inverse(1e-13, 20_000), qp, cp(-1.0 / alpha + beta / params.q)?]);
    let rep = cp(-1.0)?.minus(&corr).apply(h)?;
    Ok(rep.rel_diff(&direct))
}

/// `‖K‖_{L^p_η → L^p_η}` via the isometry `f ↦ η^{2/p} f` onto `L^p`.
pub fn weighted_lp_operator_norm(k: &Operator, weight: &WeightSpec, p: f64, probes: usize, seed: u64) -> Result<f64> {
    let up = weight.field().map_real(|v| v.powf(2.0 / p));
    let down = up.map_real(|v| 1.0 / v);
    let op = Operator::compose(&[Operator::pointwise(&down, "eta^-2/p"), k.clone(), Operator::pointwise(&up, "eta^2/p")]);
    lp_operator_norm(&op, p, probes, 40, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_is_c1_and_monotone() {
        let n = 3.0;
        let mut prev = 0.0;
        for i in 1..1000 {
            let s = i as f64 * 0.01;
            let v = theta_n(s, n);
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(theta_n(10.0, n), 6.0);
        let e = 1e-6;
        assert!(((theta_n(n + e, n) - theta_n(n, n)) / e - 1.0).abs() < 1e-4);
        assert!((theta_n(2.0 * n - e, n) - 6.0).abs() < 1e-9);
    }

    #[test]
    fn identity_weight_limit() {
        let g = TorusGrid::new(2, 4.0, 16).unwrap();
        let w = WeightSpec::new(1e-8, 1.5, None, &g).unwrap();
        let f = Field::random_normal(&g, 2);
        let a = frac_laplacian(&g, 1.5).unwrap().apply(&f).unwrap();
        let b = conjugated_generator(&w, 1.5, &g).unwrap().apply(&f).unwrap();
        assert!(b.rel_diff(&a) < 1e-7, "{}", b.rel_diff(&a));
    }
}
