//! Neumann-series resolvents of `Λ(b) = A + b·∇` and the `L^p` inequalities
//! for symmetric Markov generators.

use crate::drift::VectorFieldLattice;
use crate::error::{param, Error, Result};
use crate::formbound::{check_admissibility, estimate_weak_formbound, top_eigenvalue, FormBoundOptions, ZeroMode};
use crate::grid::{Field, TorusGrid};
use crate::operator::Operator;
use crate::report::VerificationReport;
use crate::spectral::{check_alpha, frac_laplacian, partial, shifted_power};
use num_complex::Complex64;
use std::collections::BTreeMap;

const NEUMANN_TOL: f64 = 1e-12;
const NEUMANN_MAX: usize = 20_000;

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// `Σ_j w_j ∂_j (pre f)`; `pre` defaults to the identity.
pub fn directional_derivative(w: &VectorFieldLattice, pre: Option<&Operator>) -> Result<Operator> {
    let g = &w.grid;
    let mut terms = Vec::with_capacity(g.dim);
    for (j, c) in w.components.iter().enumerate() {
        let mut ops = Vec::new();
        if let Some(p) = pre {
            ops.push(p.clone());
        }
        ops.push(partial(g, j)?);
        ops.push(Operator::pointwise(c, format!("w_{j}")));
        terms.push((one(), Operator::compose(&ops)));
    }
    Ok(Operator::sum(terms))
}

/// `Λ(b) = A + b·∇`.
pub fn generator(b: &VectorFieldLattice, alpha: f64) -> Result<Operator> {
    Ok(frac_laplacian(&b.grid, alpha)?.plus(&directional_derivative(b, None)?))
}

/// `ζ + Λ(b)`.
pub fn shifted_generator(b: &VectorFieldLattice, alpha: f64, zeta: Complex64) -> Result<Operator> {
    let id = Operator::identity(&b.grid);
    Ok(Operator::sum(vec![(zeta, id), (one(), generator(b, alpha)?)]))
}

/// Operator norm of `K` on `L²` via power iteration on `K*K`.
pub fn l2_operator_norm(k: &Operator, seed: u64) -> Result<f64> {
    let kk = k.then(&k.adjoint());
    let start = Field::random_normal(k.grid(), seed);
    Ok(top_eigenvalue(&kk, &start, 1e-8, 10_000, 30)?.value.max(0.0).sqrt())
}

fn duality_map(y: &Field, p: f64) -> Field {
    let data = y.data.iter().map(|v| if v.norm() == 0.0 { *v } else { v * v.norm().powf(p - 2.0) }).collect();
    Field { grid: y.grid, data, real: y.real }
}

/// Randomized lower estimate of `‖K‖_{p→p}`: Boyd's power method from
/// `probes` random sign fields plus a positive start, keeping the largest
/// ratio seen.
pub fn lp_operator_norm(k: &Operator, p: f64, probes: usize, iters: usize, seed: u64) -> Result<f64> {
    if !(p > 1.0) {
        return param(format!("p = {p} must exceed 1"));
    }
    let g = *k.grid();
    let q = p / (p - 1.0);
    let adj = k.adjoint();
    let mut best = 0.0f64;
    for i in 0..=probes {
        let mut x = if i == 0 { Field::constant(&g, 1.0) } else { Field::random_signs(&g, seed.wrapping_add(i as u64)) };
        let mut prev = 0.0;
        for _ in 0..iters {
            let xn = x.norm_p(p);
            if xn == 0.0 {
                break;
            }
            x = x.scale(1.0 / xn);
            let y = k.apply(&x)?;
            let ratio = y.norm_p(p);
            best = best.max(ratio);
            if ratio == 0.0 || (ratio - prev).abs() <= 1e-10 * ratio {
                break;
            }
            prev = ratio;
            let z = adj.apply(&duality_map(&y, p))?;
            x = duality_map(&z, q);
        }
    }
    Ok(best)
}

/// `Θ₂(ζ)` and its building blocks.
#[derive(Clone)]
pub struct Theta2Assembly {
    pub zeta: Complex64,
    pub hs_norm: f64,
    pub h: Operator,
    pub s: Operator,
    pub theta: Operator,
}

/// `Θ₂ = (ζ+A)^{−(α+1)/(2α)}(1+H*S)^{−1}(ζ+A)^{−(α−1)/(2α)}` with
/// `H = |b|^{1/2}(ζ̄+A)^{−(α−1)/(2α)}`, `S = b^{1/2}·∇(ζ+A)^{−(α+1)/(2α)}`.
pub fn assemble_theta2(b: &VectorFieldLattice, alpha: f64, zeta: Complex64) -> Result<Theta2Assembly> {
    check_alpha(alpha)?;
    let g = &b.grid;
    let s_lo = -(alpha - 1.0) / (2.0 * alpha);
    let s_hi = -(alpha + 1.0) / (2.0 * alpha);
    let r_lo = shifted_power(g, alpha, zeta, s_lo)?;
    let r_hi = shifted_power(g, alpha, zeta, s_hi)?;
    let sqrt_mag = b.magnitude().map_real(f64::sqrt);
    let h = shifted_power(g, alpha, zeta.conj(), s_lo)?.then(&Operator::pointwise(&sqrt_mag, "|b|^1/2"));
    let s = directional_derivative(&b.signed_power(0.5), Some(&r_hi))?;
    let hs = s.then(&h.adjoint());
    let hs_norm = if b.sup_norm() == 0.0 { 0.0 } else { l2_operator_norm(&hs, 17)? };
    if hs_norm >= 1.0 {
        return Err(Error::Divergence { estimate: hs_norm });
    }
    let theta = Operator::compose(&[r_lo, hs.neumann_inverse(NEUMANN_TOL, NEUMANN_MAX), r_hi]);
    Ok(Theta2Assembly { zeta, hs_norm, h, s, theta })
}

#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct ThetaPParams {
    pub mu: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

/// `Θ_p(μ)` with named building blocks `T_p`, `Q_p(q)`, `G_p(r)`.
#[derive(Clone)]
pub struct ResolventAssembly {
    pub params: ThetaPParams,
    pub tp_norm: f64,
    pub handles: BTreeMap<String, Operator>,
    pub theta: Operator,
}

fn conj_exp(p: f64) -> f64 {
    p / (p - 1.0)
}

/// `Θ_p = (μ+A)^{−1} − (μ+A)^{−1/α+(−1+1/α)/q} Q_p(q)(1+T_p)^{−1}G_p(r)(μ+A)^{(−1+1/α)/r′}`.
/// `admissible = Some((m, δ))` additionally requires `p ∈ (p_−, p_+)`.
pub fn assemble_theta_p(
    b: &VectorFieldLattice,
    alpha: f64,
    params: ThetaPParams,
    admissible: Option<(f64, f64)>,
    probes: usize,
    seed: u64,
) -> Result<ResolventAssembly> {
    check_alpha(alpha)?;
    let ThetaPParams { mu, p, q, r } = params;
    if !(mu > 0.0) {
        return param(format!("mu = {mu} must be positive"));
    }
    if !(1.0 < r && r < p && p < q) {
        return param(format!("need 1 < r < p < q, got r = {r}, p = {p}, q = {q}"));
    }
    if let Some((m, delta)) = admissible {
        let adm = check_admissibility(b.grid.dim, alpha, m, delta)?;
        if !(adm.p_minus < p && p < adm.p_plus) {
            return Err(Error::Admissibility {
                hypothesis: "p inside (p_-, p_+)".into(),
                detail: format!("p = {p} outside ({}, {})", adm.p_minus, adm.p_plus),
            });
        }
    }
    let g = &b.grid;
    let z = Complex64::new(mu, 0.0);
    let pw = |s: f64| shifted_power(g, alpha, z, s);
    let beta = -1.0 + 1.0 / alpha;
    let w_p = b.signed_power(1.0 / p);
    let mag_pp = b.magnitude().map_real(|v| v.powf(1.0 / conj_exp(p)));
    let m_pp = Operator::pointwise(&mag_pp, "|b|^(1/p')");
    let res = pw(-1.0)?;
    let tp = m_pp.then(&directional_derivative(&w_p, Some(&res))?);
    let qp = m_pp.then(&pw(beta / conj_exp(q))?);
    let gp = directional_derivative(&w_p, Some(&pw(-1.0 / alpha + beta / r)?))?;
    let left = pw(-1.0 / alpha + beta / q)?;
    let right = pw(beta / conj_exp(r))?;
    let tp_norm = if b.sup_norm() == 0.0 { 0.0 } else { lp_operator_norm(&tp, p, probes, 20, seed)? };
    if tp_norm >= 1.0 {
        return Err(Error::Divergence { estimate: tp_norm });
    }
    let correction = Operator::compose(&[right, gp.clone(), tp.neumann_inverse(NEUMANN_TOL, NEUMANN_MAX), qp.clone(), left]);
    let theta = res.minus(&correction);
    let handles = BTreeMap::from([
        ("T_p".to_string(), tp),
        ("Q_p".to_string(), qp),
        ("G_p".to_string(), gp),
        ("Theta".to_string(), theta.clone()),
    ]);
    Ok(ResolventAssembly { params, tp_norm, handles, theta })
}

/// Which constant `c_p` a bound uses.
pub fn c_p_candidates(p: f64) -> [(&'static str, f64); 2] {
    let pp = conj_exp(p);
    [("pp'/4", p * pp / 4.0), ("4/(pp')", 4.0 / (p * pp))]
}

/// Probes the three `L^p` inequalities for `V ≥ 0` with `δ` the weak
/// form-bound of `V` at `λ`, for both candidate constants.
pub fn verify_lp_inequalities(
    v: &Field,
    alpha: f64,
    p: f64,
    mu: f64,
    lambda: f64,
    probes: usize,
    seed: u64,
) -> Result<VerificationReport> {
    check_alpha(alpha)?;
    if !(mu >= lambda && lambda > 0.0) {
        return param(format!("need mu >= lambda > 0, got mu = {mu}, lambda = {lambda}"));
    }
    if !(p > 1.0) {
        return param(format!("p = {p} must exceed 1"));
    }
    let mut rep = VerificationReport::new(
        "lp_inequalities",
        "L^p inequalities for symmetric Markov generators",
    );
    rep.input("p", p).input("mu", mu).input("lambda", lambda).input("probes", probes).input("seed", seed);
    let g: TorusGrid = v.grid;
    let opts = FormBoundOptions { tol: 1e-12, zero_mode: ZeroMode::Include, lanczos_steps: 60, ..Default::default() };
    let delta = estimate_weak_formbound(v, alpha, lambda, &opts)?.delta_est;
    rep.metric("delta", delta);
    let pp = conj_exp(p);
    let e_inv = shifted_power(&g, alpha, Complex64::new(mu, 0.0), -(alpha - 1.0) / alpha)?;
    let vp = Operator::pointwise(&v.map_real(|x| x.powf(1.0 / p)), "V^(1/p)");
    let vpp = Operator::pointwise(&v.map_real(|x| x.powf(1.0 / pp)), "V^(1/p')");
    let ops = [
        ("r_v", e_inv.then(&vp)),
        ("v_r_v", Operator::compose(&[vpp.clone(), e_inv.clone(), vp.clone()])),
        ("v_r", vpp.then(&e_inv)),
    ];
    let ex = (alpha - 1.0) / alpha;
    for (name, op) in ops.iter() {
        let lhs = if v.norm_inf() == 0.0 { 0.0 } else { lp_operator_norm(op, p, probes, 40, seed)? };
        rep.metric(&format!("{name}.lhs"), lhs);
        for (cname, c) in c_p_candidates(p) {
            let rhs = match *name {
                "r_v" => (delta * c).powf(1.0 / p) * mu.powf(-ex / pp),
                "v_r_v" => delta * c,
                _ => (delta * c).powf(1.0 / pp) * mu.powf(-ex / p),
            };
            let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
            rep.metric(&format!("{name}.ratio[{cname}]"), ratio);
            if cname == "pp'/4" {
                rep.check_le(&format!("{name}.ratio[{cname}]"), ratio, 1.0 + 1e-6);
            }
        }
    }
    let recip_max = ["r_v", "v_r_v", "v_r"]
        .iter()
        .map(|n| rep.metrics[&format!("{n}.ratio[4/(pp')]")].as_f64().unwrap_or(0.0))
        .fold(0.0, f64::max);
    rep.metric("reciprocal_candidate_max_ratio", recip_max);
    rep.metric("reciprocal_candidate_fails", recip_max > 1.0 + 1e-6);
    Ok(rep)
}

/// Generator residual of `Θ_p`, the pseudo-resolvent identity
/// `Θ(μ) − Θ(μ₂) = (μ₂ − μ)Θ(μ)Θ(μ₂)` and agreement of `Θ_p` with `Θ₂`, all
/// on `f`.
pub fn verify_resolvent_identities(
    b: &VectorFieldLattice,
    alpha: f64,
    params: ThetaPParams,
    mu2: f64,
    f: &Field,
    probes: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new("resolvent_identities", "Θ_p inverts μ + A + b·∇ and is a pseudo-resolvent");
    rep.input("mu", params.mu).input("mu2", mu2).input("p", params.p).input("q", params.q).input("r", params.r);
    rep.provenance("seed", seed);
    let a1 = assemble_theta_p(b, alpha, params, None, probes, seed)?;
    let a2 = assemble_theta_p(b, alpha, ThetaPParams { mu: mu2, ..params }, None, probes, seed)?;
    rep.metric("tp_norm", a1.tp_norm);
    let u1 = a1.theta.apply(f)?;
    let u2 = a2.theta.apply(f)?;
    let back = shifted_generator(b, alpha, Complex64::new(params.mu, 0.0))?.apply(&u1)?;
    rep.check_le("generator_residual", back.rel_diff(f), 1e-8);
    let cross = a1.theta.apply(&u2)?.scale(mu2 - params.mu);
    let pr = u1.sub(&u2).sub(&cross).norm2() / u1.norm2().max(f64::MIN_POSITIVE);
    rep.check_le("pseudo_resolvent_residual", pr, 1e-8);
    let t2 = assemble_theta2(b, alpha, Complex64::new(params.mu, 0.0))?;
    rep.metric("hs_norm", t2.hs_norm);
    rep.check_le("theta_p_vs_theta_2", t2.theta.apply(f)?.rel_diff(&u1), 1e-6);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftSpec;

    fn smooth(g: &TorusGrid, a: f64) -> VectorFieldLattice {
        DriftSpec::bounded_smooth(a, 2.0 * g.half_length, g.dim).unwrap().sample(g).unwrap()
    }

    #[test]
    fn theta2_inverts_generator() {
        let g = TorusGrid::new(2, 4.0, 16).unwrap();
        let b = smooth(&g, 0.3);
        let zeta = Complex64::new(2.0, 0.5);
        let th = assemble_theta2(&b, 1.5, zeta).unwrap();
        assert!(th.hs_norm < 1.0);
        let f = Field::random_normal(&g, 3);
        let u = th.theta.apply(&f).unwrap();
        let back = shifted_generator(&b, 1.5, zeta).unwrap().apply(&u).unwrap();
        assert!(back.rel_diff(&f) < 1e-9);
    }

    #[test]
    fn zero_drift_collapses() {
        let g = TorusGrid::new(2, 4.0, 8).unwrap();
        let b = VectorFieldLattice::zeros(&g);
        let f = Field::random_normal(&g, 1);
        let exact = shifted_power(&g, 1.5, Complex64::new(3.0, 0.0), -1.0).unwrap().apply(&f).unwrap();
        let t2 = assemble_theta2(&b, 1.5, Complex64::new(3.0, 0.0)).unwrap();
        assert!(t2.theta.apply(&f).unwrap().rel_diff(&exact) < 1e-13);
        let tp = assemble_theta_p(&b, 1.5, ThetaPParams { mu: 3.0, p: 2.5, q: 3.0, r: 2.0 }, None, 2, 0).unwrap();
        assert!(tp.theta.apply(&f).unwrap().rel_diff(&exact) < 1e-13);
    }

    #[test]
    fn boyd_matches_l2_norm_for_p2() {
        let g = TorusGrid::new(1, 4.0, 32).unwrap();
        let w = g.sample(|x| 1.0 + x[0].cos());
        let k = shifted_power(&g, 1.5, Complex64::new(1.0, 0.0), -0.5).unwrap().then(&Operator::pointwise(&w, "w"));
        let a = lp_operator_norm(&k, 2.0, 3, 200, 5).unwrap();
        let b = l2_operator_norm(&k, 5).unwrap();
        assert!((a - b).abs() < 1e-6 * b);
    }
}
