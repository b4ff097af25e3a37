//! Approximant semigroups `e^{−tΛ(b_n)}` on the torus: propagation, Duhamel
//! residuals, cutoff masses and Cauchy behavior in `n`.

use crate::drift::{DriftSpec, MollifiedDrift, VectorFieldLattice};
use crate::error::{param, Error, Result};
use crate::grid::{fft_nd, Field, TorusGrid};
use crate::kernel::{heat_kernel_value, sphere_area};
use crate::quad::{integrate, integrate_half_line, simpson_weights};
use crate::report::VerificationReport;
use crate::resolvent::assemble_theta2;
use crate::spectral::check_alpha;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Strang splitting: exact `e^{−ΔtA/2}`, advection, exact `e^{−ΔtA/2}`.
    #[default]
    SplitstepSpectral,
    /// Arnoldi approximation of `e^{−ΔtΛ}` per step.
    ExpmKrylov,
}

/// Advection substep of the split-step scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Advection {
    /// Classical RK4 on `u_t = −b·∇u` with spectral gradients.
    #[default]
    Rk4,
    /// Midpoint backtracking with periodic multilinear interpolation.
    SemiLagrangian,
}

#[derive(Clone, Debug)]
pub struct PropagatorConfig {
    pub drift: MollifiedDrift,
    pub alpha: f64,
    pub t_final: f64,
    pub steps: usize,
    pub scheme: Scheme,
    pub advection: Advection,
    pub krylov_dim: usize,
}

impl PropagatorConfig {
    pub fn new(drift: MollifiedDrift, alpha: f64, t_final: f64, steps: usize) -> Self {
        Self {
            drift,
            alpha,
            t_final,
            steps,
            scheme: Scheme::default(),
            advection: Advection::default(),
            krylov_dim: 30,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_advection(mut self, advection: Advection) -> Self {
        self.advection = advection;
        self
    }

    /// Same drift and scheme over a different horizon.
    pub fn with_time(&self, t_final: f64, steps: usize) -> Self {
        Self { t_final, steps, ..self.clone() }
    }

    pub fn grid(&self) -> &TorusGrid {
        self.drift.grid()
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// `Δt·‖b_n‖_∞·πN/(2L)`.
    pub fn cfl_number(&self) -> f64 {
        self.dt() * self.drift.lattice.sup_norm() * self.grid().k_nyquist()
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t_final = {} must be finite and nonnegative", self.t_final)));
        }
        if self.scheme == Scheme::ExpmKrylov && self.krylov_dim < 2 {
            return Err(Error::Config("Krylov dimension must be at least 2".into()));
        }
        if self.scheme == Scheme::SplitstepSpectral && self.cfl_number() > 1.0 {
            return Err(Error::Config(format!(
                "CFL guard violated: dt·|b_n|·πN/(2L) = {:.4} > 1; increase steps",
                self.cfl_number()
            )));
        }
        Ok(())
    }
}

/// Precomputed one-step map of a validated configuration.
pub struct Propagator {
    grid: TorusGrid,
    dt: f64,
    symbol_a: Vec<f64>,
    half_heat: Vec<f64>,
    wave: Vec<Vec<f64>>,
    drift: Vec<Vec<f64>>,
    lattice: VectorFieldLattice,
    scheme: Scheme,
    advection: Advection,
    krylov_dim: usize,
}

impl Propagator {
    pub fn new(cfg: &PropagatorConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = *cfg.grid();
        let dt = cfg.dt();
        let symbol_a: Vec<f64> = grid.abs_k().into_iter().map(|k| k.powf(cfg.alpha)).collect();
        let half_heat = symbol_a.iter().map(|a| (-0.5 * dt * a).exp()).collect();
        let wave = (0..grid.dim)
            .map(|j| {
                (0..grid.len())
                    .map(|idx| {
                        let a = grid.unravel(idx)[j];
                        if grid.is_nyquist(a) {
                            0.0
                        } else {
                            grid.wavenumber(a)
                        }
                    })
                    .collect()
            })
            .collect();
        let drift = cfg.drift.lattice.components.iter().map(|c| c.re()).collect();
        Ok(Self {
            grid,
            dt,
            symbol_a,
            half_heat,
            wave,
            drift,
            lattice: cfg.drift.lattice.clone(),
            scheme: cfg.scheme,
            advection: cfg.advection,
            krylov_dim: cfg.krylov_dim,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `b·∇u` with spectral derivatives.
    pub fn drift_derivative(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut uh = u.to_vec();
        fft_nd(&self.grid, &mut uh, false);
        let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
        let mut tmp = vec![Complex64::new(0.0, 0.0); u.len()];
        for (k, b) in self.wave.iter().zip(&self.drift) {
            if b.iter().all(|v| *v == 0.0) {
                continue;
            }
            for ((t, v), kj) in tmp.iter_mut().zip(&uh).zip(k) {
                *t = Complex64::new(-v.im * kj, v.re * kj);
            }
            fft_nd(&self.grid, &mut tmp, true);
            for ((o, t), bj) in out.iter_mut().zip(&tmp).zip(b) {
                *o += t * bj;
            }
        }
        out
    }

    /// `Λ(b_n)u`.
    pub fn generator_apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut a = u.to_vec();
        fft_nd(&self.grid, &mut a, false);
        a.iter_mut().zip(&self.symbol_a).for_each(|(v, s)| *v *= s);
        fft_nd(&self.grid, &mut a, true);
        let b = self.drift_derivative(u);
        a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
        a
    }

    fn heat_half(&self, u: &mut [Complex64]) {
        fft_nd(&self.grid, u, false);
        u.iter_mut().zip(&self.half_heat).for_each(|(v, s)| *v *= s);
        fft_nd(&self.grid, u, true);
    }

    fn advect_rk4(&self, u: &mut [Complex64]) {
        let tau = self.dt;
        let rhs = |v: &[Complex64]| -> Vec<Complex64> { self.drift_derivative(v).into_iter().map(|x| -x).collect() };
        let shifted = |c: f64, k: &[Complex64]| -> Vec<Complex64> { u.iter().zip(k).map(|(a, b)| a + b * c).collect() };
        let k1 = rhs(u);
        let k2 = rhs(&shifted(0.5 * tau, &k1));
        let k3 = rhs(&shifted(0.5 * tau, &k2));
        let k4 = rhs(&shifted(tau, &k3));
        for i in 0..u.len() {
            u[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (tau / 6.0);
        }
    }

    fn advect_semi_lagrangian(&self, u: &mut [Complex64]) {
        let g = self.grid;
        let d = g.dim;
        let re = VectorFieldLattice {
            grid: g,
            components: vec![Field { grid: g, data: u.iter().map(|v| Complex64::new(v.re, 0.0)).collect(), real: true }],
        };
        let im = VectorFieldLattice {
            grid: g,
            components: vec![Field { grid: g, data: u.iter().map(|v| Complex64::new(v.im, 0.0)).collect(), real: true }],
        };
        let mut bx = vec![0.0; d];
        let mut out = [0.0];
        for (idx, v) in u.iter_mut().enumerate() {
            let x = g.point(idx);
            let mid: Vec<f64> = (0..d).map(|j| x[j] - 0.5 * self.dt * self.drift[j][idx]).collect();
            self.lattice.interpolate(&mid, &mut bx);
            let foot: Vec<f64> = (0..d).map(|j| x[j] - self.dt * bx[j]).collect();
            re.interpolate(&foot, &mut out);
            let r = out[0];
            im.interpolate(&foot, &mut out);
            *v = Complex64::new(r, out[0]);
        }
    }

    fn krylov_real(&self, v: &[f64]) -> Vec<f64> {
        let beta = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if beta == 0.0 {
            return v.to_vec();
        }
        let m = self.krylov_dim;
        let mut basis: Vec<Vec<f64>> = vec![v.iter().map(|x| x / beta).collect()];
        let mut h = DMatrix::<f64>::zeros(m + 1, m);
        let mut used = m;
        for j in 0..m {
            let cv: Vec<Complex64> = basis[j].iter().map(|x| Complex64::new(*x, 0.0)).collect();
            let mut w: Vec<f64> = self.generator_apply(&cv).into_iter().map(|c| -c.re).collect();
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c: f64 = q.iter().zip(&w).map(|(a, b)| a * b).sum();
                    h[(i, j)] += c;
                    w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
                }
            }
            let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            h[(j + 1, j)] = nw;
            if nw <= 1e-13 * beta {
                used = j + 1;
                break;
            }
            basis.push(w.into_iter().map(|x| x / nw).collect());
        }
        let hm = h.view((0, 0), (used, used)).into_owned() * self.dt;
        let e = hm.exp();
        let coef: DVector<f64> = e.column(0).into_owned() * beta;
        let mut out = vec![0.0; v.len()];
        for (c, q) in coef.iter().zip(&basis) {
            out.iter_mut().zip(q).for_each(|(o, b)| *o += c * b);
        }
        out
    }

    fn krylov_step(&self, u: &mut [Complex64]) {
        let re: Vec<f64> = u.iter().map(|v| v.re).collect();
        let im: Vec<f64> = u.iter().map(|v| v.im).collect();
        let r = self.krylov_real(&re);
        let i = self.krylov_real(&im);
        for (k, v) in u.iter_mut().enumerate() {
            *v = Complex64::new(r[k], i[k]);
        }
    }

    /// One step of length `Δt`, in place.
    pub fn step(&self, u: &mut [Complex64]) {
        match self.scheme {
            Scheme::ExpmKrylov => self.krylov_step(u),
            Scheme::SplitstepSpectral => {
                self.heat_half(u);
                match self.advection {
                    Advection::Rk4 => self.advect_rk4(u),
                    Advection::SemiLagrangian => self.advect_semi_lagrangian(u),
                }
                self.heat_half(u);
            }
        }
    }

    /// `steps` consecutive steps applied to `f`.
    pub fn run(&self, f: &Field, steps: usize) -> Field {
        let mut u = f.data.clone();
        for _ in 0..steps {
            self.step(&mut u);
        }
        let out = Field { grid: self.grid, data: u, real: f.real };
        if f.real {
            out.realify()
        } else {
            out
        }
    }
}

fn check_field(cfg: &PropagatorConfig, f: &Field) -> Result<()> {
    if f.grid != *cfg.grid() {
        return param("field and drift live on different grids");
    }
    Ok(())
}

/// `e^{−t_final Λ(b_n)} f`.
pub fn propagate(cfg: &PropagatorConfig, f: &Field) -> Result<Field> {
    check_field(cfg, f)?;
    let p = Propagator::new(cfg)?;
    if cfg.t_final == 0.0 {
        return Ok(f.clone());
    }
    Ok(p.run(f, cfg.steps))
}

fn free_heat(grid: &TorusGrid, alpha: f64, fhat: &[Complex64], s: f64) -> Vec<Complex64> {
    let mut v: Vec<Complex64> =
        fhat.iter().zip(grid.abs_k()).map(|(c, k)| c * (-s * k.powf(alpha)).exp()).collect();
    fft_nd(grid, &mut v, true);
    v
}

/// Relative `L²` residual of the Duhamel formula
/// `e^{−tΛ}f = e^{−tA}f − ∫₀^t e^{−(t−s)Λ} b_n·∇e^{−sA}f ds`.
///
/// The time integral uses composite Simpson on the step grid, so `steps`
/// must be even.
pub fn duhamel_residual(cfg: &PropagatorConfig, f: &Field) -> Result<f64> {
    check_field(cfg, f)?;
    if !cfg.steps.is_multiple_of(2) {
        return Err(Error::Config("Duhamel quadrature needs an even step count".into()));
    }
    let fnorm = f.norm2();
    if fnorm == 0.0 {
        return Ok(0.0);
    }
    let p = Propagator::new(cfg)?;
    let g = *cfg.grid();
    let u = p.run(f, cfg.steps);
    let mut fhat = f.data.clone();
    fft_nd(&g, &mut fhat, false);
    let w = simpson_weights(cfg.steps, p.dt());
    let mut acc = vec![Complex64::new(0.0, 0.0); g.len()];
    for (j, wj) in w.iter().enumerate() {
        if j > 0 {
            p.step(&mut acc);
        }
        let gj = p.drift_derivative(&free_heat(&g, cfg.alpha, &fhat, j as f64 * p.dt()));
        acc.iter_mut().zip(&gj).for_each(|(a, b)| *a += b * wj);
    }
    let free = free_heat(&g, cfg.alpha, &fhat, cfg.t_final);
    let res: Vec<Complex64> = u.data.iter().zip(&free).zip(&acc).map(|((a, b), c)| a - b + c).collect();
    Ok(Field { grid: g, data: res, real: false }.norm2() / fnorm)
}

/// Smooth profile `υ`: 1 on `[0, 1]`, 0 on `[2, ∞)`.
pub fn upsilon(s: f64) -> f64 {
    let psi = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let a = psi(2.0 - s);
        a / (a + psi(s - 1.0))
    }
}

/// Cutoff `ξ_k(y) = 1` for `|y| < k`, `υ(|y| + 1 − k)` otherwise.
pub fn xi_k(k: f64, r: f64) -> f64 {
    if r < k {
        1.0
    } else {
        upsilon(r + 1.0 - k)
    }
}

/// Lattice field of `ξ_k`.
pub fn cutoff_field(grid: &TorusGrid, k: f64) -> Field {
    grid.sample(|x| xi_k(k, x.iter().map(|v| v * v).sum::<f64>().sqrt()))
}

/// Whole-space defect `∫(1 − ξ_k) p_t` of the free kernel.
pub fn continuum_cutoff_defect(alpha: f64, dim: usize, t: f64, k: f64) -> Result<f64> {
    let s = sphere_area(dim);
    let d = dim as i32;
    let dens = |r: f64| -> Complex64 {
        let v = heat_kernel_value(alpha, dim, t, r).unwrap_or(f64::NAN);
        Complex64::new(s * r.powi(d - 1) * v * (1.0 - xi_k(k, r)), 0.0)
    };
    let (inner, _) = integrate(dens, k, k + 1.0, 1e-14, 1e-9)?;
    let tail = |u: f64| -> Complex64 {
        let r = k + 1.0 + u;
        Complex64::new(s * r.powi(d - 1) * heat_kernel_value(alpha, dim, t, r).unwrap_or(f64::NAN), 0.0)
    };
    let (outer, _) = integrate_half_line(tail, k + 1.0, 1e-14, 1e-9)?;
    Ok(inner.re + outer.re)
}

/// Free-kernel mass outside the ball of radius `L`, bounding what the
/// periodization moves around.
pub fn wrap_mass(alpha: f64, dim: usize, t: f64, half_length: f64) -> Result<f64> {
    let s = sphere_area(dim);
    let d = dim as i32;
    let tail = |u: f64| -> Complex64 {
        let r = half_length + u;
        Complex64::new(s * r.powi(d - 1) * heat_kernel_value(alpha, dim, t, r).unwrap_or(f64::NAN), 0.0)
    };
    Ok(integrate_half_line(tail, half_length, 1e-15, 1e-9)?.0.re)
}

/// Cutoff masses `⟨e^{−tΛ(b_n)}(x,·), ξ_k⟩ = (e^{−tΛ(b_n)}ξ_k)(x)` for each `k`.
pub fn cutoff_masses(cfg: &PropagatorConfig, x_index: usize, k_list: &[f64]) -> Result<Vec<f64>> {
    let g = *cfg.grid();
    if x_index >= g.len() {
        return param(format!("site index {x_index} out of range"));
    }
    if k_list.is_empty() || k_list.windows(2).any(|w| w[1] <= w[0]) || k_list[0] <= 0.0 {
        return param("k_list must be positive and strictly increasing");
    }
    if let Some(k) = k_list.iter().find(|k| **k > g.half_length) {
        return param(format!("cutoff radius k = {k} exceeds L = {}", g.half_length));
    }
    let p = Propagator::new(cfg)?;
    k_list.iter().map(|&k| Ok(p.run(&cutoff_field(&g, k), cfg.steps).data[x_index].re)).collect()
}

/// Cutoff masses increase in `k` and reach `1 ± tol` at the largest `k`.
pub fn conservativeness_check(cfg: &PropagatorConfig, x_index: usize, k_list: &[f64]) -> Result<VerificationReport> {
    let g = *cfg.grid();
    let mut rep = VerificationReport::new("conservativeness", "conservativeness via cutoff functions");
    rep.input("n", cfg.drift.n)
        .input("t", cfg.t_final)
        .input("steps", cfg.steps)
        .input("k_list", k_list)
        .input("x", g.point(x_index));
    let vals = cutoff_masses(cfg, x_index, k_list)?;
    for (k, v) in k_list.iter().zip(&vals) {
        rep.metric(&format!("mass[k={k}]"), v);
        rep.metric(&format!("defect[k={k}]"), 1.0 - v);
    }
    rep.check_increasing("mass", &vals);
    let last = *vals.last().expect("nonempty");
    rep.check_le("defect_at_largest_k", (1.0 - last).abs(), 1e-3);
    Ok(rep)
}

/// Drift-free baseline: torus cutoff defects against the whole-space tail
/// quadrature, agreeing up to the wrap mass.
pub fn conservativeness_baseline(
    grid: &TorusGrid,
    alpha: f64,
    t: f64,
    steps: usize,
    k_list: &[f64],
) -> Result<VerificationReport> {
    let zero = MollifiedDrift::from_lattice(&DriftSpec::zero(grid.dim), VectorFieldLattice::zeros(grid));
    let cfg = PropagatorConfig::new(zero, alpha, t, steps);
    let vals = cutoff_masses(&cfg, grid.origin_index(), k_list)?;
    let wrap = wrap_mass(alpha, grid.dim, t, grid.half_length)?;
    let mut rep = VerificationReport::new("conservativeness_baseline", "free-kernel tail mass");
    rep.input("t", t).input("k_list", k_list).metric("wrap_mass", wrap);
    for (k, v) in k_list.iter().zip(&vals) {
        let c = continuum_cutoff_defect(alpha, grid.dim, t, *k)?;
        rep.metric(&format!("continuum_defect[k={k}]"), c);
        rep.metric(&format!("torus_defect[k={k}]"), 1.0 - v);
        rep.check_le(&format!("defect_gap[k={k}]"), ((1.0 - v) - c).abs(), wrap + 1e-9);
    }
    Ok(rep)
}

/// Options for [`feller_convergence_check`].
#[derive(Clone, Debug)]
pub struct FellerOptions {
    pub alpha: f64,
    pub steps: usize,
    pub mu_list: Vec<f64>,
}

impl Default for FellerOptions {
    fn default() -> Self {
        Self { alpha: 1.5, steps: 16, mu_list: vec![1e2, 1e3, 1e4] }
    }
}

/// Sup-norm Cauchy differences of `e^{−tΛ(b_n)}f` along `n_list`, and the
/// strong limit `μ(μ+Λ(b_n))^{−1}f → f` along the `μ` ladder for the last `n`.
pub fn feller_convergence_check(
    base: &DriftSpec,
    n_list: &[u32],
    t: f64,
    f: &Field,
    opts: &FellerOptions,
) -> Result<VerificationReport> {
    if n_list.len() < 2 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return param("n_list must hold at least two strictly increasing levels");
    }
    let g = f.grid;
    let mut rep = VerificationReport::new("feller_convergence", "Feller semigroup as the limit of approximants");
    rep.input("n_list", n_list).input("t", t).input("steps", opts.steps).input("mu_list", &opts.mu_list);
    let mut outs = Vec::new();
    let mut last = None;
    for &n in n_list {
        let drift = MollifiedDrift::new(base, n, &g)?;
        rep.metric(&format!("sup_b[n={n}]"), drift.lattice.sup_norm());
        let cfg = PropagatorConfig::new(drift.clone(), opts.alpha, t, opts.steps);
        outs.push(propagate(&cfg, f)?);
        last = Some(drift);
    }
    let diffs: Vec<f64> = outs.windows(2).map(|w| w[0].sub(&w[1]).norm_inf()).collect();
    for (w, d) in n_list.windows(2).zip(&diffs) {
        rep.metric(&format!("cauchy[{}-{}]", w[0], w[1]), d);
    }
    if diffs.iter().all(|d| *d == 0.0) {
        rep.note("all approximants coincide on this lattice");
    } else {
        rep.check_decreasing("cauchy", &diffs);
    }
    let b = last.expect("nonempty").lattice;
    let mut gaps = Vec::new();
    for &mu in &opts.mu_list {
        let th = assemble_theta2(&b, opts.alpha, Complex64::new(mu, 0.0))?;
        let gap = th.theta.apply(f)?.scale(mu).sub(f).norm_inf();
        rep.metric(&format!("resolvent_gap[mu={mu}]"), gap);
        gaps.push(gap);
    }
    if f.norm_inf() > 0.0 {
        rep.check_decreasing("resolvent_gap", &gaps);
    }
    Ok(rep)
}

/// `∫₀^{T} e^{−μt} e^{−tΛ(b_n)} f dt` by composite Simpson on `nodes` equal
/// intervals, one propagator step per interval.
pub fn laplace_resolvent(
    drift: &MollifiedDrift,
    alpha: f64,
    mu: f64,
    t_max: f64,
    nodes: usize,
    f: &Field,
) -> Result<Field> {
    if !(mu > 0.0) {
        return param("mu must be positive");
    }
    let cfg = PropagatorConfig::new(drift.clone(), alpha, t_max, nodes);
    check_field(&cfg, f)?;
    let p = Propagator::new(&cfg)?;
    let w = simpson_weights(nodes, p.dt());
    let mut u = f.data.clone();
    let mut acc = vec![Complex64::new(0.0, 0.0); u.len()];
    for (j, wj) in w.iter().enumerate() {
        if j > 0 {
            p.step(&mut u);
        }
        let c = wj * (-mu * j as f64 * p.dt()).exp();
        acc.iter_mut().zip(&u).for_each(|(a, b)| *a += b * c);
    }
    let out = Field { grid: f.grid, data: acc, real: f.real };
    Ok(if f.real { out.realify() } else { out })
}

/// Fitted envelope `‖e^{−tΛ}f‖_∞/‖f‖₂ ≤ C e^{ωt} t^{−d/(2α)}` over `t_list`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothingFit {
    pub c: f64,
    pub omega: f64,
    pub ratios: Vec<f64>,
}

pub fn smoothing_envelope(cfg: &PropagatorConfig, t_list: &[f64], probes: usize, seed: u64) -> Result<SmoothingFit> {
    if t_list.len() < 2 || t_list.windows(2).any(|w| w[1] <= w[0]) || t_list[0] <= 0.0 {
        return param("t_list must be positive and strictly increasing");
    }
    let g = *cfg.grid();
    let d = g.dim as f64;
    let dt = cfg.dt();
    let fields: Vec<Field> = (0..probes).map(|i| Field::random_normal(&g, seed.wrapping_add(i as u64))).collect();
    let mut ratios = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let steps = ((t / dt).round() as usize).max(1);
        let c = cfg.with_time(t, steps);
        let p = Propagator::new(&c)?;
        let mut worst = 0.0f64;
        for f in &fields {
            worst = worst.max(p.run(f, steps).norm_inf() / f.norm2());
        }
        ratios.push(worst * t.powf(d / (2.0 * cfg.alpha)));
    }
    let n = t_list.len() as f64;
    let ys: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    let tm = t_list.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = t_list.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let sxx: f64 = t_list.iter().map(|t| (t - tm) * (t - tm)).sum();
    let omega = (sxy / sxx).max(0.0);
    let c = t_list.iter().zip(&ratios).map(|(t, r)| r * (-omega * t).exp()).fold(0.0, f64::max);
    Ok(SmoothingFit { c, omega, ratios })
}

/// Writes the line through site `center` along `axis` as `x,value` rows.
pub fn write_slice_csv(f: &Field, center: usize, axis: usize, path: &Path) -> Result<()> {
    let g = f.grid;
    if axis >= g.dim {
        return param(format!("axis {axis} out of range"));
    }
    let mut multi = g.unravel(center);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "value"])?;
    for i in 0..g.n {
        multi[axis] = i;
        let v = f.data[g.ravel(&multi)].re;
        w.write_record([g.coord(i).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `(t, value)` rows under the given column name.
pub fn write_time_series_csv(times: &[f64], values: &[f64], column: &str, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", column])?;
    for (t, v) in times.iter().zip(values) {
        w.write_record([t.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_cfg(g: &TorusGrid, t: f64, steps: usize) -> PropagatorConfig {
        let zero = MollifiedDrift::from_lattice(&DriftSpec::zero(g.dim), VectorFieldLattice::zeros(g));
        PropagatorConfig::new(zero, 1.5, t, steps)
    }

    #[test]
    fn free_mode_is_exact() {
        let g = TorusGrid::new(2, 4.0, 16).unwrap();
        let kx = std::f64::consts::PI / 4.0 * 3.0;
        let f = g.sample(|x| (kx * x[0]).cos());
        let u = propagate(&zero_cfg(&g, 0.7, 5), &f).unwrap();
        let e = f.scale((-0.7 * kx.powf(1.5)).exp());
        assert!(u.rel_diff(&e) < 1e-13);
        assert_eq!(propagate(&zero_cfg(&g, 0.0, 1), &f).unwrap(), f);
    }

    #[test]
    fn cfl_guard() {
        let g = TorusGrid::new(3, 4.0, 8).unwrap();
        let b = MollifiedDrift::from_lattice(
            &DriftSpec::zero(3),
            DriftSpec::bounded_smooth(10.0, 8.0, 3).unwrap().sample(&g).unwrap(),
        );
        let cfg = PropagatorConfig::new(b, 1.5, 1.0, 2);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn upsilon_profile() {
        assert_eq!(upsilon(0.5), 1.0);
        assert_eq!(upsilon(2.5), 0.0);
        assert!((upsilon(1.5) - 0.5).abs() < 1e-14);
        assert_eq!(xi_k(3.0, 2.9), 1.0);
        assert_eq!(xi_k(3.0, 4.0), 0.0);
    }
}
