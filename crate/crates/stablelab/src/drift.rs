//! Drift catalog and the mollified approximants `b_n = γ_{ε_n} ∗ (1_n b)`.

use crate::error::{param, Error, Result};
use crate::grid::{fft_nd, Field, TorusGrid};
use crate::kernel::sphere_area;
use crate::quad::integrate;
use crate::spectral::check_alpha;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    Hardy,
    LpRadial,
    BoundedSmooth,
    KatoExample,
    CustomClosure,
}

/// User-supplied drift `x ↦ b(x)` writing into the output slice.
pub type DriftClosure = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Symbolic vector field on `ℝ^d`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "DriftDoc", into = "DriftDoc")]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub dim: usize,
    pub parameters: BTreeMap<String, f64>,
    pub singular_points: Vec<Vec<f64>>,
    closure: Option<DriftClosure>,
}

#[derive(Serialize, Deserialize)]
struct DriftDoc {
    kind: DriftKind,
    #[serde(default)]
    dim: Option<usize>,
    #[serde(default)]
    parameters: BTreeMap<String, f64>,
    #[serde(default)]
    singular_points: Vec<Vec<f64>>,
}

impl From<DriftSpec> for DriftDoc {
    fn from(s: DriftSpec) -> Self {
        DriftDoc { kind: s.kind, dim: Some(s.dim), parameters: s.parameters, singular_points: s.singular_points }
    }
}

impl TryFrom<DriftDoc> for DriftSpec {
    type Error = Error;

    fn try_from(doc: DriftDoc) -> Result<Self> {
        let p = |k: &str| {
            doc.parameters.get(k).copied().ok_or_else(|| Error::Config(format!("drift parameter `{k}` missing")))
        };
        let dim = match doc.dim {
            Some(d) => d,
            None => p("dim")? as usize,
        };
        let mut spec = match doc.kind {
            DriftKind::Hardy => {
                if let Some(t) = doc.parameters.get("target_formbound") {
                    DriftSpec::hardy_with_formbound(*t, p("alpha")?, dim)?
                } else {
                    DriftSpec::hardy(p("delta")?, p("alpha")?, dim)?
                }
            }
            DriftKind::LpRadial => DriftSpec::lp_radial(p("c")?, p("beta")?, p("alpha")?, dim)?,
            DriftKind::BoundedSmooth => DriftSpec::bounded_smooth(p("amplitude")?, p("period")?, dim)?,
            DriftKind::KatoExample => DriftSpec::kato_example(p("c")?, p("s")?, p("alpha")?, dim)?,
            DriftKind::CustomClosure => {
                return Err(Error::Config("custom_closure drifts cannot be loaded from a document".into()))
            }
        };
        if !doc.singular_points.is_empty() {
            spec.singular_points = doc.singular_points;
        }
        Ok(spec)
    }
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftSpec")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("parameters", &self.parameters)
            .field("singular_points", &self.singular_points)
            .finish()
    }
}

/// `κ_{α,d} = 2^{(α−1)/2} Γ((d+α−1)/4) / Γ((d−α+1)/4)`.
pub fn kappa_alpha_d(alpha: f64, dim: usize) -> f64 {
    let d = dim as f64;
    2f64.powf((alpha - 1.0) / 2.0) * gamma((d + alpha - 1.0) / 4.0) / gamma((d - alpha + 1.0) / 4.0)
}

fn radial(c: f64, power: f64) -> impl Fn(&[f64], &mut [f64]) {
    move |x, out| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let s = c * r.powf(-power);
        out.iter_mut().zip(x).for_each(|(o, v)| *o = s * v);
    }
}

impl DriftSpec {
    fn build(kind: DriftKind, dim: usize, params: &[(&str, f64)], singular: bool) -> Self {
        DriftSpec {
            kind,
            dim,
            parameters: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            singular_points: if singular { vec![vec![0.0; dim]] } else { Vec::new() },
            closure: None,
        }
    }

    /// `b(x) = √δ κ_{α,d} |x|^{−α} x`.
    pub fn hardy(delta: f64, alpha: f64, dim: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if dim < 3 {
            return param(format!("Hardy drift needs dim >= 3, got {dim}"));
        }
        if !(delta >= 0.0) {
            return param(format!("delta = {delta} must be nonnegative"));
        }
        let kappa = kappa_alpha_d(alpha, dim);
        let pre = delta.sqrt() * kappa;
        Ok(Self::build(
            DriftKind::Hardy,
            dim,
            &[("delta", delta), ("alpha", alpha), ("dim", dim as f64), ("kappa", kappa), ("prefactor", pre)],
            delta > 0.0,
        ))
    }

    /// Hardy drift `c|x|^{−α}x` scaled so that its weak form-bound under the
    /// sharp fractional Hardy inequality equals `target`: `c = target·κ_{α,d}²`.
    pub fn hardy_with_formbound(target: f64, alpha: f64, dim: usize) -> Result<Self> {
        let kappa = kappa_alpha_d(alpha, dim);
        let delta = (target * kappa).powi(2);
        let mut s = Self::hardy(delta, alpha, dim)?;
        s.parameters.insert("target_formbound".into(), target);
        Ok(s)
    }

    /// `b(x) = c|x|^{−β}x`, so `|b| ∈ L^{d/(α−1)}` near the origin iff `β < α`.
    pub fn lp_radial(c: f64, beta: f64, alpha: f64, dim: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if !(beta < alpha) {
            return param(format!("beta = {beta} must be below alpha = {alpha}"));
        }
        Ok(Self::build(
            DriftKind::LpRadial,
            dim,
            &[("c", c), ("beta", beta), ("alpha", alpha), ("dim", dim as f64)],
            beta > 1.0,
        ))
    }

    /// `b_j(x) = a[sin(2π x_{j+1}/P) + cos(2π x_j/P)/2]`, periodic with period `P`.
    pub fn bounded_smooth(amplitude: f64, period: f64, dim: usize) -> Result<Self> {
        if !(period > 0.0) || dim == 0 {
            return param("bounded_smooth needs a positive period and dimension");
        }
        Ok(Self::build(
            DriftKind::BoundedSmooth,
            dim,
            &[("amplitude", amplitude), ("period", period), ("dim", dim as f64)],
            false,
        ))
    }

    /// `b(x) = c|x|^{−s−1}x` with `0 ≤ s < α − 1`, a Kato-class drift.
    pub fn kato_example(c: f64, s: f64, alpha: f64, dim: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if !(s >= 0.0 && s < alpha - 1.0) {
            return param(format!("s = {s} must lie in [0, alpha - 1)"));
        }
        Ok(Self::build(
            DriftKind::KatoExample,
            dim,
            &[("c", c), ("s", s), ("alpha", alpha), ("dim", dim as f64)],
            s > 0.0,
        ))
    }

    pub fn custom(dim: usize, singular_points: Vec<Vec<f64>>, f: DriftClosure) -> Self {
        DriftSpec {
            kind: DriftKind::CustomClosure,
            dim,
            parameters: BTreeMap::from([("dim".to_string(), dim as f64)]),
            singular_points,
            closure: Some(f),
        }
    }

    /// The zero drift.
    pub fn zero(dim: usize) -> Self {
        Self::custom(dim, Vec::new(), Arc::new(|_, out: &mut [f64]| out.fill(0.0)))
    }

    pub fn parameter(&self, key: &str) -> Option<f64> {
        self.parameters.get(key).copied()
    }

    pub fn is_singular_at(&self, x: &[f64]) -> bool {
        self.singular_points
            .iter()
            .any(|s| s.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() < 1e-24)
    }

    /// `b(x)`; `None` at singular points.
    pub fn eval(&self, x: &[f64]) -> Option<Vec<f64>> {
        if x.len() != self.dim || self.is_singular_at(x) {
            return None;
        }
        let mut out = vec![0.0; self.dim];
        let g = |k: &str| self.parameters[k];
        match self.kind {
            DriftKind::Hardy => radial(g("prefactor"), g("alpha"))(x, &mut out),
            DriftKind::LpRadial => radial(g("c"), g("beta"))(x, &mut out),
            DriftKind::KatoExample => radial(g("c"), g("s") + 1.0)(x, &mut out),
            DriftKind::BoundedSmooth => {
                let (a, w) = (g("amplitude"), 2.0 * PI / g("period"));
                for j in 0..self.dim {
                    out[j] = a * ((w * x[(j + 1) % self.dim]).sin() + 0.5 * (w * x[j]).cos());
                }
            }
            DriftKind::CustomClosure => self.closure.as_ref()?(x, &mut out),
        }
        Some(out)
    }

    /// Lattice samples with singular sites set to zero.
    pub fn sample(&self, grid: &TorusGrid) -> Result<VectorFieldLattice> {
        self.truncated(grid, f64::INFINITY)
    }

    /// `1_n b` on the lattice: zero where `|x| > n`, `|b(x)| > n`, or `x` singular.
    pub fn truncated(&self, grid: &TorusGrid, n: f64) -> Result<VectorFieldLattice> {
        if grid.dim != self.dim {
            return param(format!("drift dimension {} does not match grid dimension {}", self.dim, grid.dim));
        }
        let mut comps = vec![vec![0.0; grid.len()]; self.dim];
        for idx in 0..grid.len() {
            let x = grid.point(idx);
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() > n {
                continue;
            }
            if let Some(b) = self.eval(&x) {
                let m = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !m.is_finite() {
                    return Err(Error::Numerical { msg: "drift is not finite".into(), diagnostics: format!("{x:?}") });
                }
                if m <= n {
                    for (c, v) in comps.iter_mut().zip(b) {
                        c[idx] = v;
                    }
                }
            }
        }
        VectorFieldLattice::from_components(grid, comps)
    }
}

/// Vector field on the lattice, one real [`Field`] per component.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldLattice {
    pub grid: TorusGrid,
    pub components: Vec<Field>,
}

impl VectorFieldLattice {
    pub fn zeros(grid: &TorusGrid) -> Self {
        Self { grid: *grid, components: vec![Field::zeros(grid); grid.dim] }
    }

    pub fn from_components(grid: &TorusGrid, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != grid.dim {
            return param("vector field needs one component per dimension");
        }
        let components = comps.into_iter().map(|c| Field::from_real(grid, c)).collect::<Result<_>>()?;
        Ok(Self { grid: *grid, components })
    }

    /// `|b|` per site.
    pub fn magnitude(&self) -> Field {
        let mut out = vec![0.0; self.grid.len()];
        for c in &self.components {
            out.iter_mut().zip(&c.data).for_each(|(o, v)| *o += v.re * v.re);
        }
        Field::from_real(&self.grid, out.into_iter().map(f64::sqrt).collect()).expect("matching length")
    }

    pub fn sup_norm(&self) -> f64 {
        self.magnitude().norm_inf()
    }

    /// `b|b|^{s−1}`, zero where `b = 0`.
    pub fn signed_power(&self, s: f64) -> VectorFieldLattice {
        let mag = self.magnitude();
        let fac: Vec<f64> = mag.data.iter().map(|m| if m.re > 0.0 { m.re.powf(s - 1.0) } else { 0.0 }).collect();
        let components = self
            .components
            .iter()
            .map(|c| {
                let v = c.data.iter().zip(&fac).map(|(x, f)| x.re * f).collect();
                Field::from_real(&self.grid, v).expect("matching length")
            })
            .collect();
        VectorFieldLattice { grid: self.grid, components }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { grid: self.grid, components: self.components.iter().map(|f| f.scale(c)).collect() }
    }

    /// `Σ_j |b_j − c_j|` integrated over sites with `|x| ≤ radius`.
    pub fn l1_distance(&self, other: &VectorFieldLattice, radius: f64) -> f64 {
        let g = &self.grid;
        let terms: Vec<f64> = (0..g.len())
            .filter(|&i| g.radius(i) <= radius)
            .map(|i| {
                self.components
                    .iter()
                    .zip(&other.components)
                    .map(|(a, b)| (a.data[i].re - b.data[i].re).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        crate::stats::pairwise_sum(&terms) * g.cell_volume()
    }

    /// Periodic multilinear interpolation at an arbitrary point.
    pub fn interpolate(&self, x: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let n = g.n as i64;
        let h = g.h();
        let d = g.dim;
        let mut base = [0i64; 8];
        let mut frac = [0.0f64; 8];
        for j in 0..d {
            let s = (x[j] + g.half_length) / h;
            let f = s.floor();
            base[j] = f as i64;
            frac[j] = s - f;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0usize;
            for j in 0..d {
                let bit = (corner >> j) & 1;
                w *= if bit == 1 { frac[j] } else { 1.0 - frac[j] };
                idx = idx * g.n + (base[j] + bit as i64).rem_euclid(n) as usize;
            }
            if w == 0.0 {
                continue;
            }
            for (o, c) in out.iter_mut().zip(&self.components) {
                *o += w * c.data[idx].re;
            }
        }
    }
}

/// Normalization `c` of `γ(x) = c·exp(−1/(|x|²−1))` on the unit ball in `ℝ^d`.
pub fn mollifier_constant(dim: usize) -> f64 {
    let d = dim as f64;
    let f = |r: f64| {
        if r >= 1.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(r.powf(d - 1.0) * (-1.0 / (1.0 - r * r)).exp(), 0.0)
        }
    };
    let (v, _) = integrate(f, 0.0, 1.0, 1e-15, 1e-13).expect("smooth integrand");
    1.0 / (sphere_area(dim) * v.re)
}

fn bump(rho: f64) -> f64 {
    if rho >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - rho * rho)).exp()
    }
}

fn check_epsilon(epsilon: f64, grid: &TorusGrid) -> Result<()> {
    if !(epsilon > 0.0) {
        return param(format!("epsilon = {epsilon} must be positive"));
    }
    if epsilon >= grid.half_length / 2.0 {
        return param(format!("mollifier support {epsilon} does not fit the torus (L = {})", grid.half_length));
    }
    Ok(())
}

/// `γ_ε` sampled on the lattice around the origin, renormalized so the lattice
/// sum times `h^d` is one. When `ε ≤ h` only the origin site survives.
pub fn mollifier(epsilon: f64, grid: &TorusGrid) -> Result<Field> {
    check_epsilon(epsilon, grid)?;
    let f = grid.sample(|x| bump(x.iter().map(|v| v * v).sum::<f64>().sqrt() / epsilon));
    let s = f.integral().re;
    Ok(f.scale(1.0 / s))
}

fn displacement_kernel(epsilon: f64, grid: &TorusGrid) -> Vec<Complex64> {
    let h = grid.h();
    let mut v: Vec<Complex64> = (0..grid.len())
        .map(|idx| {
            let r2: f64 = grid.unravel(idx).into_iter().map(|a| (grid.freq_index(a) as f64 * h).powi(2)).sum();
            Complex64::new(bump(r2.sqrt() / epsilon), 0.0)
        })
        .collect();
    let s: f64 = v.iter().map(|c| c.re).sum();
    v.iter_mut().for_each(|c| *c /= s);
    v
}

/// Default radius `ε_n = L/n`.
pub fn default_epsilon(n: u32, grid: &TorusGrid) -> f64 {
    grid.half_length / n as f64
}

/// Mollified approximant `b_n`.
#[derive(Clone, Debug)]
pub struct MollifiedDrift {
    pub base: DriftSpec,
    pub n: u32,
    pub epsilon_n: f64,
    pub lattice: VectorFieldLattice,
}

/// `b_n = γ_{ε} ∗ (1_n b)` by FFT convolution on the lattice.
pub fn mollify(base: &DriftSpec, n: u32, epsilon_n: f64, grid: &TorusGrid) -> Result<MollifiedDrift> {
    if n == 0 {
        return param("truncation level n must be positive");
    }
    check_epsilon(epsilon_n, grid)?;
    let trunc = base.truncated(grid, n as f64)?;
    let mut ker = displacement_kernel(epsilon_n, grid);
    fft_nd(grid, &mut ker, false);
    let components = trunc
        .components
        .iter()
        .map(|c| {
            let mut v = c.data.clone();
            fft_nd(grid, &mut v, false);
            v.iter_mut().zip(&ker).for_each(|(x, k)| *x *= k);
            fft_nd(grid, &mut v, true);
            Field { grid: *grid, data: v, real: true }.realify()
        })
        .collect();
    Ok(MollifiedDrift { base: base.clone(), n, epsilon_n, lattice: VectorFieldLattice { grid: *grid, components } })
}

impl MollifiedDrift {
    /// `b_n` with the default radius.
    pub fn new(base: &DriftSpec, n: u32, grid: &TorusGrid) -> Result<Self> {
        mollify(base, n, default_epsilon(n, grid), grid)
    }

    /// Unmollified lattice drift wrapped as an approximant with `ε = 0`.
    pub fn from_lattice(base: &DriftSpec, lattice: VectorFieldLattice) -> Self {
        let n = lattice.sup_norm().ceil().max(1.0) as u32;
        MollifiedDrift { base: base.clone(), n, epsilon_n: 0.0, lattice }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.lattice.grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hardy_formula() {
        let s = DriftSpec::hardy(0.05, 1.5, 3).unwrap();
        let x = [0.3, -1.2, 0.7];
        let b = s.eval(&x).unwrap();
        let r = (0.09f64 + 1.44 + 0.49).sqrt();
        let m = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((m - 0.05f64.sqrt() * kappa_alpha_d(1.5, 3) * r.powf(-0.5)).abs() < 1e-14);
        let bm = s.eval(&[-0.3, 1.2, -0.7]).unwrap();
        assert!(b.iter().zip(&bm).all(|(a, c)| (a + c).abs() < 1e-15));
        assert!(s.eval(&[0.0; 3]).is_none());
        assert!(DriftSpec::hardy(0.05, 1.5, 2).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = DriftSpec::hardy_with_formbound(0.05, 1.5, 3).unwrap();
        let txt = serde_json::to_string(&s).unwrap();
        let back: DriftSpec = serde_json::from_str(&txt).unwrap();
        assert_eq!(back.parameters, s.parameters);
        assert!(serde_json::from_str::<DriftSpec>(r#"{"kind":"custom_closure","dim":3}"#).is_err());
    }

    #[test]
    fn mollifier_mass_and_support() {
        let g = TorusGrid::new(3, 4.0, 16).unwrap();
        let m = mollifier(1.3, &g).unwrap();
        assert!((m.integral().re - 1.0).abs() < 1e-12);
        for i in 0..g.len() {
            if g.radius(i) >= 1.3 {
                assert_eq!(m.data[i].re, 0.0);
            }
            assert!(m.data[i].re >= 0.0);
        }
        assert!(mollifier(2.0, &g).is_err());
    }

    #[test]
    fn zero_drift_stays_zero() {
        let g = TorusGrid::new(3, 4.0, 8).unwrap();
        for n in [4, 8, 16] {
            let b = MollifiedDrift::new(&DriftSpec::zero(3), n, &g).unwrap();
            assert_eq!(b.lattice.sup_norm(), 0.0);
        }
    }

    #[test]
    fn interpolation_reproduces_sites() {
        let g = TorusGrid::new(3, 4.0, 8).unwrap();
        let b = DriftSpec::bounded_smooth(1.0, 8.0, 3).unwrap().sample(&g).unwrap();
        let mut out = [0.0; 3];
        let idx = 123;
        b.interpolate(&g.point(idx), &mut out);
        for (o, c) in out.iter().zip(&b.components) {
            assert!((o - c.data[idx].re).abs() < 1e-14);
        }
    }
}
