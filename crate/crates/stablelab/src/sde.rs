//! Euler scheme for `dX = −b_n(X)dt + dZ`, Monte Carlo checks against the
//! semigroup and recovery of the driving noise.

use crate::drift::MollifiedDrift;
use crate::error::{param, Error, Result};
use crate::evolution::{propagate, Propagator, PropagatorConfig};
use crate::grid::{Field, TorusGrid};
use crate::report::VerificationReport;
use crate::rng::stream_rng;
use crate::sampler::draw_increment;
use crate::spectral::check_alpha;
use crate::stats::{mean_stderr, pairwise_sum};
use crate::weighted::{bump_probes, WeightSpec};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Path bookkeeping at the recorded times.
///
/// `states` are unwrapped coordinates; [`PathEnsemble::wrapped`] folds them
/// onto the torus.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub n_paths: usize,
    pub dim: usize,
    pub half_length: f64,
    pub x0: Vec<f64>,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub drift_integral: Vec<f64>,
    /// `∫₀^t |b_n(X_s)| ds` at the recorded times.
    pub abs_drift_integral: Vec<f64>,
    pub steps: usize,
    pub wrap_events: u64,
}

impl PathEnsemble {
    fn offset(&self, path: usize, time: usize) -> usize {
        (path * self.times.len() + time) * self.dim
    }

    pub fn state(&self, path: usize, time: usize) -> &[f64] {
        let o = self.offset(path, time);
        &self.states[o..o + self.dim]
    }

    pub fn integral(&self, path: usize, time: usize) -> &[f64] {
        let o = self.offset(path, time);
        &self.drift_integral[o..o + self.dim]
    }

    /// Position folded into `[-L, L)^d`.
    pub fn wrapped(&self, path: usize, time: usize) -> Vec<f64> {
        self.state(path, time).iter().map(|x| fold(*x, self.half_length)).collect()
    }

    /// Recovered noise `X_t − x₀ + ∫₀^t b_n(X_s)ds`.
    pub fn recovered_noise(&self, path: usize, time: usize) -> Vec<f64> {
        let s = self.state(path, time);
        let i = self.integral(path, time);
        (0..self.dim).map(|j| s[j] - self.x0[j] + i[j]).collect()
    }

    /// Fraction of steps that crossed a torus boundary.
    pub fn wrap_rate(&self) -> f64 {
        self.wrap_events as f64 / (self.steps * self.n_paths).max(1) as f64
    }

    /// Runs with more than 1% wrapped steps are flagged.
    pub fn domain_too_small(&self) -> bool {
        self.wrap_rate() > 0.01
    }

    /// Empirical density of the wrapped positions at `time` on `grid`
    /// (nearest-site deposit).
    pub fn density(&self, time: usize, grid: &TorusGrid) -> Field {
        let mut f = Field::zeros(grid);
        let h = grid.h();
        let w = 1.0 / (self.n_paths as f64 * grid.cell_volume());
        for p in 0..self.n_paths {
            let x = self.wrapped(p, time);
            let multi: Vec<usize> =
                x.iter().map(|v| (((v + grid.half_length) / h).round() as i64).rem_euclid(grid.n as i64) as usize).collect();
            f.data[grid.ravel(&multi)] += w;
        }
        f
    }

    /// One binary field per recorded time: `slice_<k>.bin`.
    pub fn write_density_slices(&self, grid: &TorusGrid, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for k in 0..self.times.len() {
            let file = std::fs::File::create(dir.join(format!("slice_{k}.bin")))?;
            self.density(k, grid).write_binary(std::io::BufWriter::new(file))?;
        }
        Ok(())
    }
}

fn fold(x: f64, l: f64) -> f64 {
    (x + l).rem_euclid(2.0 * l) - l
}

fn cell(x: f64, l: f64) -> i64 {
    ((x + l) / (2.0 * l)).floor() as i64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegrateOptions {
    /// Record every `record_every` steps (the final time is always recorded).
    pub record_every: usize,
    /// Diagnostic: drop the noise, leaving the Euler ODE scheme.
    pub frozen_noise: bool,
    /// Noise increments per step, each over `dt/noise_substeps`. Equal
    /// `dt·noise_substeps` across runs couples their noise.
    pub noise_substeps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { record_every: usize::MAX, frozen_noise: false, noise_substeps: 1 }
    }
}

/// Euler scheme `X_{k+1} = X_k − b_n(X_k)dt + ΔZ_k`; path `i` draws from
/// stream `i` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    drift: &MollifiedDrift,
    alpha: f64,
    x0: &[f64],
    t_final: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    opts: &IntegrateOptions,
) -> Result<PathEnsemble> {
    check_alpha(alpha)?;
    let g = *drift.grid();
    let dim = g.dim;
    if x0.len() != dim {
        return param(format!("x0 has {} coordinates, expected {dim}", x0.len()));
    }
    if !(dt > 0.0 && t_final > 0.0) {
        return param("dt and t_final must be positive");
    }
    if n_paths == 0 || opts.noise_substeps == 0 || opts.record_every == 0 {
        return param("n_paths, noise_substeps and record_every must be positive");
    }
    let sup = drift.lattice.sup_norm();
    if dt * sup > g.half_length / 4.0 {
        return param(format!("dt·|b_n| = {:.3e} exceeds one eighth of the torus side", dt * sup));
    }
    let steps = (t_final / dt).round() as usize;
    if steps == 0 || ((steps as f64) * dt - t_final).abs() > 1e-9 * t_final {
        return param(format!("t_final = {t_final} is not a multiple of dt = {dt}"));
    }
    let mut rec: Vec<usize> = (0..=steps).filter(|k| k % opts.record_every == 0).collect();
    if *rec.last().expect("nonempty") != steps {
        rec.push(steps);
    }
    let times: Vec<f64> = rec.iter().map(|&k| k as f64 * dt).collect();
    let nt = times.len();
    let per = nt * dim;
    let mut states = vec![0.0; n_paths * per];
    let mut integ = vec![0.0; n_paths * per];
    let mut abs_integ = vec![0.0; n_paths * nt];
    let l = g.half_length;
    let sub_dt = dt / opts.noise_substeps as f64;
    let wraps: Vec<std::result::Result<u64, usize>> = states
        .par_chunks_mut(per)
        .zip(integ.par_chunks_mut(per))
        .zip(abs_integ.par_chunks_mut(nt))
        .enumerate()
        .map(|(p, ((st, it), ab))| {
            let mut rng = stream_rng(seed, p as u64);
            let mut x = x0.to_vec();
            let mut acc = vec![0.0; dim];
            let mut acc_abs = 0.0;
            let mut b = vec![0.0; dim];
            let mut dz = vec![0.0; dim];
            let mut inc = vec![0.0; dim];
            let mut wraps = 0u64;
            st[..dim].copy_from_slice(&x);
            let mut slot = 1;
            for k in 1..=steps {
                drift.lattice.interpolate(&x, &mut b);
                dz.iter_mut().for_each(|v| *v = 0.0);
                if !opts.frozen_noise {
                    for _ in 0..opts.noise_substeps {
                        draw_increment(alpha, sub_dt, &mut rng, &mut inc);
                        dz.iter_mut().zip(&inc).for_each(|(a, c)| *a += c);
                    }
                }
                let mut crossed = false;
                let mut nb = 0.0;
                for j in 0..dim {
                    let before = cell(x[j], l);
                    x[j] += -b[j] * dt + dz[j];
                    acc[j] += b[j] * dt;
                    nb += b[j] * b[j];
                    crossed |= cell(x[j], l) != before;
                }
                acc_abs += nb.sqrt() * dt;
                if crossed {
                    wraps += 1;
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(p);
                }
                if slot < nt && rec[slot] == k {
                    st[slot * dim..(slot + 1) * dim].copy_from_slice(&x);
                    it[slot * dim..(slot + 1) * dim].copy_from_slice(&acc);
                    ab[slot] = acc_abs;
                    slot += 1;
                }
            }
            Ok(wraps)
        })
        .collect();
    let mut wrap_events = 0;
    for w in wraps {
        match w {
            Ok(c) => wrap_events += c,
            Err(p) => {
                return Err(Error::Numerical {
                    msg: "non-finite path state".into(),
                    diagnostics: format!("path {p}, dt {dt}"),
                })
            }
        }
    }
    Ok(PathEnsemble {
        n_paths,
        dim,
        half_length: l,
        x0: x0.to_vec(),
        times,
        states,
        drift_integral: integ,
        abs_drift_integral: abs_integ,
        steps,
        wrap_events,
    })
}

/// MC estimate `ŵ` of `E[e^{iϰ·(X_t − x₀ + ∫₀^t b_n(X_s)ds)}]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CharFnProbe {
    pub kappa: Vec<f64>,
    pub t: f64,
    pub w_hat: Complex64,
    pub stderr: f64,
}

impl CharFnProbe {
    pub fn target(&self, alpha: f64) -> f64 {
        (-self.t * self.kappa.iter().map(|k| k * k).sum::<f64>().sqrt().powf(alpha)).exp()
    }

    pub fn gap(&self, alpha: f64) -> f64 {
        (self.w_hat - self.target(alpha)).norm()
    }
}

/// Char-function probes of the recovered noise at recorded time `time`.
pub fn identify_driving_noise(ens: &PathEnsemble, kappa_list: &[Vec<f64>], time: usize) -> Result<Vec<CharFnProbe>> {
    if time >= ens.times.len() {
        return param(format!("time slot {time} not recorded"));
    }
    let z: Vec<Vec<f64>> = (0..ens.n_paths).map(|p| ens.recovered_noise(p, time)).collect();
    kappa_list
        .iter()
        .map(|kappa| {
            if kappa.len() != ens.dim {
                return param("dual vector has the wrong dimension");
            }
            let (c, s): (Vec<f64>, Vec<f64>) = z
                .iter()
                .map(|zp| {
                    let ph: f64 = kappa.iter().zip(zp).map(|(a, b)| a * b).sum();
                    (ph.cos(), ph.sin())
                })
                .unzip();
            let n = ens.n_paths as f64;
            let w = Complex64::new(pairwise_sum(&c) / n, pairwise_sum(&s) / n);
            let stderr = ((1.0 - w.norm_sqr()).max(0.0) / n).sqrt();
            Ok(CharFnProbe { kappa: kappa.clone(), t: ens.times[time], w_hat: w, stderr })
        })
        .collect()
}

/// `kappa_0,...,t,re,im,stderr` rows.
pub fn write_probes_csv(probes: &[CharFnProbe], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = probes.first().map_or(0, |p| p.kappa.len());
    let mut head: Vec<String> = (0..dim).map(|j| format!("kappa_{j}")).collect();
    head.extend(["t", "re", "im", "stderr"].map(String::from));
    w.write_record(&head)?;
    for p in probes {
        let mut row: Vec<String> = p.kappa.iter().map(|k| k.to_string()).collect();
        row.extend([p.t.to_string(), p.w_hat.re.to_string(), p.w_hat.im.to_string(), p.stderr.to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Shared options of the Monte Carlo checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McOptions {
    pub alpha: f64,
    pub n_paths: usize,
    /// At least two step sizes; the bias slope comes from the two finest.
    pub dt_list: Vec<f64>,
    pub seed: u64,
}

fn bias_fit(means: &[f64], dts: &[f64]) -> (usize, f64) {
    let mut order: Vec<usize> = (0..dts.len()).collect();
    order.sort_by(|a, b| dts[*a].total_cmp(&dts[*b]));
    let (f, c) = (order[0], order[1]);
    (f, ((means[c] - means[f]) / (dts[c] - dts[f])).abs())
}

fn check_dts(opts: &McOptions) -> Result<()> {
    if opts.dt_list.len() < 2 {
        return param("at least two dt levels are needed for the bias fit");
    }
    Ok(())
}

/// `|ŵ − e^{−t|ϰ|^α}| ≤ 3·stderr + C_bias·dt` at the finest level, with
/// `C_bias` the slope between the two finest levels.
pub fn noise_identification_check(
    drift: &MollifiedDrift,
    x0: &[f64],
    t: f64,
    kappa_list: &[Vec<f64>],
    opts: &McOptions,
) -> Result<(VerificationReport, Vec<CharFnProbe>)> {
    check_dts(opts)?;
    let mut rep = VerificationReport::new("noise_identification", "driving noise of the SDE is symmetric α-stable");
    rep.input("t", t).input("n_paths", opts.n_paths).input("dt_list", &opts.dt_list).input("n", drift.n);
    rep.provenance("seed", opts.seed);
    let mut per_level = Vec::new();
    let mut valid = true;
    for (i, &dt) in opts.dt_list.iter().enumerate() {
        let ens = integrate(drift, opts.alpha, x0, t, dt, opts.n_paths, opts.seed.wrapping_add(i as u64), &IntegrateOptions::default())?;
        rep.metric(&format!("wrap_rate[dt={dt}]"), ens.wrap_rate());
        valid &= !ens.domain_too_small();
        per_level.push(identify_driving_noise(&ens, kappa_list, ens.times.len() - 1)?);
    }
    rep.check_true("wrap_rate_below_1pct", valid);
    let mut finest = Vec::new();
    for (k, kappa) in kappa_list.iter().enumerate() {
        let gaps: Vec<f64> = per_level.iter().map(|l| l[k].gap(opts.alpha)).collect();
        let (f, c) = bias_fit(&gaps, &opts.dt_list);
        let probe = per_level[f][k].clone();
        let band = 3.0 * probe.stderr + c * opts.dt_list[f];
        let tag = format!("{kappa:?}");
        rep.metric(&format!("w_hat.re[{tag}]"), probe.w_hat.re);
        rep.metric(&format!("w_hat.im[{tag}]"), probe.w_hat.im);
        rep.metric(&format!("target[{tag}]"), probe.target(opts.alpha));
        rep.metric(&format!("stderr[{tag}]"), probe.stderr);
        rep.metric(&format!("bias_slope[{tag}]"), c);
        rep.check_le(&format!("charfn_gap[{tag}]"), probe.gap(opts.alpha), band);
        finest.push(probe);
    }
    Ok((rep, finest))
}

/// `E_x f(X_t)` by Monte Carlo against `(e^{−tΛ(b_n)}f)(x₀)` from the
/// propagator. `f` is evaluated exactly on paths and sampled on the lattice
/// for the semigroup; `x₀` must be a lattice site.
pub fn mc_vs_semigroup(
    drift: &MollifiedDrift,
    x0_index: usize,
    t: f64,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    semigroup_steps: usize,
    opts: &McOptions,
) -> Result<VerificationReport> {
    check_dts(opts)?;
    let g = *drift.grid();
    if x0_index >= g.len() {
        return param("x0 index out of range");
    }
    let x0 = g.point(x0_index);
    let field = g.sample(f);
    let cfg = PropagatorConfig::new(drift.clone(), opts.alpha, t, semigroup_steps);
    let sg = propagate(&cfg, &field)?.data[x0_index].re;
    let mut rep = VerificationReport::new("mc_vs_semigroup", "path measure reproduces the Feller semigroup");
    rep.input("t", t).input("x0", &x0).input("n_paths", opts.n_paths).input("dt_list", &opts.dt_list).input("n", drift.n);
    rep.provenance("seed", opts.seed);
    rep.metric("semigroup", sg);
    let mut means = Vec::new();
    let mut errs = Vec::new();
    let mut abs_b = Vec::new();
    for (i, &dt) in opts.dt_list.iter().enumerate() {
        let ens = integrate(drift, opts.alpha, &x0, t, dt, opts.n_paths, opts.seed.wrapping_add(i as u64), &IntegrateOptions::default())?;
        let last = ens.times.len() - 1;
        let vals: Vec<f64> = (0..ens.n_paths).map(|p| f(&ens.wrapped(p, last))).collect();
        let (m, se) = mean_stderr(&vals);
        let ab: Vec<f64> = (0..ens.n_paths).map(|p| ens.abs_drift_integral[p * ens.times.len() + last]).collect();
        let (am, _) = mean_stderr(&ab);
        rep.metric(&format!("mc_mean[dt={dt}]"), m);
        rep.metric(&format!("mc_stderr[dt={dt}]"), se);
        rep.metric(&format!("abs_drift_integral[dt={dt}]"), am);
        means.push(m);
        errs.push(se);
        abs_b.push(am);
    }
    let (fi, c) = bias_fit(&means, &opts.dt_list);
    rep.metric("bias_slope", c);
    rep.metric("abs_drift_integral", abs_b[fi]);
    rep.check_le("mc_gap", (means[fi] - sg).abs(), 3.0 * errs[fi] + c * opts.dt_list[fi] + 1e-12);
    rep.check_true("abs_drift_integral_finite", abs_b.iter().all(|v| v.is_finite()));
    Ok(rep)
}

/// Mean `∫₀^t |b_n(X_s)| ds` across drift levels, asserted within `rel_tol`.
pub fn drift_integral_stability(
    levels: &[MollifiedDrift],
    x0: &[f64],
    t: f64,
    dt: f64,
    opts: &McOptions,
    rel_tol: f64,
) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new("drift_integral_stability", "integrability of |b| along paths");
    rep.input("t", t).input("dt", dt).input("n_paths", opts.n_paths);
    let mut vals = Vec::new();
    for d in levels {
        let ens = integrate(d, opts.alpha, x0, t, dt, opts.n_paths, opts.seed, &IntegrateOptions::default())?;
        let last = ens.times.len() - 1;
        let ab: Vec<f64> = (0..ens.n_paths).map(|p| ens.abs_drift_integral[p * ens.times.len() + last]).collect();
        let (m, _) = mean_stderr(&ab);
        rep.metric(&format!("abs_drift_integral[n={}]", d.n), m);
        vals.push(m);
    }
    let hi = vals.iter().copied().fold(f64::MIN, f64::max);
    let lo = vals.iter().copied().fold(f64::MAX, f64::min);
    rep.check_true("finite", vals.iter().all(|v| v.is_finite()));
    if hi > 0.0 {
        rep.check_le("relative_spread", (hi - lo) / hi, rel_tol);
    }
    Ok(rep)
}

/// Options for [`contraction_probe_h`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionOptions {
    pub alpha: f64,
    pub p: f64,
    pub kappa: Vec<f64>,
    /// Increasing horizons; the check wants the ratio below 1 at the first.
    pub t_list: Vec<f64>,
    pub time_steps: usize,
    pub probes: usize,
    pub seed: u64,
}

fn h_norm(v: &[Field], bmag: &[f64], eta: &[f64], p: f64, cell: f64) -> f64 {
    let n = bmag.len();
    let mut s = 0.0;
    for x in 0..n {
        let sup = v.iter().map(|f| f.data[x].norm()).fold(0.0, f64::max);
        s += sup.powf(p) * bmag[x] * eta[x].powf(2.0 - p);
    }
    (s * cell).powf(1.0 / p)
}

/// Empirical Lipschitz ratio of
/// `(Hv)(t) = −i∫₀^t e^{−(t−s)Λ(b_n)}((ϰ·b_n)v(s)) ds` in
/// `L^p(|b_n|η^{2−p}; L^∞[0,T])`, for each horizon `T`.
pub fn contraction_probe_h(
    drift: &MollifiedDrift,
    weight: &WeightSpec,
    opts: &ContractionOptions,
) -> Result<VerificationReport> {
    let g = *drift.grid();
    if opts.kappa.len() != g.dim {
        return param("dual vector has the wrong dimension");
    }
    if opts.t_list.is_empty() || opts.t_list.windows(2).any(|w| w[1] <= w[0]) || opts.t_list[0] <= 0.0 {
        return param("t_list must be positive and strictly increasing");
    }
    if opts.time_steps == 0 || opts.probes == 0 {
        return param("time_steps and probes must be positive");
    }
    let mut rep = VerificationReport::new("contraction_probe_h", "fixed-point map in the noise identification is a contraction for small times");
    rep.input("kappa", &opts.kappa).input("t_list", &opts.t_list).input("p", opts.p).input("nu", weight.nu);
    rep.provenance("seed", opts.seed);
    let bmag = drift.lattice.magnitude().re();
    let eta = weight.field().re();
    let kb: Vec<f64> = (0..g.len())
        .map(|i| drift.lattice.components.iter().zip(&opts.kappa).map(|(c, k)| c.data[i].re * k).sum())
        .collect();
    let kb = Field::from_real(&g, kb)?;
    let bumps = bump_probes(&g, 2 * opts.probes, opts.seed);
    let mut rng = stream_rng(opts.seed, 7);
    let m = opts.time_steps;
    let profiles: Vec<Vec<Complex64>> = (0..2 * opts.probes)
        .map(|_| {
            (0..=m)
                .map(|_| {
                    use rand::Rng;
                    let r: f64 = rng.random();
                    let th: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                    Complex64::from_polar(r, th)
                })
                .collect()
        })
        .collect();
    let mut ratios = Vec::new();
    for &t in &opts.t_list {
        let cfg = PropagatorConfig::new(drift.clone(), opts.alpha, t, m);
        let prop = Propagator::new(&cfg)?;
        let dt = prop.dt();
        let mut worst = 0.0f64;
        for k in 0..opts.probes {
            let (a, b) = (2 * k, 2 * k + 1);
            let v: Vec<Field> = (0..=m)
                .map(|j| {
                    let va = bumps[a].data.iter().map(|x| x * profiles[a][j]);
                    let vb = bumps[b].data.iter().map(|x| x * profiles[b][j]);
                    Field { grid: g, data: va.zip(vb).map(|(x, y)| x - y).collect(), real: false }
                })
                .collect();
            let denom = h_norm(&v, &bmag, &eta, opts.p, g.cell_volume());
            if denom == 0.0 {
                continue;
            }
            let gs: Vec<Vec<Complex64>> = v.iter().map(|f| kb.mul(f).data).collect();
            let mut fsum = gs[0].clone();
            let mut first = gs[0].clone();
            let mut out = vec![Field::zeros(&g)];
            for gj in gs.iter().skip(1) {
                prop.step(&mut fsum);
                prop.step(&mut first);
                fsum.iter_mut().zip(gj).for_each(|(s, x)| *s += x);
                let data: Vec<Complex64> = fsum
                    .iter()
                    .zip(&first)
                    .zip(gj)
                    .map(|((s, e), x)| Complex64::new(0.0, -dt) * (s - 0.5 * e - 0.5 * x))
                    .collect();
                out.push(Field { grid: g, data, real: false });
            }
            worst = worst.max(h_norm(&out, &bmag, &eta, opts.p, g.cell_volume()) / denom);
        }
        rep.metric(&format!("ratio[T={t}]"), worst);
        ratios.push(worst);
    }
    rep.check_lt("ratio_at_smallest_T", ratios[0], 1.0);
    rep.check_increasing("ratio_in_T", &ratios);
    Ok(rep)
}

/// Pure-noise diagnostic: lag-one sample correlation of `|ΔZ|` over the
/// recorded slices and its standard error `1/√n`.
pub fn increment_correlation(ens: &PathEnsemble) -> Result<(f64, f64)> {
    let nt = ens.times.len();
    if nt < 3 {
        return param("need at least three recorded times");
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for p in 0..ens.n_paths {
        let z: Vec<Vec<f64>> = (0..nt).map(|k| ens.recovered_noise(p, k)).collect();
        for k in 1..nt - 1 {
            let d1: f64 = z[k].iter().zip(&z[k - 1]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let d2: f64 = z[k + 1].iter().zip(&z[k]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            a.push(d1.ln());
            b.push(d2.ln());
        }
    }
    let n = a.len() as f64;
    let (ma, _) = mean_stderr(&a);
    let (mb, _) = mean_stderr(&b);
    let cov = pairwise_sum(&a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).collect::<Vec<_>>()) / n;
    let va = pairwise_sum(&a.iter().map(|x| (x - ma) * (x - ma)).collect::<Vec<_>>()) / n;
    let vb = pairwise_sum(&b.iter().map(|y| (y - mb) * (y - mb)).collect::<Vec<_>>()) / n;
    Ok((cov / (va * vb).sqrt(), 1.0 / n.sqrt()))
}
