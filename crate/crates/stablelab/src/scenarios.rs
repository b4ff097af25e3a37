//! Scenario pipelines and the report bundle they write.

use crate::config::{AdmissibilityReport, ExperimentConfig, Scenario};
use crate::drift::{DriftKind, MollifiedDrift};
use crate::error::{Error, Result};
use crate::evolution::{
    conservativeness_baseline, conservativeness_check, cutoff_masses, duhamel_residual, feller_convergence_check,
    propagate, write_slice_csv, write_time_series_csv, FellerOptions, PropagatorConfig,
};
use crate::formbound::{estimate_kato_norm, refine_weak_formbound, FormBoundOptions, ZeroMode};
use crate::grid::{Field, TorusGrid};
use crate::kernel::fit_kernel_bounds;
use crate::report::{Verdict, VerificationReport};
use crate::resolvent::{verify_lp_inequalities, verify_resolvent_identities, ThetaPParams};
use crate::rng::derive_seed;
use crate::sampler::{empirical_char_fn, sample_increments, sample_subordinator, StableParams};
use crate::sde::{
    contraction_probe_h, drift_integral_stability, mc_vs_semigroup, noise_identification_check, write_probes_csv,
    CharFnProbe, ContractionOptions, McOptions,
};
use crate::spectral::{balakrishnan_power, resolvent_power};
use crate::stats::mean_stderr;
use crate::weighted::{verify_eta_b_integrability, verify_weighted_estimates, verify_weighted_markov, WeightSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Version tag of `summary.json`; see `schemas/summary.schema.json`.
pub const SUMMARY_SCHEMA: &str = "stablelab.summary/1";

/// JSON schema of `summary.json`.
pub const SUMMARY_SCHEMA_JSON: &str = include_str!("../schemas/summary.schema.json");

/// Plot data produced by a step and written after the run.
#[derive(Clone)]
pub enum Export {
    /// Line through `center` along axis 0.
    Slice { file: String, field: Field, center: usize },
    /// The whole field in the binary layout.
    Binary { file: String, field: Field },
    Series { file: String, column: String, times: Vec<f64>, values: Vec<f64> },
    Probes { file: String, probes: Vec<CharFnProbe> },
}

impl Export {
    fn file(&self) -> &str {
        match self {
            Export::Slice { file, .. } | Export::Binary { file, .. } | Export::Series { file, .. } | Export::Probes { file, .. } => file,
        }
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(self.file());
        match self {
            Export::Slice { field, center, .. } => write_slice_csv(field, *center, 0, &path),
            Export::Binary { field, .. } => field.write_binary(std::io::BufWriter::new(std::fs::File::create(path)?)),
            Export::Series { column, times, values, .. } => write_time_series_csv(times, values, column, &path),
            Export::Probes { probes, .. } => write_probes_csv(probes, &path),
        }
    }
}

#[derive(Default)]
struct StepOutput {
    reports: Vec<VerificationReport>,
    exports: Vec<Export>,
}

impl StepOutput {
    fn one(r: VerificationReport) -> Self {
        Self { reports: vec![r], exports: Vec::new() }
    }
}

type Step<'a> = Box<dyn Fn() -> Result<StepOutput> + Send + Sync + 'a>;

/// One line of `summary.json` per report.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ReportEntry {
    pub name: String,
    pub anchor: String,
    pub verdict: Verdict,
    pub file: String,
    pub checks: usize,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub scenario: Scenario,
    pub anchor: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub admissibility: AdmissibilityReport,
    pub reports: Vec<ReportEntry>,
    pub exports: Vec<String>,
    pub verdict: Verdict,
}

/// Everything a run produced.
pub struct RunOutcome {
    pub summary: Summary,
    pub reports: Vec<VerificationReport>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.summary.verdict != Verdict::Fail
    }

    pub fn report(&self, name: &str) -> Option<&VerificationReport> {
        self.reports.iter().find(|r| r.name == name)
    }
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect()
}

fn gaussian(grid: &TorusGrid, width: f64) -> Field {
    grid.sample(|x| (-x.iter().map(|v| v * v).sum::<f64>() / width).exp())
}

fn kappa_probes(dim: usize, norms: &[f64]) -> Vec<Vec<f64>> {
    norms
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let mut k = vec![0.0; dim];
            if i % (dim + 1) == dim {
                k.iter_mut().for_each(|v| *v = r / (dim as f64).sqrt());
            } else {
                k[i % (dim + 1)] = r;
            }
            k
        })
        .collect()
}

fn mc_options(cfg: &ExperimentConfig, label: u64) -> McOptions {
    McOptions { alpha: cfg.model.alpha, n_paths: cfg.n_paths(), dt_list: cfg.mc.dt.clone(), seed: derive_seed(cfg.seed, label) }
}

fn level(cfg: &ExperimentConfig, i: usize) -> u32 {
    cfg.ladder.n_levels[i.min(cfg.ladder.n_levels.len() - 1)]
}

fn sampler_steps(cfg: &ExperimentConfig) -> Vec<Step<'_>> {
    let m = &cfg.model;
    vec![
        Box::new(move || {
            let mut rep = VerificationReport::new("sampler_char_fn", Scenario::SamplerCheck.anchor());
            let n = cfg.n_paths();
            rep.input("n_samples", n).input("alpha", m.alpha).input("dim", m.dim);
            rep.provenance("seed", derive_seed(cfg.seed, 1));
            let batch = sample_increments(&StableParams::new(m.alpha, m.dim, derive_seed(cfg.seed, 1))?, 1.0, n)?;
            let mut probes = Vec::new();
            for kappa in kappa_probes(m.dim, &[0.5, 1.0, 2.0, 3.0]) {
                let (re, im, se_re, se_im) = empirical_char_fn(&batch, &kappa);
                let r = kappa.iter().map(|v| v * v).sum::<f64>().sqrt();
                let target = (-r.powf(m.alpha)).exp();
                let se = se_re.hypot(se_im);
                let gap = (re - target).hypot(im);
                rep.metric(&format!("char_fn[|k|={r}].re"), re).metric(&format!("char_fn[|k|={r}].im"), im);
                rep.check_le(&format!("char_fn_gap[|k|={r}]"), gap, 3.0 * se);
                probes.push(CharFnProbe { kappa, t: 1.0, w_hat: num_complex::Complex64::new(re, im), stderr: se });
            }
            Ok(StepOutput { reports: vec![rep], exports: vec![Export::Probes { file: "sampler_char_fn.csv".into(), probes }] })
        }),
        Box::new(move || {
            let mut rep = VerificationReport::new("subordinator_laplace", "Laplace transform exp(-u^(alpha/2)) of the stable clock");
            let n = cfg.n_paths();
            let a = m.alpha / 2.0;
            rep.input("n_samples", n).provenance("seed", derive_seed(cfg.seed, 2));
            let s = sample_subordinator(a, 1.0, n, derive_seed(cfg.seed, 2))?;
            for u in [0.5, 1.0, 2.0] {
                let v: Vec<f64> = s.iter().map(|x| (-u * x).exp()).collect();
                let (mean, se) = mean_stderr(&v);
                rep.metric(&format!("laplace[u={u}]"), mean);
                rep.check_le(&format!("laplace_gap[u={u}]"), (mean - (-u.powf(a)).exp()).abs(), 3.0 * se);
            }
            Ok(StepOutput::one(rep))
        }),
    ]
}

fn formbound_steps(cfg: &ExperimentConfig) -> Vec<Step<'_>> {
    let m = &cfg.model;
    vec![
        Box::new(move || {
            let mut rep = VerificationReport::new("kernel_bounds", "two-sided heat kernel bounds and the gradient bound");
            let ts: Vec<f64> = (0..20).map(|i| 10f64.powf(-2.0 + 3.0 * i as f64 / 19.0)).collect();
            let rs: Vec<f64> = (0..20).map(|i| 10f64.powf(-2.0 + 3.5 * i as f64 / 19.0)).collect();
            rep.input("t_range", (ts[0], ts[19])).input("r_range", (rs[0], rs[19]));
            let fit = fit_kernel_bounds(m.alpha, m.dim, &ts, &rs)?;
            rep.metric("c_lower", fit.c_lower).metric("k_gradient", fit.k_gradient).metric("c_upper", fit.c_upper);
            rep.metric("points", fit.points.len());
            rep.check_le("lower_violations", fit.lower_violations as f64, 0.0);
            rep.check_le("gradient_violations", fit.gradient_violations as f64, 0.0);
            rep.check_true("constants_positive", fit.c_lower > 0.0 && fit.k_gradient.is_finite());
            Ok(StepOutput::one(rep))
        }),
        Box::new(move || {
            let mut rep = VerificationReport::new("hardy_formbound", "weak form-bound of the drift and its Kato-class norm");
            let spec = cfg.drift_spec()?;
            let fine = cfg.fine_grid()?;
            let grids: Vec<TorusGrid> = [fine.n / 4, fine.n / 2, fine.n]
                .iter()
                .map(|&n| TorusGrid::new(m.dim, cfg.grid.half_length, n))
                .collect::<Result<_>>()?;
            let opts = FormBoundOptions { zero_mode: ZeroMode::Exclude, ..Default::default() };
            rep.input("grids", grids.iter().map(|g| g.n).collect::<Vec<_>>());
            rep.input("lambdas", &cfg.ladder.formbound_lambda).input("target_delta", m.delta);
            let est = refine_weak_formbound(&spec, m.alpha, &grids, &cfg.ladder.formbound_lambda, &opts)?;
            let deltas: Vec<f64> = est.grid_levels.iter().map(|(_, d)| *d).collect();
            rep.metric("delta_per_grid", &deltas).metric("ladder", &est.ladder);
            let mut kato = Vec::new();
            for g in &grids {
                kato.push(estimate_kato_norm(&spec.sample(g)?.magnitude(), m.alpha, m.lambda)?);
            }
            rep.metric("kato_per_grid", &kato);
            if spec.kind == DriftKind::Hardy {
                let errs: Vec<f64> = deltas.iter().map(|d| (d - m.delta).abs() / m.delta).collect();
                rep.metric("relative_error_per_grid", &errs);
                rep.check_le("relative_error_finest", *errs.last().expect("grids"), 0.15);
                rep.check_decreasing("relative_error", &errs[errs.len() - 2..]);
                rep.check_increasing("kato_norm", &kato);
            }
            let series = Export::Series {
                file: "formbound_levels.csv".into(),
                column: "delta".into(),
                times: grids.iter().map(|g| g.n as f64).collect(),
                values: deltas,
            };
            Ok(StepOutput { reports: vec![rep], exports: vec![series] })
        }),
    ]
}

fn resolvent_steps(cfg: &ExperimentConfig) -> Vec<Step<'_>> {
    let m = &cfg.model;
    let rp = &cfg.resolvent;
    let mut steps: Vec<Step<'_>> = vec![
        Box::new(move || {
            let g = cfg.grid()?;
            let mut rep = VerificationReport::new("balakrishnan", "Balakrishnan integral for fractional resolvent powers");
            let f = Field::random_normal(&g, derive_seed(cfg.seed, 3));
            for tau in [0.25, 0.5, 0.75] {
                for mu in [1.0, 10.0] {
                    let spec = resolvent_power(&g, m.alpha, mu, tau)?.apply(&f)?;
                    let quad = balakrishnan_power(&g, m.alpha, mu, tau, 16)?.apply(&f)?;
                    rep.check_le(&format!("rel_l2[tau={tau},mu={mu}]"), quad.rel_diff(&spec), 1e-6);
                }
            }
            Ok(StepOutput::one(rep))
        }),
        Box::new(move || {
            let g = cfg.grid()?;
            let b = cfg.smooth_spec()?.sample(&g)?;
            let f = Field::random_normal(&g, derive_seed(cfg.seed, 4));
            let params = ThetaPParams { mu: rp.mu, p: m.p, q: m.q, r: m.r };
            Ok(StepOutput::one(verify_resolvent_identities(&b, m.alpha, params, rp.mu2, &f, 4, derive_seed(cfg.seed, 5))?))
        }),
    ];
    for (i, &p) in rp.lp_p.iter().enumerate() {
        steps.push(Box::new(move || {
            let g = cfg.grid()?;
            let v = MollifiedDrift::new(&cfg.drift_spec()?, level(cfg, 1), &g)?.lattice.magnitude();
            let mut rep = verify_lp_inequalities(&v, m.alpha, p, m.lambda, m.lambda, rp.probes, derive_seed(cfg.seed, 6 + i as u64))?;
            rep.name = format!("lp_inequalities[p={p}]");
            if p > 2.0 {
                let fails = rep.metrics["reciprocal_candidate_fails"].as_bool().unwrap_or(false);
                rep.check_true("reciprocal_candidate_rejected", fails);
            }
            Ok(StepOutput::one(rep))
        }));
    }
    steps
}

fn weighted_steps(cfg: &ExperimentConfig) -> Vec<Step<'_>> {
    let m = &cfg.model;
    vec![
        Box::new(move || {
            let g = cfg.grid()?;
            Ok(StepOutput::one(verify_weighted_markov(m.nu, m.alpha, &[0.5, 1.0, 2.0], &[1.0, 2.0, 4.0], &g, derive_seed(cfg.seed, 8))?))
        }),
        Box::new(move || {
            let fine = cfg.fine_grid()?;
            let spec = cfg.drift_spec()?;
            let b_ref = MollifiedDrift::new(&spec, fine.n as u32, &fine)?.lattice;
            let levels = cfg.ladder.n_levels[..2]
                .iter()
                .map(|&n| Ok((n, MollifiedDrift::new(&spec, n, &fine)?.lattice)))
                .collect::<Result<Vec<_>>>()?;
            let w = WeightSpec::new(m.nu, m.alpha, None, &fine)?;
            let rep = verify_weighted_estimates(&b_ref, &levels, &w, m.alpha, m.p, &cfg.ladder.mu, 20, derive_seed(cfg.seed, 9))?;
            Ok(StepOutput::one(rep))
        }),
        Box::new(move || {
            let spec = cfg.drift_spec()?;
            let samples = [cfg.grid()?, cfg.fine_grid()?].iter().map(|g| spec.sample(g)).collect::<Result<Vec<_>>>()?;
            Ok(StepOutput::one(verify_eta_b_integrability(&samples, m.nu, m.alpha, m.p, 0.1)?))
        }),
    ]
}

fn evolution_steps(cfg: &ExperimentConfig) -> Vec<Step<'_>> {
    let m = &cfg.model;
    let l = cfg.grid.half_length;
    let k_list = [l / 4.0, l / 2.0, 3.0 * l / 4.0];
    vec![
        Box::new(move || {
            let g = cfg.grid()?;
            let s = cfg.smooth_spec()?;
            let b = MollifiedDrift::from_lattice(&s, s.sample(&g)?);
            let f = g.sample(|x| {
                (-x.iter().map(|v| v * v).sum::<f64>() / 4.0).exp() + 0.3 * (std::f64::consts::PI * x[1] / l).sin()
            });
            let t = 0.5;
            let mut rep = VerificationReport::new("duhamel", "Duhamel formula for the perturbed semigroup, bounded drift");
            rep.input("t", t).input("smooth_amplitude", cfg.drift.smooth_amplitude);
            let mut res = Vec::new();
            for steps in [16, 32, 64] {
                let r = duhamel_residual(&PropagatorConfig::new(b.clone(), m.alpha, t, steps), &f)?;
                rep.metric(&format!("residual[steps={steps}]"), r);
                res.push(r);
            }
            rep.check_le("residual_coarsest", res[0], 1e-3);
            rep.check_decreasing("residual", &res);
            Ok(StepOutput::one(rep))
        }),
        Box::new(move || {
            let g = cfg.grid()?;
            let spec = cfg.drift_spec()?;
            let (t, steps) = (0.01, 4);
            let mut rep = VerificationReport::new("conservativeness", "conservativeness via compactly supported cutoffs");
            rep.input("t", t).input("steps", steps).input("k_list", k_list);
            let mut exports = Vec::new();
            for &n in &cfg.ladder.n_levels[..2] {
                let pc = PropagatorConfig::new(MollifiedDrift::new(&spec, n, &g)?, m.alpha, t, steps);
                rep.merge(&format!("n={n}"), &conservativeness_check(&pc, g.origin_index(), &k_list)?);
                exports.push(Export::Series {
                    file: format!("cutoff_mass_n{n}.csv"),
                    column: "mass".into(),
                    times: k_list.to_vec(),
                    values: cutoff_masses(&pc, g.origin_index(), &k_list)?,
                });
            }
            Ok(StepOutput { reports: vec![rep], exports })
        }),
        Box::new(move || {
            let fine = cfg.fine_grid()?;
            Ok(StepOutput::one(conservativeness_baseline(&fine, m.alpha, 0.01, 4, &k_list)?))
        }),
        Box::new(move || {
            let fine = cfg.fine_grid()?;
            let spec = cfg.drift_spec()?;
            let f = gaussian(&fine, 4.0);
            let t = 0.25;
            let opts = FellerOptions { alpha: m.alpha, steps: 8, mu_list: cfg.ladder.mu.clone() };
            let rep = feller_convergence_check(&spec, &cfg.ladder.n_levels, t, &f, &opts)?;
            let top = MollifiedDrift::new(&spec, *cfg.ladder.n_levels.last().expect("levels"), &fine)?;
            let u = propagate(&PropagatorConfig::new(top, m.alpha, t, 8), &f)?;
            let exports = vec![
                Export::Slice { file: "semigroup_slice.csv".into(), field: u.clone(), center: fine.origin_index() },
                Export::Binary { file: "semigroup.bin".into(), field: u },
            ];
            Ok(StepOutput { reports: vec![rep], exports })
        }),
    ]
}

fn sde_steps(cfg: &ExperimentConfig) -> Vec<Step<'_>> {
    let m = &cfg.model;
    let x0 = vec![0.0; m.dim];
    vec![
        Box::new({
            let x0 = x0.clone();
            move || {
                let g = cfg.grid()?;
                let b = MollifiedDrift::new(&cfg.drift_spec()?, level(cfg, 1), &g)?;
                let kl = kappa_probes(m.dim, &cfg.mc.kappa);
                let (rep, probes) = noise_identification_check(&b, &x0, cfg.mc.t, &kl, &mc_options(cfg, 10))?;
                Ok(StepOutput { reports: vec![rep], exports: vec![Export::Probes { file: "noise_probes.csv".into(), probes }] })
            }
        }),
        Box::new(move || {
            let g = cfg.grid()?;
            let b = MollifiedDrift::new(&cfg.drift_spec()?, level(cfg, 1), &g)?;
            let f = |x: &[f64]| (-x.iter().map(|v| v * v).sum::<f64>() / 4.0).exp();
            Ok(StepOutput::one(mc_vs_semigroup(&b, g.origin_index(), cfg.mc.t / 2.0, &f, 8, &mc_options(cfg, 11))?))
        }),
        Box::new({
            let x0 = x0.clone();
            move || {
                let g = cfg.grid()?;
                let spec = cfg.drift_spec()?;
                let levels = cfg.ladder.n_levels[..2].iter().map(|&n| MollifiedDrift::new(&spec, n, &g)).collect::<Result<Vec<_>>>()?;
                let dt = cfg.mc.dt.iter().copied().fold(f64::INFINITY, f64::min);
                let opts = mc_options(cfg, 12);
                Ok(StepOutput::one(drift_integral_stability(&levels, &x0, cfg.mc.t / 2.0, dt, &opts, 0.2)?))
            }
        }),
        Box::new(move || {
            let g = cfg.grid()?;
            let b = MollifiedDrift::new(&cfg.drift_spec()?, level(cfg, 1), &g)?;
            let w = WeightSpec::new(m.nu, m.alpha, None, &g)?;
            let mut kappa = vec![0.0; m.dim];
            kappa[0] = 1.0;
            let co = ContractionOptions {
                alpha: m.alpha,
                p: m.p,
                kappa,
                t_list: vec![0.05, 0.1],
                time_steps: 10,
                probes: 5,
                seed: derive_seed(cfg.seed, 13),
            };
            Ok(StepOutput::one(contraction_probe_h(&b, &w, &co)?))
        }),
    ]
}

fn steps_for(cfg: &ExperimentConfig, s: Scenario) -> Vec<Step<'_>> {
    match s {
        Scenario::SamplerCheck => sampler_steps(cfg),
        Scenario::FormboundAudit => formbound_steps(cfg),
        Scenario::ResolventVerify => resolvent_steps(cfg),
        Scenario::WeightedVerify => weighted_steps(cfg),
        Scenario::EvolutionVerify => evolution_steps(cfg),
        Scenario::SdeIdentify => sde_steps(cfg),
        Scenario::FullSuite => Scenario::ALL[..6].iter().flat_map(|&s| steps_for(cfg, s)).collect(),
    }
}

/// Validates `cfg`, runs its scenario and, when `out_dir` is given, writes
/// `summary.json`, one JSON file per report and the plot data there.
pub fn run_scenario(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let admissibility = cfg.validate()?;
    let outputs: Vec<StepOutput> = steps_for(cfg, cfg.scenario).par_iter().map(|s| s()).collect::<Result<_>>()?;
    let mut reports = Vec::new();
    let mut exports = Vec::new();
    for o in outputs {
        reports.extend(o.reports);
        exports.extend(o.exports);
    }
    let entries: Vec<ReportEntry> = reports
        .iter()
        .map(|r| ReportEntry {
            name: r.name.clone(),
            anchor: r.anchor.clone(),
            verdict: r.verdict,
            file: format!("{}.json", file_stem(&r.name)),
            checks: r.checks.len(),
            failures: r.failures.clone(),
        })
        .collect();
    let verdict = if reports.iter().any(|r| !r.passed()) { Verdict::Fail } else { Verdict::Pass };
    let summary = Summary {
        schema: SUMMARY_SCHEMA.into(),
        scenario: cfg.scenario,
        anchor: cfg.scenario.anchor().into(),
        seed: cfg.seed,
        config: cfg.clone(),
        admissibility,
        reports: entries,
        exports: exports.iter().map(|e| e.file().to_string()).collect(),
        verdict,
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        for (r, e) in reports.iter().zip(&summary.reports) {
            r.write_json(&dir.join(&e.file))?;
        }
        for e in &exports {
            e.write(dir)?;
        }
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    }
    Ok(RunOutcome { summary, reports })
}

/// `name<TAB>anchor` lines in name order.
pub fn list_scenarios() -> String {
    let mut all = Scenario::ALL.to_vec();
    all.sort_by_key(|s| s.name());
    all.iter().map(|s| format!("{}\t{}\n", s.name(), s.anchor())).collect()
}

/// Process exit status for a run result: 0 pass, 1 failed check or runtime
/// failure, 2 unusable configuration, 3 violated hypothesis.
pub fn exit_code(result: &Result<RunOutcome>) -> i32 {
    match result {
        Ok(o) if o.passed() => 0,
        Ok(_) => 1,
        Err(Error::Admissibility { .. }) => 3,
        Err(Error::Config(_) | Error::Parameter(_) | Error::Json(_)) => 2,
        Err(_) => 1,
    }
}
