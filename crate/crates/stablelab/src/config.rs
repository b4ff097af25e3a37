//! Experiment configuration: sectioned `key = value` text or JSON.
//!
//! ```text
//! # comment
//! scenario = evolution_verify
//! seed = 7
//!
//! [model]
//! delta = 0.05
//! p = 5
//!
//! [ladder]
//! mu = 100, 1000, 10000
//! ```
//!
//! Values parse as numbers, booleans or comma-separated number lists and
//! otherwise stay strings. Sections map to the nested tables below; unknown
//! keys are errors.

use crate::drift::{DriftKind, DriftSpec};
use crate::error::{Error, Result};
use crate::formbound::{check_admissibility, Admissibility};
use crate::grid::TorusGrid;
use crate::kernel::{estimate_m_dalpha, MSampleSpec};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::fmt;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    SamplerCheck,
    FormboundAudit,
    ResolventVerify,
    WeightedVerify,
    EvolutionVerify,
    SdeIdentify,
    FullSuite,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::SamplerCheck,
        Scenario::FormboundAudit,
        Scenario::ResolventVerify,
        Scenario::WeightedVerify,
        Scenario::EvolutionVerify,
        Scenario::SdeIdentify,
        Scenario::FullSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SamplerCheck => "sampler_check",
            Scenario::FormboundAudit => "formbound_audit",
            Scenario::ResolventVerify => "resolvent_verify",
            Scenario::WeightedVerify => "weighted_verify",
            Scenario::EvolutionVerify => "evolution_verify",
            Scenario::SdeIdentify => "sde_identify",
            Scenario::FullSuite => "full_suite",
        }
    }

    /// What the scenario checks, in terms of the underlying theory.
    pub fn anchor(self) -> &'static str {
        match self {
            Scenario::SamplerCheck => "characteristic function exp(-t|k|^alpha) of the symmetric stable process",
            Scenario::FormboundAudit => "heat kernel bounds, weak form-bound of the Hardy drift, Kato-class non-membership",
            Scenario::ResolventVerify => "Balakrishnan formula, Neumann-series resolvents, L^p inequalities for Markov generators",
            Scenario::WeightedVerify => "weighted Markov generator and the weighted resolvent estimates",
            Scenario::EvolutionVerify => "Feller semigroup: Duhamel formula, conservativeness, convergence of approximants",
            Scenario::SdeIdentify => "weak solution of the SDE and identification of its stable driving noise",
            Scenario::FullSuite => "all checks in dependency order",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub dim: usize,
    pub alpha: f64,
    /// Target weak form-bound of the singular drift.
    pub delta: f64,
    pub lambda: f64,
    pub nu: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { dim: 3, alpha: 1.5, delta: 0.05, lambda: 1.0, nu: 0.675, p: 5.0, q: 6.0, r: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    pub n: usize,
    /// Refinement level for ladders in `N`.
    pub n_fine: usize,
    pub half_length: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { n: 32, n_fine: 64, half_length: 8.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ladders {
    pub mu: Vec<f64>,
    pub t: Vec<f64>,
    /// Truncation/mollification levels `n` of `b_n`.
    pub n_levels: Vec<u32>,
    /// `λ` values scanned by the form-bound estimator.
    pub formbound_lambda: Vec<f64>,
}

impl Default for Ladders {
    fn default() -> Self {
        Self {
            mu: vec![1e2, 1e3, 1e4],
            t: vec![0.1, 0.25, 0.5],
            n_levels: vec![8, 16, 32],
            formbound_lambda: vec![1e-1, 1e-2, 1e-3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McParams {
    pub n_paths: usize,
    pub dt: Vec<f64>,
    pub t: f64,
    pub kappa: Vec<f64>,
}

impl Default for McParams {
    fn default() -> Self {
        Self { n_paths: 100_000, dt: vec![0.025, 0.0125], t: 0.5, kappa: vec![0.5, 1.0, 2.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolventParams {
    pub mu: f64,
    /// Second spectral point of the pseudo-resolvent identity.
    pub mu2: f64,
    /// Exponents at which the `L^p` inequalities are probed.
    pub lp_p: Vec<f64>,
    pub probes: usize,
}

impl Default for ResolventParams {
    fn default() -> Self {
        Self { mu: 5.0, mu2: 7.0, lp_p: vec![2.0, 4.5], probes: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftConfig {
    /// Singular drift under study; `hardy` uses `model.delta` as its target
    /// weak form-bound.
    pub kind: DriftKind,
    pub c: f64,
    pub beta: f64,
    pub s: f64,
    /// Amplitude of the bounded smooth drift used by the smooth-case checks.
    pub smooth_amplitude: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self { kind: DriftKind::Hardy, c: 0.1, beta: 1.0, s: 0.25, smooth_amplitude: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Halved grids and path counts.
    #[serde(default)]
    pub quick: bool,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default)]
    pub ladder: Ladders,
    #[serde(default)]
    pub mc: McParams,
    #[serde(default)]
    pub resolvent: ResolventParams,
    #[serde(default)]
    pub drift: DriftConfig,
}

fn default_seed() -> u64 {
    20_240_601
}

fn parse_scalar(raw: &str) -> Value {
    let v = raw.trim();
    let unq = v.strip_prefix('"').and_then(|s| s.strip_suffix('"'));
    if let Some(s) = unq {
        return Value::String(s.to_string());
    }
    match v {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        _ => {}
    }
    if let Ok(i) = v.parse::<u64>() {
        return Value::from(i);
    }
    if let Ok(x) = v.parse::<f64>() {
        if x.is_finite() {
            return Value::from(x);
        }
    }
    Value::String(v.to_string())
}

fn parse_value(raw: &str) -> Value {
    if raw.contains(',') {
        Value::Array(raw.split(',').filter(|s| !s.trim().is_empty()).map(parse_scalar).collect())
    } else {
        parse_scalar(raw)
    }
}

/// Parses the sectioned `key = value` grammar into a JSON tree.
pub fn parse_key_values(text: &str) -> Result<Value> {
    let mut root = Map::new();
    let mut section: Option<String> = None;
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::Config(format!("line {}: empty section name", no + 1)));
            }
            root.entry(name.to_string()).or_insert_with(|| Value::Object(Map::new()));
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", no + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", no + 1)));
        }
        let table = match &section {
            None => &mut root,
            Some(s) => root.get_mut(s).and_then(Value::as_object_mut).expect("section table"),
        };
        if table.insert(k.to_string(), parse_value(v)).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{k}`", no + 1)));
        }
    }
    Ok(Value::Object(root))
}

impl ExperimentConfig {
    /// Parses JSON (first non-blank character `{`) or the key-value grammar.
    pub fn parse(text: &str) -> Result<Self> {
        let tree = if text.trim_start().starts_with('{') {
            serde_json::from_str::<Value>(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?
        } else {
            parse_key_values(text)?
        };
        if tree.as_object().is_some_and(Map::is_empty) {
            return Err(Error::Config("empty configuration".into()));
        }
        serde_json::from_value(tree).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Defaults for `scenario`.
    pub fn for_scenario(scenario: Scenario) -> Self {
        Self {
            scenario,
            seed: default_seed(),
            quick: false,
            model: ModelParams::default(),
            grid: GridParams::default(),
            ladder: Ladders::default(),
            mc: McParams::default(),
            resolvent: ResolventParams::default(),
            drift: DriftConfig::default(),
        }
    }

    fn halve(n: usize) -> usize {
        (n / 2).max(8) & !1
    }

    /// Working grid (halved under `quick`).
    pub fn grid(&self) -> Result<TorusGrid> {
        let n = if self.quick { Self::halve(self.grid.n) } else { self.grid.n };
        TorusGrid::new(self.model.dim, self.grid.half_length, n)
    }

    /// Refinement grid (halved under `quick`).
    pub fn fine_grid(&self) -> Result<TorusGrid> {
        let n = if self.quick { Self::halve(self.grid.n_fine) } else { self.grid.n_fine };
        TorusGrid::new(self.model.dim, self.grid.half_length, n)
    }

    pub fn n_paths(&self) -> usize {
        if self.quick {
            (self.mc.n_paths / 2).max(1)
        } else {
            self.mc.n_paths
        }
    }

    /// The singular drift under study.
    pub fn drift_spec(&self) -> Result<DriftSpec> {
        let m = &self.model;
        match self.drift.kind {
            DriftKind::Hardy => DriftSpec::hardy_with_formbound(m.delta, m.alpha, m.dim),
            DriftKind::LpRadial => DriftSpec::lp_radial(self.drift.c, self.drift.beta, m.alpha, m.dim),
            DriftKind::BoundedSmooth => {
                DriftSpec::bounded_smooth(self.drift.smooth_amplitude, 2.0 * self.grid.half_length, m.dim)
            }
            DriftKind::KatoExample => DriftSpec::kato_example(self.drift.c, self.drift.s, m.alpha, m.dim),
            DriftKind::CustomClosure => Err(Error::Config("custom_closure drifts cannot be configured from a file".into())),
        }
    }

    /// The bounded smooth drift of the smooth-case checks.
    pub fn smooth_spec(&self) -> Result<DriftSpec> {
        DriftSpec::bounded_smooth(self.drift.smooth_amplitude, 2.0 * self.grid.half_length, self.model.dim)
    }

    fn check_shape(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let m = &self.model;
        if m.dim < 3 {
            return bad(format!("dim = {} must be at least 3", m.dim));
        }
        if !(m.alpha > 1.0 && m.alpha < 2.0) {
            return bad(format!("alpha = {} must lie in (1, 2)", m.alpha));
        }
        if !(m.delta > 0.0) || !(m.lambda > 0.0) {
            return bad("delta and lambda must be positive".into());
        }
        if !(m.nu > 0.0 && m.nu < m.alpha / 2.0) {
            return bad(format!("nu = {} must lie in (0, alpha/2)", m.nu));
        }
        if !(1.0 < m.r && m.r < m.p && m.p < m.q) {
            return bad(format!("need 1 < r < p < q, got r = {}, p = {}, q = {}", m.r, m.p, m.q));
        }
        if self.grid.n_fine < self.grid.n {
            return bad("n_fine must be at least n".into());
        }
        self.grid()?;
        self.fine_grid()?;
        let inc = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]) && v.iter().all(|x| *x > 0.0);
        if self.ladder.mu.len() < 2 || !inc(&self.ladder.mu) {
            return bad("ladder.mu needs at least two positive increasing values".into());
        }
        if self.ladder.t.is_empty() || !inc(&self.ladder.t) {
            return bad("ladder.t must be positive and increasing".into());
        }
        if self.ladder.n_levels.len() < 2 || self.ladder.n_levels.windows(2).any(|w| w[1] <= w[0]) || self.ladder.n_levels[0] < 4 {
            return bad("ladder.n_levels needs at least two increasing levels >= 4".into());
        }
        if self.ladder.formbound_lambda.is_empty() || self.ladder.formbound_lambda.iter().any(|l| !(*l > 0.0)) {
            return bad("ladder.formbound_lambda must be positive".into());
        }
        if self.mc.n_paths == 0 || self.mc.dt.len() < 2 || self.mc.dt.iter().any(|d| !(*d > 0.0)) || !(self.mc.t > 0.0) {
            return bad("mc needs n_paths > 0, t > 0 and at least two positive dt values".into());
        }
        let rp = &self.resolvent;
        if !(rp.mu > 0.0 && rp.mu2 > 0.0 && rp.mu != rp.mu2) || rp.probes == 0 || rp.lp_p.iter().any(|p| !(*p > 1.0)) {
            return bad("resolvent needs distinct positive mu, mu2, probes > 0 and lp_p > 1".into());
        }
        self.drift_spec()?;
        Ok(())
    }

    /// Shape checks, then the admissibility hypotheses: `δ` below the
    /// threshold, `p ∈ (p_−, p_+)` and `p > (d−α+1) ∨ (d/(2ν)+2)`.
    pub fn validate(&self) -> Result<AdmissibilityReport> {
        self.check_shape()?;
        let m = &self.model;
        let spec = MSampleSpec::log_grid((-2.0, 2.0), (-2.0, 1.0), 2);
        let m_est = estimate_m_dalpha(m.alpha, m.dim, &spec)?.m_est;
        let adm = check_admissibility(m.dim, m.alpha, m_est, m.delta)?;
        if !(adm.p_minus < m.p && m.p < adm.p_plus) {
            return Err(Error::Admissibility {
                hypothesis: "admissible range p in (p_-, p_+)".into(),
                detail: format!("p = {} outside ({:.6}, {:.6})", m.p, adm.p_minus, adm.p_plus),
            });
        }
        let d = m.dim as f64;
        let need = (d - m.alpha + 1.0).max(d / (2.0 * m.nu) + 2.0);
        if !(m.p > need) {
            return Err(Error::Admissibility {
                hypothesis: "weighted estimates need p > (d-alpha+1) v (d/(2 nu)+2)".into(),
                detail: format!("p = {} must exceed {need:.6}", m.p),
            });
        }
        Ok(AdmissibilityReport { m_est, admissibility: adm, p_lower_weighted: need })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub m_est: f64,
    pub admissibility: Admissibility,
    pub p_lower_weighted: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_and_json_agree() {
        let kv = "scenario = sampler_check\nseed = 3\n[model]\np = 5.5 # tail comment\n[ladder]\nmu = 10, 100\n";
        let js = r#"{"scenario":"sampler_check","seed":3,"model":{"p":5.5},"ladder":{"mu":[10,100]}}"#;
        let a = ExperimentConfig::parse(kv).unwrap();
        let b = ExperimentConfig::parse(js).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.model.p, 5.5);
        assert_eq!(a.ladder.mu, vec![10.0, 100.0]);
        assert_eq!(a.model.alpha, 1.5);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(ExperimentConfig::parse(""), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("# nothing\n"), Err(Error::Config(_))));
        assert!(ExperimentConfig::parse("scenario = nope").is_err());
        assert!(ExperimentConfig::parse("scenario = full_suite\nbogus = 1").is_err());
        assert!(ExperimentConfig::parse("scenario = full_suite\n[model]\nalpha").is_err());
        assert!(ExperimentConfig::parse("scenario = full_suite\nseed = 1\nseed = 2").is_err());
    }

    #[test]
    fn scenario_names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(Scenario::parse(s.name()), Some(s));
            let v: Scenario = serde_json::from_value(Value::String(s.name().into())).unwrap();
            assert_eq!(v, s);
        }
    }
}
