use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn stablelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stablelab")).args(args).output().expect("binary runs")
}

fn run_config(text: &str, out: &Path) -> Output {
    let cfg = out.join("run.cfg");
    std::fs::write(&cfg, text).unwrap();
    stablelab(&["run", cfg.to_str().unwrap(), "--out-dir", out.join("reports").to_str().unwrap()])
}

/// Checks `required`, `const`, `enum`, `type`, `items`, `properties` and
/// `additionalProperties: false`.
fn validate(schema: &Value, v: &Value, at: &str) -> Result<(), String> {
    if let Some(c) = schema.get("const") {
        if c != v {
            return Err(format!("{at}: expected {c}"));
        }
    }
    if let Some(e) = schema.get("enum").and_then(Value::as_array) {
        if !e.contains(v) {
            return Err(format!("{at}: {v} not in enum"));
        }
    }
    let ok = match schema.get("type").and_then(Value::as_str) {
        Some("object") => v.is_object(),
        Some("array") => v.is_array(),
        Some("string") => v.is_string(),
        Some("integer") => v.is_u64() || v.is_i64(),
        Some("number") => v.is_number(),
        _ => true,
    };
    if !ok {
        return Err(format!("{at}: wrong type"));
    }
    if let Some(obj) = v.as_object() {
        for r in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            if !obj.contains_key(r.as_str().unwrap()) {
                return Err(format!("{at}: missing {r}"));
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        for (k, child) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(s) => validate(s, child, &format!("{at}.{k}"))?,
                None if schema.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    return Err(format!("{at}: unexpected {k}"))
                }
                None => {}
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), v.as_array()) {
        for (i, x) in arr.iter().enumerate() {
            validate(items, x, &format!("{at}[{i}]"))?;
        }
    }
    Ok(())
}

#[test]
fn lists_seven_sorted_scenarios_stably() {
    let a = stablelab(&["list-scenarios"]);
    let b = stablelab(&["list-scenarios"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(names.len(), 7);
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert!(text.lines().all(|l| l.split('\t').nth(1).is_some_and(|a| !a.is_empty())));
}

#[test]
fn empty_and_malformed_configs_exit_2() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run_config("", d.path()).status.code(), Some(2));
    assert_eq!(run_config("scenario = sampler_check\nnot a line\n", d.path()).status.code(), Some(2));
    assert_eq!(run_config("scenario = sampler_check\n[model]\nalpha = 2.5\n", d.path()).status.code(), Some(2));
    assert_eq!(run_config("{\"scenario\": ", d.path()).status.code(), Some(2));
    let missing = stablelab(&["run", d.path().join("absent.cfg").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn inadmissible_delta_exits_3_citing_the_hypothesis() {
    let d = tempfile::tempdir().unwrap();
    let out = run_config("scenario = sampler_check\n[model]\ndelta = 0.5\n", d.path());
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains(stablelab::formbound::DELTA_HYPOTHESIS), "{err}");
}

#[test]
fn p_below_weighted_bound_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let out = run_config("scenario = sampler_check\n[model]\np = 3\nq = 4\n", d.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("nu"));
}

#[test]
fn sampler_check_passes_and_summary_matches_schema() {
    let d = tempfile::tempdir().unwrap();
    let out = run_config("# defaults\nscenario = sampler_check\nseed = 9\n", d.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let dir = d.path().join("reports");
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    let schema: Value = serde_json::from_str(stablelab::scenarios::SUMMARY_SCHEMA_JSON).unwrap();
    validate(&schema, &summary, "summary").unwrap();
    assert_eq!(summary["seed"], 9);
    for r in summary["reports"].as_array().unwrap() {
        assert!(dir.join(r["file"].as_str().unwrap()).exists());
    }
    for e in summary["exports"].as_array().unwrap() {
        let text = std::fs::read_to_string(dir.join(e.as_str().unwrap())).unwrap();
        assert!(text.lines().count() > 1);
    }
}

#[test]
fn seed_override_changes_the_run() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.cfg");
    std::fs::write(&cfg, "scenario = sampler_check\n").unwrap();
    let mut texts = Vec::new();
    for seed in ["1", "2"] {
        let o = d.path().join(seed);
        let r = stablelab(&["run", cfg.to_str().unwrap(), "--seed", seed, "--quick", "--out-dir", o.to_str().unwrap()]);
        assert!(r.status.code().is_some_and(|c| c <= 1));
        texts.push(std::fs::read_to_string(o.join("sampler_char_fn.json")).unwrap());
    }
    assert_ne!(texts[0], texts[1]);
}
