//! Browser bindings. Each export returns a JSON string; the page in `www/`
//! draws it.

use serde_json::{json, Value};
use volterra_sa::problem_file::{parse_problem, serialize_problem};
use volterra_sa::{
    builtin_example, run, Plain, ProblemSpec, RunOptions, RunReport, SaConfig, SaContext, StoppingRule,
};
use wasm_bindgen::prelude::*;

fn rule(mode: &str, eps: f64) -> Result<StoppingRule, String> {
    Ok(match mode {
        "sa" => StoppingRule::SaSuccessive,
        "fpa-abs" => StoppingRule::FpaAbsolute { epsilon: eps },
        "fpa-corr" => StoppingRule::FpaCorrection { epsilon: eps },
        "fpa-disc" => StoppingRule::FpaDiscrepancy { epsilon: eps },
        _ => return Err(format!("unknown mode `{mode}`")),
    })
}

fn solve(spec: &ProblemSpec, mode: &str, eps: f64, seed: u64, max_n: usize) -> Result<RunReport, String> {
    let mut opts = RunOptions::new(spec, rule(mode, eps)?);
    opts.max_n = max_n;
    if mode == "sa" {
        let mut config = SaConfig::with_seed(seed);
        config.precision_bits = spec.precision_bits.unwrap_or(53);
        let ctx = SaContext::new(config).map_err(|e| e.to_string())?;
        run(&ctx, spec, &opts).map_err(|e| e.to_string())
    } else {
        run(&Plain, spec, &opts).map_err(|e| e.to_string())
    }
}

fn payload(spec: &ProblemSpec, report: &RunReport) -> String {
    json!({
        "report": report,
        "exact": spec.exact_at(report.point),
        "stop": report.stop_reason.to_string(),
    })
    .to_string()
}

/// Runs a problem given in the text format used by `--problem`.
pub fn run_source(source: &str, mode: &str, eps: f64, seed: u64, max_n: usize) -> Result<String, String> {
    let spec = parse_problem(source).map_err(|e| e.to_string())?;
    let report = solve(&spec, mode, eps, seed, max_n)?;
    Ok(payload(&spec, &report))
}

/// Text of a built-in problem, for editing on the page.
pub fn example_source(id: u32) -> Result<String, String> {
    builtin_example(id).map(|s| serialize_problem(&s)).map_err(|e| e.to_string())
}

/// Iterations needed by a plain-arithmetic rule for each tolerance.
pub fn sweep_source(source: &str, mode: &str, eps_list: &str) -> Result<String, String> {
    if mode == "sa" {
        return Err("a sweep needs one of the fpa-* modes".into());
    }
    let spec = parse_problem(source).map_err(|e| e.to_string())?;
    let mut rows: Vec<Value> = Vec::new();
    for item in eps_list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let eps: f64 = item.parse().map_err(|_| format!("`{item}` is not a number"))?;
        let report = solve(&spec, mode, eps, 0, volterra_sa::controller::DEFAULT_MAX_N)?;
        rows.push(json!({
            "eps": item,
            "n": report.records.last().map(|r| r.n),
            "fired": report.fired(),
        }));
    }
    Ok(Value::Array(rows).to_string())
}

#[wasm_bindgen(js_name = runProblem)]
pub fn run_problem_js(source: &str, mode: &str, eps: f64, seed: u64, max_n: usize) -> Result<String, JsError> {
    run_source(source, mode, eps, seed, max_n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = exampleSource)]
pub fn example_source_js(id: u32) -> Result<String, JsError> {
    example_source(id).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sweep)]
pub fn sweep_js(source: &str, mode: &str, eps_list: &str) -> Result<String, JsError> {
    sweep_source(source, mode, eps_list).map_err(|e| JsError::new(&e))
}
