//! Report emitters: an aligned text table, CSV, and JSON lines.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use serde_json::json;

use crate::controller::{RunReport, StopReason, StoppingRule};

pub const HEADER_VALUE: &str = "approximate solution";
pub const HEADER_DIFF: &str = "difference of two term";
pub const HEADER_ERR: &str = "absolute error";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Table,
    Csv,
    Jsonl,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(OutputFormat::Table),
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            _ => Err(format!("unknown format `{s}` (expected table, csv or jsonl)")),
        }
    }
}

const COL: usize = 26;

fn opt_text(v: &Option<crate::backend::ValueSummary>) -> &str {
    v.as_ref().map_or("", |s| s.text.as_str())
}

pub fn render(report: &RunReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Table => render_table(report),
        OutputFormat::Csv => render_csv(report),
        OutputFormat::Jsonl => render_jsonl(report),
    }
}

fn stop_line(report: &RunReport) -> String {
    let mut s = format!("stop: {}", report.stop_reason);
    if let (Some(n), Some(v)) = (report.optimal_n, &report.optimal_value) {
        let _ = write!(s, "; optimal n = {n}, v = {}", v.text);
    }
    s
}

pub fn render_table(report: &RunReport) -> String {
    let sa = report.rule == StoppingRule::SaSuccessive;
    let has_err = report.records.iter().any(|r| r.err.is_some());
    let has_res = report.records.iter().any(|r| r.residual.is_some());
    let mut out = String::new();
    let _ = writeln!(out, "{}", report.label);
    let _ = write!(out, "r = {}, rule = {}", report.point, report.rule.name());
    if let Some(eps) = report.rule.epsilon() {
        let _ = write!(out, ", eps = {eps:e}");
    }
    let _ = writeln!(out, ", grid = {}", report.grid.name());

    let err_head = if sa { format!("{HEADER_ERR}*") } else { HEADER_ERR.to_string() };
    let _ = write!(out, "{:>3}  {:<COL$}{:<COL$}", "n", HEADER_VALUE, HEADER_DIFF);
    if has_err {
        let _ = write!(out, "{err_head:<COL$}");
    }
    if has_res {
        let _ = write!(out, "residual");
    }
    out = out.trim_end().to_string();
    out.push('\n');
    for r in &report.records {
        let mut line = format!("{:>3}  {:<COL$}{:<COL$}", r.n, r.value.text, opt_text(&r.diff));
        if has_err {
            let _ = write!(line, "{:<COL$}", opt_text(&r.err));
        }
        if let Some(d) = r.residual {
            let _ = write!(line, "{d:.6e}");
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    if sa && has_err {
        let _ = writeln!(out, "* diagnostic only, not used by the stopping rule");
    }
    let _ = writeln!(out, "{}", stop_line(report));
    for msg in &report.instability_log {
        let _ = writeln!(out, "instability: {msg}");
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn num(x: Option<f64>) -> String {
    x.map_or(String::new(), |x| format!("{x:?}"))
}

pub fn render_csv(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "n,{HEADER_VALUE},{HEADER_DIFF},{HEADER_ERR},value_mean,value_sigma,value_digits,diff_mean,err_mean,residual"
    );
    for r in &report.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.n,
            csv_field(&r.value.text),
            csv_field(opt_text(&r.diff)),
            csv_field(opt_text(&r.err)),
            num(Some(r.value.mean)),
            num(r.value.sigma),
            num(r.value.digits),
            num(r.diff.as_ref().map(|d| d.mean)),
            num(r.err.as_ref().map(|e| e.mean)),
            num(r.residual),
        );
    }
    out
}

#[derive(Serialize)]
struct StopLine<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    label: &'a str,
    point: f64,
    rule: &'a StoppingRule,
    grid: &'static str,
    stop_reason: &'a StopReason,
    optimal_n: Option<usize>,
    optimal_value: &'a Option<crate::backend::ValueSummary>,
    instability_log: &'a [String],
}

pub fn render_jsonl(report: &RunReport) -> String {
    let mut out = String::new();
    for r in &report.records {
        let mut v = serde_json::to_value(r).expect("records serialize");
        v["type"] = json!("record");
        let _ = writeln!(out, "{v}");
    }
    let stop = StopLine {
        kind: "stop",
        label: &report.label,
        point: report.point,
        rule: &report.rule,
        grid: report.grid.name(),
        stop_reason: &report.stop_reason,
        optimal_n: report.optimal_n,
        optimal_value: &report.optimal_value,
        instability_log: &report.instability_log,
    };
    let _ = writeln!(out, "{}", serde_json::to_string(&stop).expect("stop line serializes"));
    out
}

/// One column of an iterations-versus-epsilon table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepEntry {
    /// The epsilon as the user wrote it.
    pub label: String,
    pub epsilon: f64,
    pub n: Option<usize>,
    pub stop_reason: StopReason,
}

pub fn render_sweep(entries: &[SweepEntry], format: OutputFormat) -> String {
    let mut out = String::new();
    let n_text = |e: &SweepEntry| match (&e.stop_reason, e.n) {
        (StopReason::RuleFired { .. }, Some(n)) => n.to_string(),
        (_, Some(n)) => format!(">{n}"),
        (_, None) => "-".to_string(),
    };
    match format {
        OutputFormat::Table => {
            let widths: Vec<usize> = entries
                .iter()
                .map(|e| e.label.len().max(n_text(e).len()) + 2)
                .collect();
            let _ = write!(out, "{:<9}", "epsilon");
            for (e, w) in entries.iter().zip(&widths) {
                let _ = write!(out, "{:<w$}", e.label);
            }
            out = out.trim_end().to_string();
            let _ = write!(out, "\n{:<9}", "n");
            for (e, w) in entries.iter().zip(&widths) {
                let _ = write!(out, "{:<w$}", n_text(e));
            }
            out = out.trim_end().to_string();
            out.push('\n');
        }
        OutputFormat::Csv => {
            let _ = writeln!(out, "epsilon,n,stop");
            for e in entries {
                let _ = writeln!(out, "{},{},{}", csv_field(&e.label), num(e.n.map(|n| n as f64)).trim_end_matches(".0"), csv_field(&e.stop_reason.to_string()));
            }
        }
        OutputFormat::Jsonl => {
            for e in entries {
                let _ = writeln!(out, "{}", serde_json::to_string(e).expect("sweep entry serializes"));
            }
        }
    }
    out
}
