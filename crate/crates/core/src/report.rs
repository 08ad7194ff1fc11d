//! Fixed-format report writers: CSV (one row per cell), nested JSON, and
//! a plain-text summary table.
//!
//! Byte determinism is part of the format contract: identical reports
//! serialize to identical bytes. Machine-readable floats are written with
//! 17 significant digits (`{:.16e}`); the human summary uses the shortest
//! round-trip form.

use crate::harness::{BiasReport, CoverageReport, DualityReport};
use std::fmt::Write as _;

/// 17-significant-digit scientific form used in CSV and JSON output.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn csv_from_records<I, R>(header: &[&str], records: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)
        .expect("in-memory CSV writes cannot fail");
    for record in records {
        w.write_record(record)
            .expect("in-memory CSV writes cannot fail");
    }
    String::from_utf8(w.into_inner().expect("no partial flush on Vec")).expect("CSV is UTF-8")
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

fn json_str(s: &str) -> String {
    format!("\"{}\"", json_escape(s))
}

/// Finite floats as JSON numbers in scientific form; non-finite as null
/// (JSON has no representation for them).
fn json_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn json_opt(x: Option<f64>) -> String {
    x.map(json_float).unwrap_or_else(|| "null".to_string())
}

struct JsonObj {
    fields: Vec<(&'static str, String)>,
}

impl JsonObj {
    fn new() -> Self {
        Self { fields: Vec::new() }
    }

    fn field(mut self, key: &'static str, value: String) -> Self {
        self.fields.push((key, value));
        self
    }

    fn render(&self, indent: usize) -> String {
        let pad = "  ".repeat(indent + 1);
        let close = "  ".repeat(indent);
        let body = self
            .fields
            .iter()
            .map(|(k, v)| format!("{pad}{}: {v}", json_str(k)))
            .collect::<Vec<_>>()
            .join(",\n");
        format!("{{\n{body}\n{close}}}")
    }
}

fn json_array(items: Vec<String>, indent: usize) -> String {
    if items.is_empty() {
        return "[]".to_string();
    }
    let pad = "  ".repeat(indent + 1);
    let close = "  ".repeat(indent);
    let body = items
        .iter()
        .map(|i| format!("{pad}{i}"))
        .collect::<Vec<_>>()
        .join(",\n");
    format!("[\n{body}\n{close}]")
}

pub fn coverage_csv(report: &CoverageReport) -> String {
    csv_from_records(
        &[
            "model",
            "n",
            "alpha",
            "miscoverage",
            "miscoverage_upper",
            "mean_width",
            "median_width",
            "trivial_fraction",
            "exact",
            "reps",
            "seed",
        ],
        report.rows.iter().map(|r| {
            vec![
                r.model.clone(),
                r.n.to_string(),
                fmt_float(r.alpha),
                fmt_float(r.miscoverage),
                fmt_float(r.miscoverage_upper),
                fmt_opt(r.mean_width),
                fmt_opt(r.median_width),
                fmt_float(r.trivial_fraction),
                fmt_opt(r.exact),
                r.reps.to_string(),
                r.seed.to_string(),
            ]
        }),
    )
}

pub fn coverage_json(report: &CoverageReport) -> String {
    let rows = report
        .rows
        .iter()
        .map(|r| {
            JsonObj::new()
                .field("model", json_str(&r.model))
                .field("n", r.n.to_string())
                .field("alpha", json_float(r.alpha))
                .field("miscoverage", json_float(r.miscoverage))
                .field("miscoverage_upper", json_float(r.miscoverage_upper))
                .field("mean_width", json_opt(r.mean_width))
                .field("median_width", json_opt(r.median_width))
                .field("trivial_fraction", json_float(r.trivial_fraction))
                .field("exact", json_opt(r.exact))
                .field("reps", r.reps.to_string())
                .field("seed", r.seed.to_string())
                .render(2)
        })
        .collect();
    let worst = report
        .worst
        .iter()
        .map(|w| {
            JsonObj::new()
                .field("n", w.n.to_string())
                .field("alpha", json_float(w.alpha))
                .field("model", json_str(&w.model))
                .field("miscoverage", json_float(w.miscoverage))
                .field("miscoverage_upper", json_float(w.miscoverage_upper))
                .render(2)
        })
        .collect();
    let obj = JsonObj::new()
        .field("procedure", json_str(&report.procedure))
        .field("reps", report.reps.to_string())
        .field("seed", report.seed.to_string())
        .field("rows", json_array(rows, 1))
        .field("worst", json_array(worst, 1));
    let mut out = obj.render(0);
    out.push('\n');
    out
}

pub fn coverage_summary(report: &CoverageReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "procedure: {}", report.procedure);
    let _ = writeln!(out, "reps: {}  seed: {}", report.reps, report.seed);
    let _ = writeln!(out, "cells: {}", report.rows.len());
    let model_w = report
        .rows
        .iter()
        .map(|r| r.model.len())
        .chain(["model".len()])
        .max()
        .unwrap_or(5);
    let _ = writeln!(
        out,
        "{:<model_w$}  {:>7}  {:>8}  {:>12}  {:>12}  {:>12}  {:>8}  {:>12}",
        "model", "n", "alpha", "miscoverage", "upper_bound", "mean_width", "trivial", "exact"
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:<model_w$}  {:>7}  {:>8}  {:>12.6}  {:>12.6}  {:>12}  {:>8.4}  {:>12}",
            r.model,
            r.n,
            r.alpha,
            r.miscoverage,
            r.miscoverage_upper,
            r.mean_width.map_or("-".to_string(), |w| format!("{w:.4}")),
            r.trivial_fraction,
            r.exact.map_or("-".to_string(), |e| format!("{e:.6}")),
        );
    }
    let _ = writeln!(out, "worst cell per (n, alpha):");
    for w in &report.worst {
        let _ = writeln!(
            out,
            "  n={} alpha={}: {} miscoverage={:.6} (upper bound {:.6})",
            w.n, w.alpha, w.model, w.miscoverage, w.miscoverage_upper
        );
    }
    out
}

pub fn duality_csv(report: &DualityReport) -> String {
    csv_from_records(
        &[
            "stage",
            "model",
            "n",
            "alpha",
            "value",
            "bound",
            "margin",
            "violation",
            "exact",
            "grid_fallback",
            "reps",
        ],
        report.rows.iter().map(|r| {
            vec![
                r.stage.clone(),
                r.model.clone(),
                r.n.to_string(),
                fmt_float(r.alpha),
                fmt_float(r.value),
                fmt_float(r.bound),
                fmt_float(r.margin),
                r.violation.to_string(),
                fmt_opt(r.exact),
                r.grid_fallback.to_string(),
                r.reps.to_string(),
            ]
        }),
    )
}

pub fn duality_json(report: &DualityReport) -> String {
    let rows = report
        .rows
        .iter()
        .map(|r| {
            JsonObj::new()
                .field("stage", json_str(&r.stage))
                .field("model", json_str(&r.model))
                .field("n", r.n.to_string())
                .field("alpha", json_float(r.alpha))
                .field("value", json_float(r.value))
                .field("bound", json_float(r.bound))
                .field("margin", json_float(r.margin))
                .field("violation", r.violation.to_string())
                .field("exact", json_opt(r.exact))
                .field("grid_fallback", r.grid_fallback.to_string())
                .field("reps", r.reps.to_string())
                .render(2)
        })
        .collect();
    let obj = JsonObj::new()
        .field("estimator", json_str(&report.estimator))
        .field("reps", report.reps.to_string())
        .field("seed", report.seed.to_string())
        .field("gamma", json_float(report.gamma))
        .field("violations", report.violations.to_string())
        .field("rows", json_array(rows, 1));
    let mut out = obj.render(0);
    out.push('\n');
    out
}

pub fn duality_summary(report: &DualityReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "estimator: {}", report.estimator);
    let _ = writeln!(
        out,
        "reps: {}  seed: {}  working level gamma: {}",
        report.reps, report.seed, report.gamma
    );
    let _ = writeln!(out, "bound violations: {}", report.violations);
    let model_w = report
        .rows
        .iter()
        .map(|r| r.model.len())
        .chain(["model".len()])
        .max()
        .unwrap_or(5);
    let _ = writeln!(
        out,
        "{:<24}  {:<model_w$}  {:>7}  {:>10}  {:>12}  {:>12}  {:>9}",
        "stage", "model", "n", "alpha", "value", "bound", "violation"
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:<24}  {:<model_w$}  {:>7}  {:>10.6}  {:>12.6}  {:>12.6}  {:>9}",
            r.stage,
            r.model,
            r.n,
            r.alpha,
            r.value,
            r.bound,
            if r.violation { "VIOLATED" } else { "ok" },
        );
    }
    out
}

pub fn bias_csv(report: &BiasReport) -> String {
    csv_from_records(
        &[
            "model", "n", "point", "lower", "upper", "exact", "reps", "seed",
        ],
        report.rows.iter().map(|r| {
            vec![
                r.model.clone(),
                r.n.to_string(),
                fmt_float(r.point),
                fmt_float(r.lower),
                fmt_float(r.upper),
                r.exact.to_string(),
                r.reps.to_string(),
                r.seed.to_string(),
            ]
        }),
    )
}

pub fn bias_json(report: &BiasReport) -> String {
    let rows = report
        .rows
        .iter()
        .map(|r| {
            JsonObj::new()
                .field("model", json_str(&r.model))
                .field("n", r.n.to_string())
                .field("point", json_float(r.point))
                .field("lower", json_float(r.lower))
                .field("upper", json_float(r.upper))
                .field("exact", r.exact.to_string())
                .field("reps", r.reps.to_string())
                .field("seed", r.seed.to_string())
                .render(2)
        })
        .collect();
    let obj = JsonObj::new()
        .field("estimator", json_str(&report.estimator))
        .field("n", report.n.to_string())
        .field("reps", report.reps.to_string())
        .field("seed", report.seed.to_string())
        .field("worst_model", json_str(&report.worst_model))
        .field("worst_bias", json_float(report.worst.point))
        .field("rows", json_array(rows, 1));
    let mut out = obj.render(0);
    out.push('\n');
    out
}

pub fn bias_summary(report: &BiasReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "estimator: {}  n: {}  reps: {}  seed: {}",
        report.estimator, report.n, report.reps, report.seed
    );
    let model_w = report
        .rows
        .iter()
        .map(|r| r.model.len())
        .chain(["model".len()])
        .max()
        .unwrap_or(5);
    let _ = writeln!(
        out,
        "{:<model_w$}  {:>12}  {:>12}  {:>12}  {:>6}",
        "model", "bias", "lower", "upper", "source"
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:<model_w$}  {:>12.6}  {:>12.6}  {:>12.6}  {:>6}",
            r.model,
            r.point,
            r.lower,
            r.upper,
            if r.exact { "exact" } else { "mc" },
        );
    }
    let _ = writeln!(
        out,
        "worst-case median bias: {} at {} ({})",
        report.worst.point,
        report.worst_model,
        if report.worst.exact { "exact" } else { "mc" },
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_coverage, run_medbias, ExperimentConfig};

    fn tiny_coverage() -> CoverageReport {
        let cfg = ExperimentConfig {
            models: vec![
                "normal_mean:mu=0".into(),
                "discrete_uniform:lo=-1,hi=5".into(),
            ],
            procedure: Some("zinterval".into()),
            estimator: None,
            n_grid: vec![16],
            level_grid: vec![0.2],
            reps: 200,
            seed: 1,
            slack: vec![],
            sweep: None,
        };
        run_coverage(&cfg).unwrap()
    }

    #[test]
    fn float_format_is_17_significant_digits() {
        assert_eq!(fmt_float(0.0625), "6.2500000000000000e-2");
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_float(-0.1), "-1.0000000000000001e-1");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
        assert_eq!(fmt_float(f64::NAN), "nan");
        assert_eq!(fmt_opt(None), "");
    }

    #[test]
    fn csv_quotes_models_containing_commas() {
        let report = tiny_coverage();
        let csv = coverage_csv(&report);
        assert!(csv.contains("\"discrete_uniform:lo=-1,hi=5\""));
        let mut rdr = csv::Reader::from_reader(csv.as_bytes());
        let n = rdr.records().count();
        assert_eq!(n, report.rows.len());
    }

    #[test]
    fn json_is_valid_and_byte_stable() {
        let report = tiny_coverage();
        let a = coverage_json(&report);
        let b = coverage_json(&report);
        assert_eq!(a, b);
        let value: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(value["rows"].as_array().unwrap().len(), report.rows.len());
        assert_eq!(value["procedure"], "zinterval");
        // Discrete model has no closed form here: null, not a number.
        assert!(value["rows"][1]["exact"].is_null() || value["rows"][0]["exact"].is_null());
    }

    #[test]
    fn summary_mentions_worst_cells() {
        let report = tiny_coverage();
        let text = coverage_summary(&report);
        assert!(text.contains("worst cell per (n, alpha):"));
        assert!(text.contains("procedure: zinterval"));
    }

    #[test]
    fn bias_writers_round_trip() {
        let cfg = ExperimentConfig {
            models: vec!["uniform_scale:theta=1".into()],
            procedure: None,
            estimator: Some("uniform_mle".into()),
            n_grid: vec![10],
            level_grid: vec![],
            reps: 100,
            seed: 0,
            slack: vec![],
            sweep: None,
        };
        let report = run_medbias(&cfg).unwrap();
        let csv = bias_csv(&report);
        assert!(csv.contains("5.0000000000000000e-1"));
        let json = bias_json(&report);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["worst_model"], "uniform_scale:theta=1");
        let text = bias_summary(&report);
        assert!(text.contains("worst-case median bias: 0.5"));
        assert!(text.contains("exact"));
    }

    #[test]
    fn json_escaping_handles_specials() {
        assert_eq!(json_escape("a\"b\\c\nd"), "a\\\"b\\\\c\\nd");
        assert_eq!(json_str("x"), "\"x\"");
    }
}
