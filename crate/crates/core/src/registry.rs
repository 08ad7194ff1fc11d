//! String registry: parsers that turn config-file spec strings into
//! models, estimators, and procedure pipelines.
//!
//! Grammar (ASCII `->` and the arrow `→` are interchangeable):
//!
//! ```text
//! pipeline  := stage ( "->" stage )*
//! stage     := name [ ":" params ] [ "@" level ]
//! params    := key "=" value ( "," key "=" value )*
//! value     := bare token | "(" nested spec ")"
//! ```
//!
//! A trailing `@level` pins a stage at that level. The combinators
//! `boost_level` and `union_batch` require their input stage to be pinned
//! and consume the pin (it becomes the per-batch working level);
//! `monotonize` accepts any procedure. Examples:
//!
//! ```text
//! zinterval@0.1 -> boost_level@0.05
//! hulc:est=threshold_mean
//! hulc:est=(order_stat_median:r=3),delta=0.1,shuffle=true
//! wald:est=hodges -> monotonize:alpha_min=0.01,grid_len=32
//! ```
//!
//! Estimator specs accept the zoo names plus two wrappers that package a
//! procedure as an estimator: `endpoint(<pipeline>@<level>)` (a uniformly
//! random endpoint of the interval at the pinned level) and
//! `extract(<pipeline>)` (a random endpoint of the monotonized family at
//! level `n^(-1/2)`).

use crate::constructions::geometric_level_grid;
use crate::error::{Error, Result};
use crate::estimators::{DynEstimator, EstimatorKind, ZooEstimator, DEFAULT_HODGES_EXPONENT};
use crate::models::DataModel;
use crate::procedures::{
    BatchMinMax, Boosted, DynProcedure, ExtractedEstimator, FixedLevel, Monotonized,
    RandomizedEndpoint, UnionBatches, WaldAround, ZInterval, DEFAULT_MONOTONIZE_ALPHA_MIN,
    DEFAULT_MONOTONIZE_GRID_LEN,
};
use std::sync::Arc;

/// Model families the parser accepts, in canonical spelling.
pub const KNOWN_MODELS: &[&str] = &[
    "normal_mean:mu=<real>",
    "laplace_location:mu=<real>",
    "cauchy_location:mu=<real>",
    "uniform_scale:theta=<positive real>",
    "threshold_normal:mu=<real>",
    "discrete_uniform:lo=<int>,hi=<int>",
    "two_point:p=<probability>",
    "point_mass:c=<real>",
];

/// Estimators the parser accepts, in canonical spelling.
pub const KNOWN_ESTIMATORS: &[&str] = &[
    "mean",
    "median",
    "order_stat_median:r=<rank>",
    "uniform_scale_corrected",
    "uniform_mle",
    "threshold_mean",
    "hodges[:exponent=<real in (0,1)>]",
    "hard_threshold",
    "endpoint(<pipeline>@<level>)",
    "extract(<pipeline>)",
];

/// Pipeline stages the parser accepts, in canonical spelling.
pub const KNOWN_PROCEDURES: &[&str] = &[
    "zinterval[:sigma=<positive real>]",
    "wald:est=<estimator>[,sigma=<positive real>]",
    "hulc:est=<estimator>[,delta=<level>][,shuffle=<bool>]",
    "boost_level (after a stage pinned @gamma)",
    "union_batch (after a stage pinned @gamma)",
    "monotonize[:alpha_min=<level>][,grid_len=<count>]",
];

fn unknown(kind: &'static str, name: &str, known: &[&str]) -> Error {
    Error::UnknownName {
        kind,
        name: name.to_string(),
        known: known.join(", "),
    }
}

/// Splits `s` at depth-zero occurrences of `sep` (depth counts
/// parentheses), so nested specs pass through verbatim.
fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            c if c == sep && depth == 0 => {
                parts.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

/// Finds the byte index of the last depth-zero occurrence of `sep`.
fn rfind_top_level(s: &str, sep: char) -> Option<usize> {
    let mut depth = 0usize;
    let mut found = None;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            c if c == sep && depth == 0 => found = Some(i),
            _ => {}
        }
    }
    found
}

/// Finds the byte index of the first depth-zero occurrence of `sep`.
fn find_top_level(s: &str, sep: char) -> Option<usize> {
    let mut depth = 0usize;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            c if c == sep && depth == 0 => return Some(i),
            _ => {}
        }
    }
    None
}

struct Stage<'a> {
    name: &'a str,
    params: Vec<(&'a str, &'a str)>,
    pin: Option<f64>,
}

fn strip_parens(v: &str) -> &str {
    let t = v.trim();
    if t.starts_with('(') && t.ends_with(')') && t.len() >= 2 {
        &t[1..t.len() - 1]
    } else {
        t
    }
}

fn parse_stage(raw: &str) -> Result<Stage<'_>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(Error::config("procedure", "empty pipeline stage"));
    }
    let (body, pin) = match rfind_top_level(raw, '@') {
        Some(i) => {
            let level_str = raw[i + 1..].trim();
            let level: f64 = level_str.parse().map_err(|_| {
                Error::config("procedure", format!("cannot parse level `{level_str}`"))
            })?;
            (raw[..i].trim_end(), Some(level))
        }
        None => (raw, None),
    };
    let (name, params) = match find_top_level(body, ':') {
        Some(i) => {
            let mut params = Vec::new();
            for piece in split_top_level(&body[i + 1..], ',') {
                let piece = piece.trim();
                let Some(eq) = find_top_level(piece, '=') else {
                    return Err(Error::config(
                        "procedure",
                        format!("expected key=value, got `{piece}`"),
                    ));
                };
                params.push((piece[..eq].trim(), piece[eq + 1..].trim()));
            }
            (body[..i].trim(), params)
        }
        None => (body, Vec::new()),
    };
    Ok(Stage { name, params, pin })
}

fn param_f64(stage: &str, key: &str, value: &str) -> Result<f64> {
    value.parse().map_err(|_| {
        Error::config(
            "procedure",
            format!("{stage}: cannot parse {key}=`{value}` as a number"),
        )
    })
}

fn param_usize(stage: &str, key: &str, value: &str) -> Result<usize> {
    value.parse().map_err(|_| {
        Error::config(
            "procedure",
            format!("{stage}: cannot parse {key}=`{value}` as a count"),
        )
    })
}

fn param_bool(stage: &str, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::config(
            "procedure",
            format!("{stage}: cannot parse {key}=`{value}` as a boolean"),
        )),
    }
}

fn reject_unknown_keys(stage: &str, params: &[(&str, &str)], allowed: &[&str]) -> Result<()> {
    for (k, _) in params {
        if !allowed.contains(k) {
            return Err(Error::config(
                "procedure",
                format!(
                    "{stage}: unknown parameter `{k}` (allowed: {})",
                    allowed.join(", ")
                ),
            ));
        }
    }
    Ok(())
}

/// Parses a model spec string such as `normal_mean:mu=0.5`.
pub fn parse_model(spec: &str) -> Result<DataModel> {
    let stage = parse_stage(spec)?;
    if stage.pin.is_some() {
        return Err(Error::config("model", "model specs take no @level pin"));
    }
    let get = |key: &str| -> Result<f64> {
        for (k, v) in &stage.params {
            if *k == key {
                return param_f64(stage.name, key, v);
            }
        }
        Err(Error::config(
            "model",
            format!("{} requires parameter {key}", stage.name),
        ))
    };
    match stage.name {
        "normal_mean" => DataModel::normal_mean(get("mu")?),
        "laplace_location" => DataModel::laplace_location(get("mu")?),
        "cauchy_location" => DataModel::cauchy_location(get("mu")?),
        "uniform_scale" => DataModel::uniform_scale(get("theta")?),
        "threshold_normal" => DataModel::threshold_normal(get("mu")?),
        "discrete_uniform" => {
            let lo = get("lo")?;
            let hi = get("hi")?;
            if lo.fract() != 0.0 || hi.fract() != 0.0 {
                return Err(Error::config(
                    "model",
                    "discrete_uniform bounds must be integers",
                ));
            }
            DataModel::discrete_uniform(lo as i64, hi as i64)
        }
        "two_point" => DataModel::two_point(get("p")?),
        "point_mass" => DataModel::point_mass(get("c")?),
        other => Err(unknown("model", other, KNOWN_MODELS)),
    }
}

/// Parses an estimator spec into a zoo estimator (the closed-form bias
/// oracles only apply to these).
pub fn parse_zoo_estimator(spec: &str) -> Result<ZooEstimator> {
    let stage = parse_stage(spec)?;
    if stage.pin.is_some() {
        return Err(Error::config(
            "estimator",
            "estimator specs take no @level pin",
        ));
    }
    let kind = match stage.name {
        "mean" => EstimatorKind::Mean,
        "median" => EstimatorKind::Median,
        "order_stat_median" => {
            reject_unknown_keys(stage.name, &stage.params, &["r"])?;
            let (_, v) = stage
                .params
                .iter()
                .find(|(k, _)| *k == "r")
                .ok_or_else(|| Error::config("estimator", "order_stat_median requires r=<rank>"))?;
            EstimatorKind::OrderStatMedian {
                r: param_usize(stage.name, "r", v)?,
            }
        }
        "uniform_scale_corrected" => EstimatorKind::UniformScaleCorrected,
        "uniform_mle" => EstimatorKind::UniformMle,
        "threshold_mean" => EstimatorKind::ThresholdMean,
        "hodges" => {
            reject_unknown_keys(stage.name, &stage.params, &["exponent"])?;
            let exponent = match stage.params.iter().find(|(k, _)| *k == "exponent") {
                Some((_, v)) => param_f64(stage.name, "exponent", v)?,
                None => DEFAULT_HODGES_EXPONENT,
            };
            EstimatorKind::Hodges { exponent }
        }
        "hard_threshold" => EstimatorKind::HardThreshold,
        other => return Err(unknown("estimator", other, KNOWN_ESTIMATORS)),
    };
    if !matches!(
        kind,
        EstimatorKind::OrderStatMedian { .. } | EstimatorKind::Hodges { .. }
    ) {
        reject_unknown_keys(stage.name, &stage.params, &[])?;
    }
    ZooEstimator::validated(kind)
}

/// Parses an estimator spec: a zoo name or one of the procedure-backed
/// wrappers `endpoint(...)` / `extract(...)`.
pub fn parse_estimator(spec: &str) -> Result<DynEstimator> {
    let spec = spec.trim();
    if let Some(inner) = spec
        .strip_prefix("endpoint(")
        .and_then(|s| s.strip_suffix(')'))
    {
        let (proc_, pin) = parse_pipeline(inner)?;
        let level = pin.ok_or_else(|| {
            Error::config(
                "estimator",
                "endpoint(...) requires a pinned level, e.g. endpoint(zinterval@0.1)",
            )
        })?;
        return RandomizedEndpoint::shared(proc_, level);
    }
    if let Some(inner) = spec
        .strip_prefix("extract(")
        .and_then(|s| s.strip_suffix(')'))
    {
        let (proc_, pin) = parse_pipeline(inner)?;
        if pin.is_some() {
            return Err(Error::config(
                "estimator",
                "extract(...) takes an unpinned family; drop the @level",
            ));
        }
        let grid = geometric_level_grid(DEFAULT_MONOTONIZE_ALPHA_MIN, DEFAULT_MONOTONIZE_GRID_LEN)?;
        return ExtractedEstimator::shared(proc_, grid);
    }
    Ok(parse_zoo_estimator(spec)?.into_shared())
}

/// Parses a pipeline, returning the composed procedure and a trailing pin
/// (the `@level` on the final stage) if one was given.
fn parse_pipeline(spec: &str) -> Result<(DynProcedure, Option<f64>)> {
    let normalized = spec.replace('→', "->");
    let mut current: Option<(DynProcedure, Option<f64>)> = None;
    for raw_stage in split_pipeline(&normalized) {
        let stage = parse_stage(&raw_stage)?;
        current = Some(match stage.name {
            "zinterval" | "wald" | "hulc" => {
                if current.is_some() {
                    return Err(Error::config(
                        "procedure",
                        format!(
                            "{} generates an interval and must be the first stage",
                            stage.name
                        ),
                    ));
                }
                (build_generator(&stage)?, stage.pin)
            }
            "boost_level" | "union_batch" => {
                reject_unknown_keys(stage.name, &stage.params, &[])?;
                let Some((base, Some(gamma))) = current else {
                    return Err(Error::config(
                        "procedure",
                        format!(
                            "{} requires the previous stage pinned at a level, e.g. zinterval@0.1 -> {}",
                            stage.name, stage.name
                        ),
                    ));
                };
                let composed: DynProcedure = if stage.name == "boost_level" {
                    Arc::new(Boosted::new(base, gamma)?)
                } else {
                    Arc::new(UnionBatches::new(base, gamma)?)
                };
                (composed, stage.pin)
            }
            "monotonize" => {
                reject_unknown_keys(stage.name, &stage.params, &["alpha_min", "grid_len"])?;
                let Some((base, pin)) = current else {
                    return Err(Error::config(
                        "procedure",
                        "monotonize requires a preceding stage to monotonize",
                    ));
                };
                let family = materialize(base, pin)?;
                let mut alpha_min = DEFAULT_MONOTONIZE_ALPHA_MIN;
                let mut grid_len = DEFAULT_MONOTONIZE_GRID_LEN;
                for (k, v) in &stage.params {
                    match *k {
                        "alpha_min" => alpha_min = param_f64(stage.name, k, v)?,
                        "grid_len" => grid_len = param_usize(stage.name, k, v)?,
                        _ => unreachable!(),
                    }
                }
                (Monotonized::shared(family, alpha_min, grid_len)?, stage.pin)
            }
            other => return Err(unknown("procedure", other, KNOWN_PROCEDURES)),
        });
    }
    let (proc_, pin) = current.ok_or_else(|| Error::config("procedure", "empty pipeline"))?;
    Ok((proc_, pin))
}

fn split_pipeline(s: &str) -> Vec<String> {
    // "->" is two characters, so split on a depth-zero marker manually.
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let bytes = s.as_bytes();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => depth += 1,
            b')' => depth = depth.saturating_sub(1),
            b'-' if depth == 0 && i + 1 < bytes.len() && bytes[i + 1] == b'>' => {
                parts.push(s[start..i].to_string());
                i += 2;
                start = i;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    parts.push(s[start..].to_string());
    parts
}

fn materialize(proc_: DynProcedure, pin: Option<f64>) -> Result<DynProcedure> {
    match pin {
        Some(gamma) => FixedLevel::shared(proc_, gamma),
        None => Ok(proc_),
    }
}

fn build_generator(stage: &Stage<'_>) -> Result<DynProcedure> {
    match stage.name {
        "zinterval" => {
            reject_unknown_keys(stage.name, &stage.params, &["sigma"])?;
            let sigma = match stage.params.iter().find(|(k, _)| *k == "sigma") {
                Some((_, v)) => param_f64(stage.name, "sigma", v)?,
                None => 1.0,
            };
            ZInterval::shared(sigma)
        }
        "wald" => {
            reject_unknown_keys(stage.name, &stage.params, &["est", "sigma"])?;
            let (_, est_spec) = stage
                .params
                .iter()
                .find(|(k, _)| *k == "est")
                .ok_or_else(|| Error::config("procedure", "wald requires est=<estimator>"))?;
            let est = parse_zoo_estimator(strip_parens(est_spec))?;
            let sigma = match stage.params.iter().find(|(k, _)| *k == "sigma") {
                Some((_, v)) => param_f64(stage.name, "sigma", v)?,
                None => 1.0,
            };
            WaldAround::shared(est, sigma)
        }
        "hulc" => {
            reject_unknown_keys(stage.name, &stage.params, &["est", "delta", "shuffle"])?;
            let (_, est_spec) = stage
                .params
                .iter()
                .find(|(k, _)| *k == "est")
                .ok_or_else(|| Error::config("procedure", "hulc requires est=<estimator>"))?;
            let mut delta = 0.0;
            let mut shuffle = false;
            for (k, v) in &stage.params {
                match *k {
                    "delta" => delta = param_f64(stage.name, k, v)?,
                    "shuffle" => shuffle = param_bool(stage.name, k, v)?,
                    _ => {}
                }
            }
            let est_spec = strip_parens(est_spec);
            // Zoo estimators keep their kind so exact-miscoverage oracles
            // apply; wrapper estimators compose without an oracle.
            match parse_zoo_estimator(est_spec) {
                Ok(zoo) => BatchMinMax::shared_zoo(zoo, delta, shuffle),
                Err(zoo_err) => {
                    if est_spec.starts_with("endpoint(") || est_spec.starts_with("extract(") {
                        let est = parse_estimator(est_spec)?;
                        Ok(Arc::new(BatchMinMax::from_estimator(est, delta, shuffle)?))
                    } else {
                        Err(zoo_err)
                    }
                }
            }
        }
        _ => unreachable!("callers dispatch on generator names"),
    }
}

/// Parses a procedure pipeline spec string. A trailing `@level` pins the
/// whole pipeline at that level (it will ignore the level it is queried
/// at), which is how negative controls freeze a working level.
pub fn parse_procedure(spec: &str) -> Result<DynProcedure> {
    let (proc_, pin) = parse_pipeline(spec)?;
    materialize(proc_, pin)
}

/// Parsed procedure plus the trailing pin, for callers that need the pin
/// separately (the duality harness consumes it as the stage-1 level).
pub fn parse_procedure_with_pin(spec: &str) -> Result<(DynProcedure, Option<f64>)> {
    parse_pipeline(spec)
}
