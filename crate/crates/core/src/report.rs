//! Deterministic output artifacts.
//!
//! JSON objects are written with sorted keys, floats with six significant
//! digits, LF line endings. Every artifact carries [`FORMAT_VERSION`] and
//! the [`RunConfig`] that produced it.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cka::LayerSimilarityMatrix;
use crate::clustering::SweepRow;
use crate::error::Result;
use crate::pipeline::PipelineReport;

pub const FORMAT_VERSION: u32 = 1;

/// The resolved settings of one invocation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub settings: BTreeMap<String, Value>,
}

impl RunConfig {
    pub fn new(command: impl Into<String>) -> Self {
        RunConfig {
            command: command.into(),
            settings: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.settings.insert(key.to_string(), v);
    }

    fn to_json_line(&self) -> String {
        let mut s = String::new();
        write_value(
            &mut s,
            &serde_json::to_value(self).expect("plain data"),
            None,
            0,
        );
        s
    }
}

/// `%g`-style formatting with six significant digits; integral values keep
/// a trailing `.0` so they stay floats.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0.0".into();
    }
    if !x.is_finite() {
        return "null".into();
    }
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let mut s = format!("{:.*}", decimals, x);
        if s.contains('.') {
            while s.ends_with('0') {
                s.pop();
            }
        }
        if s.ends_with('.') {
            s.push('0');
        } else if !s.contains('.') {
            s.push_str(".0");
        }
        s
    } else {
        let mut m = mantissa.to_string();
        if m.contains('.') {
            while m.ends_with('0') {
                m.pop();
            }
            if m.ends_with('.') {
                m.pop();
            }
        }
        format!("{m}e{exp}")
    }
}

fn write_number(out: &mut String, n: &serde_json::Number) {
    if n.is_u64() || n.is_i64() {
        out.push_str(&n.to_string());
    } else {
        out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
    }
}

fn indent(out: &mut String, level: usize) {
    out.push('\n');
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

/// Pretty-prints with two-space indentation; arrays of scalars stay on one
/// line. `pretty = None` writes compactly.
fn write_value(out: &mut String, v: &Value, pretty: Option<()>, level: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string")),
        Value::Array(items) => {
            out.push('[');
            let flat = pretty.is_none() || items.iter().all(is_scalar);
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                    if flat && pretty.is_some() {
                        out.push(' ');
                    }
                }
                if !flat {
                    indent(out, level + 1);
                }
                write_value(out, item, pretty, level + 1);
            }
            if !flat && !items.is_empty() {
                indent(out, level);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            // serde_json's default map is ordered; sort anyway so the
            // guarantee does not hinge on crate features
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if pretty.is_some() {
                    indent(out, level + 1);
                }
                out.push_str(&serde_json::to_string(k).expect("key"));
                out.push(':');
                if pretty.is_some() {
                    out.push(' ');
                }
                write_value(out, &map[*k], pretty, level + 1);
            }
            if pretty.is_some() && !map.is_empty() {
                indent(out, level);
            }
            out.push('}');
        }
    }
}

/// Serializes `payload` (which must be a JSON object) with `format_version`
/// and `run_config` added.
pub fn render_json<T: Serialize>(payload: &T, config: &RunConfig) -> Result<String> {
    let mut value = serde_json::to_value(payload)?;
    let obj = value.as_object_mut().ok_or_else(|| {
        crate::Error::InvalidArgument("report payload must serialize to a JSON object".into())
    })?;
    obj.insert("format_version".into(), Value::from(FORMAT_VERSION));
    obj.insert("run_config".into(), serde_json::to_value(config)?);
    let mut out = String::new();
    write_value(&mut out, &value, Some(()), 0);
    out.push('\n');
    Ok(out)
}

pub fn write_string(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

pub fn write_json<T: Serialize>(
    path: impl AsRef<Path>,
    payload: &T,
    config: &RunConfig,
) -> Result<()> {
    write_string(path, &render_json(payload, config)?)
}

fn csv_preamble(config: &RunConfig) -> String {
    format!(
        "# format_version={FORMAT_VERSION}\n# run_config={}\n",
        config.to_json_line()
    )
}

/// `threshold,retained,accuracy`, one row per threshold after a `#` preamble.
pub fn render_sweep_csv(rows: &[SweepRow], config: &RunConfig) -> String {
    let mut s = csv_preamble(config);
    s.push_str("ct,retained,accuracy\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{}\n",
            format_float(r.threshold),
            r.retained,
            format_float(r.accuracy)
        ));
    }
    s
}

/// A one-line summary: oracle, LS accuracy, layers used, CCFS accuracy,
/// final neuron count, reduction.
pub fn render_pipeline_csv(report: &PipelineReport, config: &RunConfig) -> String {
    let mut s = csv_preamble(config);
    s.push_str("task,oracle,ls_acc,layers,ccfs_acc,neurons,percent_reduction\n");
    s.push_str(&format!(
        "{},{},{},{},{},{},{}\n",
        report.task,
        format_float(report.oracle_acc),
        format_float(report.ls.per_layer_acc[report.ls.selected_layer]),
        report.ls.layers_used(),
        format_float(report.fs.accuracy.accuracy),
        report.final_neurons,
        format_float(report.percent_reduction),
    ));
    s
}

pub fn render_bench_csv(rows: &[crate::bench::BenchRow], config: &RunConfig) -> String {
    let mut s = csv_preamble(config);
    s.push_str("features,tokens,seconds\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{}\n",
            r.features,
            r.tokens,
            format_float(r.seconds)
        ));
    }
    s
}

/// Binary PGM, one pixel per layer pair, `round(255 * similarity)`.
pub fn render_heatmap_pgm(sim: &LayerSimilarityMatrix, config: &RunConfig) -> Vec<u8> {
    let l = sim.layers();
    let mut out = format!(
        "P5\n# format_version={FORMAT_VERSION} run_config={}\n{l} {l}\n255\n",
        config.to_json_line()
    )
    .into_bytes();
    for row in sim.rows() {
        for &v in row {
            out.push((255.0 * v).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}
