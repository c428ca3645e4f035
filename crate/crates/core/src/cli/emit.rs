//! CSV/JSON curve files and the run report.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::srdf::{CurveRow, SourceKind, SrdfResult};

pub const CSV_HEADER: &str = "delta,rate,lambda,witness";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// `printf("%.9g")`.
pub fn fmt_g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let strip = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip(mant), exp.abs())
    } else {
        strip(&format!("{:.*}", (8 - exp) as usize, x))
    }
}

/// The value a reader recovers from the printed form.
pub fn round_g9(x: f64) -> f64 {
    fmt_g9(x).parse().unwrap_or(x)
}

pub fn csv_string(rows: &[CurveRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", fmt_g9(r.delta), fmt_g9(r.rate), fmt_g9(r.lambda), r.witness));
    }
    out
}

/// Provenance written next to every curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub spec_sha256: String,
    pub seed: u64,
    pub options: Value,
}

fn printed_rows(rows: &[CurveRow]) -> Vec<CurveRow> {
    rows.iter()
        .map(|r| CurveRow {
            delta: round_g9(r.delta),
            rate: round_g9(r.rate),
            lambda: round_g9(r.lambda),
            witness: r.witness.clone(),
        })
        .collect()
}

pub fn json_value(name: &str, rows: &[CurveRow], meta: &RunMetadata) -> Value {
    json!({ "curve": name, "metadata": meta, "rows": printed_rows(rows) })
}

/// Rows of a JSON curve file.
pub fn read_json_rows(text: &str) -> serde_json::Result<Vec<CurveRow>> {
    let v: Value = serde_json::from_str(text)?;
    serde_json::from_value(v["rows"].clone())
}

/// Rows exactly as they read back from either format.
pub fn as_printed(rows: &[CurveRow]) -> Vec<CurveRow> {
    printed_rows(rows)
}

pub fn emit_curve(
    result: &SrdfResult,
    name: &str,
    format: Format,
    dir: &Path,
    grid: usize,
    meta: &RunMetadata,
) -> io::Result<PathBuf> {
    let rows = result.rows(grid).map_err(|e| io::Error::other(e.to_string()))?;
    let path = dir.join(format!("{name}.{}", format.extension()));
    let text = match format {
        Format::Csv => csv_string(&rows),
        Format::Json => serde_json::to_string_pretty(&json_value(name, &rows, meta)).expect("serializable") + "\n",
    };
    fs::write(&path, text)?;
    Ok(path)
}

fn kind_label(k: &SourceKind) -> Value {
    match k {
        SourceKind::Subset(a) => json!({"type": "fixed-set", "subset": a.to_string()}),
        SourceKind::Reduced(a) => json!({"type": "fixed-set-reduced", "subset": a.to_string()}),
        SourceKind::Sampler(h) => json!({
            "type": "point-mass-sampler",
            "encoding": h.encoding(),
            "map": h.assignment().iter().map(|&s| h.subsets()[s].to_string()).collect::<Vec<_>>(),
        }),
        SourceKind::Composite(h) => json!({
            "type": "point-mass-sampler-uninformed",
            "encoding": h.encoding(),
            "map": h.assignment().iter().map(|&s| h.subsets()[s].to_string()).collect::<Vec<_>>(),
        }),
    }
}

/// Report entry: domain, envelope vertices with their witnesses, the source
/// registry (kernels of vertex witnesses only) and solver diagnostics.
pub fn curve_report(name: &str, file: &Path, result: &SrdfResult) -> Value {
    let r = |x: f64| json!(round_g9(x));
    let mut used = vec![Vec::new(); result.sources.len()];
    let vertices: Vec<Value> = result
        .curve
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut seen = Vec::new();
            let w: Vec<Value> = result
                .vertex_witnesses(i)
                .unwrap_or_default()
                .iter()
                .filter(|t| {
                    let fresh = !seen.contains(&t.source);
                    seen.push(t.source);
                    fresh
                })
                .map(|t| {
                    used[t.source].push(t.point);
                    let p = result.point(*t);
                    json!({"source": result.sources[t.source].id, "lambda": r(p.lambda)})
                })
                .collect();
            json!({"delta": r(v.delta), "rate": r(v.rate), "witnesses": w})
        })
        .collect();
    let sources: Vec<Value> = result
        .sources
        .iter()
        .zip(&used)
        .map(|(s, pts)| {
            let witness_points: Vec<Value> = s
                .points
                .iter()
                .enumerate()
                .filter(|(i, _)| pts.contains(i))
                .map(|(_, p)| {
                    json!({
                        "lambda": r(p.lambda),
                        "delta": r(p.delta),
                        "rate": r(p.rate),
                        "branches": p.branches.iter().map(|b| json!({
                            "subset": b.subset.as_ref().map(|a| a.to_string()),
                            "weight": r(b.weight),
                            "kernel": (0..b.kernel.rows()).map(|i| b.kernel.row(i).iter().map(|&v| round_g9(v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
                        })).collect::<Vec<_>>(),
                    })
                })
                .collect();
            json!({
                "id": s.id,
                "kind": kind_label(&s.kind),
                "aliases": s.aliases,
                "points": s.points.len(),
                "witness_points": witness_points,
            })
        })
        .collect();
    let d = &result.diagnostics;
    json!({
        "name": name,
        "kind": result.kind,
        "file": file.file_name().map(|f| f.to_string_lossy().into_owned()),
        "delta_min": r(result.delta_range.delta_min),
        "delta_max": r(result.delta_range.delta_max),
        "convex": result.curve.is_convex(),
        "vertices": vertices,
        "sources": sources,
        "diagnostics": {
            "samplers_enumerated": d.samplers_enumerated,
            "distinct_problems": d.distinct_problems,
            "solver_points": d.solver_points,
            "ba_iterations": d.ba_iterations,
            "nonconverged": d.nonconverged,
            "tangent_rounds": d.tangent_rounds,
            "refine_improved": d.refine_improved,
            "notes": d.notes,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_g9(0.0), "0");
        assert_eq!(fmt_g9(1.0), "1");
        assert_eq!(fmt_g9(1.5515), "1.5515");
        assert_eq!(fmt_g9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_g9(123456789.4), "123456789");
        assert_eq!(fmt_g9(1234567890.0), "1.23456789e+09");
        assert_eq!(fmt_g9(0.0001), "0.0001");
        assert_eq!(fmt_g9(0.00001234), "1.234e-05");
        assert_eq!(fmt_g9(-2.5), "-2.5");
        assert_eq!(fmt_g9(0.9999999999), "1");
        assert_eq!(fmt_g9(64.0), "64");
    }

    #[test]
    fn json_rows_round_trip() {
        let rows = vec![CurveRow { delta: 0.1 + 0.2, rate: 1.0 / 7.0, lambda: 2.0_f64.sqrt(), witness: "h6".into() }];
        let meta = RunMetadata {
            tool: "srdf".into(),
            version: "0".into(),
            command: "test".into(),
            spec_sha256: String::new(),
            seed: 0,
            options: json!({}),
        };
        let text = json_value("c", &rows, &meta).to_string();
        assert_eq!(read_json_rows(&text).unwrap(), as_printed(&rows));
    }
}
