//! On-disk artifacts of a solve: per-extremal CSV files and the summary
//! JSON. All reals are printed with 17 significant digits so the files
//! round-trip and byte-identical reruns are possible.

use anyhow::{anyhow, Context, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use zermelo_core::pmp;
use zermelo_core::shooting::{Extremal, ExtremalField};
use zermelo_core::FlowField;

pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
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

pub fn csv_name(index: usize) -> String {
    format!("extremal_{index:03}.csv")
}

/// Fixed schema: `t,x1,x2,psi1,psi2,mu,u1,u2,mode`, one row per
/// integration step boundary, mode in {I, B+, B-}. Each row carries the
/// control frozen for the step starting there; the final row of an arc
/// has no outgoing step and repeats the last control (the feedback law
/// itself may be undefined there, e.g. at a forced departure).
pub fn write_extremal_csv(extremal: &Extremal, field: &FlowField, eps_sing: f64) -> Result<String> {
    let mut out = String::new();
    out.push_str("t,x1,x2,psi1,psi2,mu,u1,u2,mode\n");
    for arc in &extremal.arcs {
        let seg = &arc.segment;
        for (i, s) in seg.samples.iter().enumerate() {
            let control = seg
                .controls
                .get(i)
                .or_else(|| seg.controls.last())
                .copied()
                .map(Ok)
                .unwrap_or_else(|| pmp::control_law(s, field, eps_sing))
                .with_context(|| format!("control at t={}", s.t))?;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                format_real(s.t),
                format_real(s.x[0]),
                format_real(s.x[1]),
                format_real(s.psi[0]),
                format_real(s.psi[1]),
                format_real(s.mu),
                format_real(control.u[0]),
                format_real(control.u[1]),
                s.mode.label(),
            );
        }
    }
    Ok(out)
}

/// A trajectory read back from a CSV artifact, for plotting.
pub struct CsvTrajectory {
    pub points: Vec<[f64; 2]>,
}

pub fn read_extremal_csv(path: &Path) -> Result<CsvTrajectory> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| anyhow!("empty CSV"))?;
    if header != "t,x1,x2,psi1,psi2,mu,u1,u2,mode" {
        return Err(anyhow!("unexpected CSV header `{header}`"));
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut cols = line.split(',');
        let _t = cols.next();
        let x1: f64 = cols
            .next()
            .ok_or_else(|| anyhow!("row {}: missing x1", i + 2))?
            .parse()
            .with_context(|| format!("row {}: x1", i + 2))?;
        let x2: f64 = cols
            .next()
            .ok_or_else(|| anyhow!("row {}: missing x2", i + 2))?
            .parse()
            .with_context(|| format!("row {}: x2", i + 2))?;
        points.push([x1, x2]);
    }
    Ok(CsvTrajectory { points })
}

/// Fixed summary schema: problem echo, per-extremal records, optimal
/// index, solver diagnostics and the tool version.
pub fn write_summary_json(
    result: &ExtremalField,
    assumption_violated: bool,
    sup_abs_v1: f64,
) -> String {
    let spec = &result.problem;
    let mut s = String::new();
    s.push_str("{\n");
    let _ = writeln!(
        s,
        "  \"tool\": {{\"name\": \"zermelo\", \"version\": \"{}\"}},",
        env!("CARGO_PKG_VERSION")
    );
    s.push_str("  \"problem\": {\n");
    let _ = writeln!(s, "    \"field\": \"{}\",", json_escape(spec.field.id()));
    let _ = writeln!(
        s,
        "    \"field_description\": \"{}\",",
        json_escape(&spec.field.describe())
    );
    let _ = writeln!(
        s,
        "    \"a\": [{}, {}],",
        format_real(spec.a[0]),
        format_real(spec.a[1])
    );
    let _ = writeln!(
        s,
        "    \"b\": [{}, {}],",
        format_real(spec.b[0]),
        format_real(spec.b[1])
    );
    for (key, v) in [
        ("bound", spec.bound),
        ("tau", spec.tau),
        ("theta_step", spec.theta_step),
        ("terminal_tol", spec.terminal_tol),
        ("junction_tol", spec.junction_tol),
        ("eps_sing", spec.eps_sing),
        ("t_max", spec.t_max),
    ] {
        let _ = writeln!(s, "    \"{key}\": {},", format_real(v));
    }
    let _ = writeln!(s, "    \"departure_stride\": {}", spec.departure_stride);
    s.push_str("  },\n");
    let _ = writeln!(
        s,
        "  \"assumption_h\": {{\"violated\": {assumption_violated}, \"sup_abs_v1\": {}}},",
        format_real(sup_abs_v1)
    );
    s.push_str("  \"extremals\": [\n");
    for (i, e) in result.extremals.iter().enumerate() {
        let departures = e
            .departure_times
            .iter()
            .map(|t| format_real(*t))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = write!(
            s,
            "    {{\"index\": {i}, \"csv\": \"{}\", \"theta0\": {}, \"travel_time\": {}, \"classification\": \"{}\", \"lambda\": {}, \"lambda_nonnegative\": {}, \"nontriviality_margin\": {}, \"degenerate\": {}, \"singular_risk_measure\": {}, \"departure_times\": [{departures}], \"terminal_miss\": {}, \"samples\": {}}}",
            csv_name(i),
            format_real(e.theta0),
            format_real(e.travel_time),
            e.classification.label(),
            format_real(e.lambda),
            e.lambda_nonnegative,
            format_real(e.nontriviality_margin),
            e.degenerate,
            format_real(e.singular_report.total_risk_measure),
            format_real(e.terminal_miss),
            e.samples().count(),
        );
        s.push_str(if i + 1 < result.extremals.len() {
            ",\n"
        } else {
            "\n"
        });
    }
    s.push_str("  ],\n");
    match result.optimal_index {
        Some(i) => {
            let _ = writeln!(s, "  \"optimal_index\": {i},");
        }
        None => s.push_str("  \"optimal_index\": null,\n"),
    }
    let d = &result.diagnostics;
    let _ = writeln!(
        s,
        "  \"diagnostics\": {{\"shots_fired\": {}, \"branches_spawned\": {}, \"bisection_iterations\": {}}}",
        d.shots_fired, d.branches_spawned, d.bisection_iterations
    );
    s.push_str("}\n");
    s
}

/// The pieces of a summary the plotter needs.
pub struct SummaryForPlot {
    pub field_description: String,
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub bound: f64,
    pub extremals: Vec<SummaryExtremal>,
    pub optimal_index: Option<usize>,
}

pub struct SummaryExtremal {
    pub csv: PathBuf,
    pub travel_time: f64,
    pub classification: String,
}

pub fn read_summary_json(path: &Path) -> Result<SummaryForPlot> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let problem = &value["problem"];
    let pos = |v: &serde_json::Value, what: &str| -> Result<[f64; 2]> {
        let arr = v
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| anyhow!("summary: bad {what}"))?;
        Ok([
            arr[0]
                .as_f64()
                .ok_or_else(|| anyhow!("summary: bad {what}"))?,
            arr[1]
                .as_f64()
                .ok_or_else(|| anyhow!("summary: bad {what}"))?,
        ])
    };
    let extremals = value["extremals"]
        .as_array()
        .ok_or_else(|| anyhow!("summary: missing extremals"))?
        .iter()
        .map(|e| -> Result<SummaryExtremal> {
            Ok(SummaryExtremal {
                csv: dir.join(
                    e["csv"]
                        .as_str()
                        .ok_or_else(|| anyhow!("summary: extremal without csv"))?,
                ),
                travel_time: e["travel_time"]
                    .as_f64()
                    .ok_or_else(|| anyhow!("summary: extremal without travel_time"))?,
                classification: e["classification"]
                    .as_str()
                    .ok_or_else(|| anyhow!("summary: extremal without classification"))?
                    .to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SummaryForPlot {
        field_description: problem["field_description"]
            .as_str()
            .unwrap_or_default()
            .to_string(),
        a: pos(&problem["a"], "problem.a")?,
        b: pos(&problem["b"], "problem.b")?,
        bound: problem["bound"].as_f64().unwrap_or(1.0),
        extremals,
        optimal_index: value["optimal_index"].as_u64().map(|i| i as usize),
    })
}
