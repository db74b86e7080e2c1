//! Trace serialization: the per-iteration CSV, the JSON sidecar with full
//! vectors, the run summary, and an SVG convergence plot.
//!
//! Floats are written through the standard shortest-round-trip formatter, so
//! a written value parses back to the identical bit pattern and two runs
//! with the same configuration and seed produce byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

use crate::iteration::IterationTrace;
use crate::space::Space;

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed trace: {0}")]
    Malformed(String),
}

const BASE_COLUMNS: [&str; 8] =
    ["n", "step_norm", "phi_anchor", "residual_xy", "residual_fp", "cert_eq", "cert_vi", "cert_R"];

/// Renders the per-iteration CSV. The `sol_dist` column appears only when
/// the instance had a known solution to measure against.
pub fn trace_to_csv(trace: &IterationTrace) -> String {
    let with_sol = trace.records.first().map_or(false, |r| r.solution_distance.is_some());
    let mut out = String::new();
    out.push_str(&BASE_COLUMNS.join(","));
    if with_sol {
        out.push_str(",sol_dist");
    }
    out.push('\n');
    for r in &trace.records {
        write!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n,
            r.step_norm,
            r.phi_anchor,
            r.residual_xy,
            r.residual_fixed_point,
            r.cert_eq,
            r.cert_vi,
            r.cert_retraction
        )
        .expect("writing to a String cannot fail");
        if with_sol {
            write!(out, ",{}", r.solution_distance.unwrap_or(f64::NAN))
                .expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

pub fn write_trace_csv(trace: &IterationTrace, path: &Path) -> Result<(), TraceIoError> {
    std::fs::write(path, trace_to_csv(trace))?;
    Ok(())
}

/// The sidecar keeps everything the CSV flattens away: full iterate vectors,
/// the terminal status, and the failure context. It lives next to the CSV
/// with the extension swapped to `.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_trace_sidecar(trace: &IterationTrace, csv_path: &Path) -> Result<PathBuf, TraceIoError> {
    let path = sidecar_path(csv_path);
    let mut text = serde_json::to_string_pretty(trace)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Condensed run outcome: status, completed iterations, the final residuals
/// and the final iterate's norm.
pub fn summary_json(trace: &IterationTrace, space: &Space) -> serde_json::Value {
    let last = trace.records.last().expect("a trace always has records");
    let mut value = json!({
        "terminal_status": trace.terminal_status,
        "iterations": trace.iterations,
        "final_norm": space.norm(&trace.final_point),
        "final_step_norm": last.step_norm,
        "final_residual_xy": last.residual_xy,
        "final_residual_fp": last.residual_fixed_point,
    });
    if let Some(d) = last.solution_distance {
        value["final_sol_dist"] = json!(d);
    }
    if let Some(f) = &trace.failure {
        value["failure"] = json!(f);
    }
    value
}

pub fn write_summary(trace: &IterationTrace, space: &Space, path: &Path) -> Result<(), TraceIoError> {
    let mut text = serde_json::to_string_pretty(&summary_json(trace, space))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// A parsed trace CSV: header names plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn parse_trace_csv(text: &str) -> Result<TraceTable, TraceIoError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| TraceIoError::Malformed("trace file is empty".into()))?;
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    if !columns.iter().any(|c| c == "n") {
        return Err(TraceIoError::Malformed("header has no 'n' column".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| TraceIoError::Malformed(format!("row {}: cell '{cell}' is not a number", i + 2)))
            })
            .collect::<Result<_, _>>()?;
        if row.len() != columns.len() {
            return Err(TraceIoError::Malformed(format!(
                "row {} has {} cells, header has {}",
                i + 2,
                row.len(),
                columns.len()
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(TraceIoError::Malformed("trace has a header but no data rows".into()));
    }
    Ok(TraceTable { columns, rows })
}

pub fn read_trace_csv(path: &Path) -> Result<TraceTable, TraceIoError> {
    parse_trace_csv(&std::fs::read_to_string(path)?)
}

/// The diagnostic series a plot shows when the trace carries them, with a
/// fixed color per series.
const PLOT_SERIES: [(&str, &str); 4] = [
    ("step_norm", "#1f77b4"),
    ("residual_xy", "#d62728"),
    ("residual_fp", "#2ca02c"),
    ("sol_dist", "#9467bd"),
];

/// Renders a log-scale convergence plot of the table's diagnostic columns.
/// Nonpositive values cannot sit on a log axis and are skipped; a column
/// missing from the header is omitted along with its legend entry.
pub fn plot_svg(table: &TraceTable) -> Result<String, TraceIoError> {
    if table.rows.is_empty() {
        return Err(TraceIoError::Malformed("cannot plot an empty trace".into()));
    }
    let ns = table
        .column("n")
        .ok_or_else(|| TraceIoError::Malformed("header has no 'n' column".into()))?;

    // Gather (n, log10 value) per available series.
    let mut series: Vec<(&str, &str, Vec<(f64, f64)>)> = Vec::new();
    for (name, color) in PLOT_SERIES {
        if let Some(vals) = table.column(name) {
            let pts: Vec<(f64, f64)> = ns
                .iter()
                .zip(&vals)
                .filter(|(_, v)| v.is_finite() && **v > 0.0)
                .map(|(n, v)| (*n, v.log10()))
                .collect();
            series.push((name, color, pts));
        }
    }

    let (width, height) = (880.0, 520.0);
    let (left, right, top, bottom) = (70.0, 700.0, 30.0, 470.0);

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    for n in &ns {
        x_min = x_min.min(*n);
        x_max = x_max.max(*n);
    }
    if x_max - x_min < 1.0 {
        x_max = x_min + 1.0;
    }
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, _, pts) in &series {
        for (_, ly) in pts {
            y_min = y_min.min(*ly);
            y_max = y_max.max(*ly);
        }
    }
    if y_min > y_max {
        // No positive data anywhere: keep a default window so axes render.
        y_min = -8.0;
        y_max = 0.0;
    }
    y_min -= 0.5;
    y_max += 0.5;

    let sx = |n: f64| left + (n - x_min) / (x_max - x_min) * (right - left);
    let sy = |ly: f64| bottom - (ly - y_min) / (y_max - y_min) * (bottom - top);

    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    )
    .unwrap();
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Decade grid lines and y labels.
    let mut decade = y_min.ceil() as i64;
    let span = (y_max - y_min).ceil() as i64;
    let step = (span / 10).max(1);
    while (decade as f64) <= y_max {
        let y = sy(decade as f64);
        write!(
            svg,
            "<line x1=\"{left}\" y1=\"{y:.1}\" x2=\"{right}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{decade}</text>\n",
            left - 6.0,
            y + 4.0
        )
        .unwrap();
        decade += step;
    }
    // x ticks.
    for k in 0..=6 {
        let n = x_min + (x_max - x_min) * k as f64 / 6.0;
        let x = sx(n);
        write!(
            svg,
            "<line x1=\"{x:.1}\" y1=\"{bottom}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#bbbbbb\"/>\n\
             <text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.0}</text>\n",
            bottom + 5.0,
            bottom + 20.0,
            n
        )
        .unwrap();
    }
    // Axes.
    write!(
        svg,
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{bottom}\" stroke=\"black\"/>\n\
         <line x1=\"{left}\" y1=\"{bottom}\" x2=\"{right}\" y2=\"{bottom}\" stroke=\"black\"/>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">n</text>\n",
        0.5 * (left + right),
        height - 8.0
    )
    .unwrap();

    // Series polylines and legend.
    let mut legend_y = top + 10.0;
    for (name, color, pts) in &series {
        if pts.len() >= 2 {
            let mut path = String::new();
            for (n, ly) in pts {
                write!(path, "{:.2},{:.2} ", sx(*n), sy(*ly)).unwrap();
            }
            write!(
                svg,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                path.trim_end()
            )
            .unwrap();
        }
        write!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{legend_y:.1}\" x2=\"{:.1}\" y2=\"{legend_y:.1}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\">{name}</text>\n",
            right + 14.0,
            right + 44.0,
            right + 50.0,
            legend_y + 4.0
        )
        .unwrap();
        legend_y += 18.0;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_plot(table: &TraceTable, path: &Path) -> Result<(), TraceIoError> {
    std::fs::write(path, plot_svg(table)?)?;
    Ok(())
}
