//! CSV and SVG artifacts.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use multistrain_core::{ControlSchedule, TimeGrid, Trajectory, TrajectorySummary};

use crate::error::CliError;

/// Upper bound on points per chart series.
pub const MAX_CHART_POINTS: usize = 5000;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Csv {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// 17 significant digits: parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_header(n_strains: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "P".to_string()];
    for j in 1..=n_strains {
        for c in ["S", "E", "I", "R"] {
            h.push(format!("{c}_{j}"));
        }
    }
    h.push("u".into());
    h
}

/// One row per grid point: `t, P, S_j, E_j, I_j, R_j ..., u`.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    w.write_record(trajectory_header(traj.n_strains()))
        .map_err(csv_err(path))?;
    let mut row = Vec::with_capacity(4 * traj.n_strains() + 3);
    for (state, u) in traj.states.iter().zip(&traj.controls) {
        row.clear();
        row.push(fmt_f64(state.t));
        row.push(fmt_f64(state.population));
        for (j, c) in state.strains.iter().enumerate() {
            row.push(fmt_f64(state.susceptible_raw(j)));
            row.push(fmt_f64(c.exposed));
            row.push(fmt_f64(c.infected));
            row.push(fmt_f64(c.removed));
        }
        row.push(fmt_f64(*u));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// A numeric CSV read back into memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_numeric_csv(path: &Path) -> Result<Table, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| CliError::Csv {
                    path: path.to_path_buf(),
                    message: format!("row {}: `{f}` is not a number", line + 2),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Reads a control schedule from a CSV with `t` and `u` columns, one row per
/// point of `grid`. A trajectory CSV written by this crate qualifies.
pub fn read_schedule(path: &Path, grid: &TimeGrid) -> Result<ControlSchedule, CliError> {
    let table = read_numeric_csv(path)?;
    let bad = |message: String| CliError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let (t, u) = match (table.column("t"), table.column("u")) {
        (Some(t), Some(u)) => (t, u),
        _ => return Err(bad("needs columns `t` and `u`".into())),
    };
    if t.len() != grid.len() {
        return Err(bad(format!(
            "{} rows, the grid has {} points",
            t.len(),
            grid.len()
        )));
    }
    for (k, tk) in t.iter().enumerate() {
        if (tk - grid.time(k)).abs() > 1e-6 * grid.dt() {
            return Err(bad(format!(
                "row {}: t = {tk}, expected {}",
                k + 2,
                grid.time(k)
            )));
        }
    }
    ControlSchedule::new(*grid, u).map_err(|e| CliError::Validation {
        field: "control.path".into(),
        message: format!("{}: {e}", path.display()),
    })
}

/// Extra columns appended to every summary row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunExtras {
    pub mean_u: f64,
    pub objective: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
}

pub const SUMMARY_HEADER: &[&str] = &[
    "strain",
    "peak_infected",
    "peak_day",
    "dominant_at_peak",
    "S_share",
    "S_spread",
    "E_share",
    "E_spread",
    "I_share",
    "I_spread",
    "R_share",
    "R_spread",
    "deaths",
    "death_share",
    "mean_u",
    "objective",
    "converged",
    "iterations",
];

/// Summary fields per strain, in `SUMMARY_HEADER` order. Strains count from 1.
pub fn summary_records(summary: &TrajectorySummary, extras: &RunExtras) -> Vec<Vec<String>> {
    summary
        .strains
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let mut r = vec![
                (j + 1).to_string(),
                fmt_f64(s.peak_infected),
                fmt_f64(s.peak_day),
                (s.dominant_at_peak + 1).to_string(),
            ];
            for share in [s.susceptible, s.exposed, s.infected, s.removed] {
                r.push(fmt_f64(share.mean));
                r.push(fmt_f64(share.spread));
            }
            r.push(fmt_f64(summary.deaths));
            r.push(fmt_f64(summary.death_share()));
            r.push(fmt_f64(extras.mean_u));
            r.push(extras.objective.map(fmt_f64).unwrap_or_default());
            r.push(extras.converged.map(|c| c.to_string()).unwrap_or_default());
            r.push(extras.iterations.map(|i| i.to_string()).unwrap_or_default());
            r
        })
        .collect()
}

/// Writes records under `header`.
pub fn write_records(
    path: &Path,
    header: &[&str],
    records: &[Vec<String>],
) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    w.write_record(header).map_err(csv_err(path))?;
    for r in records {
        w.write_record(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Grid indices kept for charts: at most `max` points, evenly strided,
/// always including the last one.
pub fn downsample_indices(len: usize, max: usize) -> Vec<usize> {
    if len == 0 || max == 0 {
        return Vec::new();
    }
    if len <= max {
        return (0..len).collect();
    }
    if max == 1 {
        return vec![len - 1];
    }
    let stride = (len - 1).div_ceil(max - 1).max(1);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if *idx.last().expect("nonempty") != len - 1 {
        idx.push(len - 1);
    }
    idx
}

pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

const PALETTE: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// A line chart as SVG 1.1 with one `<polyline>` per series.
pub fn line_chart_svg(title: &str, y_label: &str, t: &[f64], series: &[Series]) -> String {
    let (w, h) = (800.0, 480.0);
    let (left, right, top, bottom) = (70.0, 160.0, 40.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let idx = downsample_indices(t.len(), MAX_CHART_POINTS);
    let (t0, t1) = (
        t.first().copied().unwrap_or(0.0),
        t.last().copied().unwrap_or(1.0),
    );
    let t_span = if t1 > t0 { t1 - t0 } else { 1.0 };
    let y_max = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let y_max = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };
    let x_of = |v: f64| left + pw * (v - t0) / t_span;
    let y_of = |v: f64| top + ph * (1.0 - v / y_max);

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<path d="M{left} {top} V{} H{}" fill="none" stroke="black"/>"#,
        top + ph,
        left + pw
    );
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let (tx, yv) = (t0 + frac * t_span, frac * y_max);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            x_of(tx),
            top + ph + 16.0,
            format_tick(tx)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            left - 6.0,
            y_of(yv) + 4.0,
            format_tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">day</text>"#,
        left + pw / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );

    for (n, s) in series.iter().enumerate() {
        let color = PALETTE[n % PALETTE.len()];
        let mut pts = String::with_capacity(idx.len() * 16);
        for &k in &idx {
            let v = s.values.get(k).copied().unwrap_or(f64::NAN);
            if v.is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", x_of(t[k]), y_of(v));
            }
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            pts.trim_end(),
            escape(&s.label)
        );
        let ly = top + 14.0 + 18.0 * n as f64;
        let lx = left + pw + 14.0;
        let _ = writeln!(
            out,
            r#"<path d="M{lx} {ly} h20" stroke="{color}" stroke-width="3"/><text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn format_tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 0.01 && v.abs() < 1e5) {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

type Reader = fn(&multistrain_core::EpidemicState, usize) -> f64;

/// Compartment shares of `P(0)` for every strain.
pub fn shares_chart(traj: &Trajectory) -> String {
    let p0 = traj.initial_population();
    let t: Vec<f64> = traj.states.iter().map(|s| s.t).collect();
    let mut series = Vec::new();
    for j in 0..traj.n_strains() {
        let pick: [(&str, Reader); 4] = [
            ("S", |s, j| s.susceptible_raw(j)),
            ("E", |s, j| s.strains[j].exposed),
            ("I", |s, j| s.strains[j].infected),
            ("R", |s, j| s.strains[j].removed),
        ];
        for (name, f) in pick {
            series.push(Series {
                label: format!("{name}_{}", j + 1),
                values: traj.states.iter().map(|s| f(s, j) / p0).collect(),
            });
        }
    }
    line_chart_svg(
        "Compartments as shares of P(0)",
        "share of P(0)",
        &t,
        &series,
    )
}

pub fn control_chart(traj: &Trajectory) -> String {
    let t: Vec<f64> = traj.states.iter().map(|s| s.t).collect();
    let series = [Series {
        label: "u".into(),
        values: traj.controls.clone(),
    }];
    line_chart_svg("Lockdown level", "u", &t, &series)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsample_bounds() {
        assert_eq!(downsample_indices(3, 5000), vec![0, 1, 2]);
        for len in [5001, 14_601, 29_201, 10_000_000] {
            let idx = downsample_indices(len, MAX_CHART_POINTS);
            assert!(idx.len() <= MAX_CHART_POINTS, "{len}: {}", idx.len());
            assert_eq!(idx[0], 0);
            assert_eq!(*idx.last().unwrap(), len - 1);
            assert!(idx.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(downsample_indices(0, 10).is_empty());
    }

    #[test]
    fn float_format_round_trips() {
        for x in [
            0.0,
            1.0 / 3.0,
            217_000_255.0,
            1e-300,
            -2.5e-9,
            f64::MIN_POSITIVE,
            0.1 + 0.2,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let series: Vec<Series> = (0..3)
            .map(|i| Series {
                label: format!("s<{i}>"),
                values: t.iter().map(|x| x * i as f64).collect(),
            })
            .collect();
        let svg = line_chart_svg("a & b", "y", &t, &series);
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("a &amp; b"));
        assert!(!svg.contains("s<0>"));
    }
}
