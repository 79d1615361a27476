//! Diagnostic outputs: CSV tables and small self-contained SVG charts. Both
//! are fully deterministic functions of their inputs (fixed palette, fixed
//! precision, no timestamps) so repeated runs produce identical bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::stats::{format_rounded, RunStats};
use crate::CoverageReport;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scatter report needs at least two components per projection, got {got}")]
    NeedsTwoComponents { got: usize },
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ReportError + '_ {
    move |source| ReportError::Csv { path: path.to_path_buf(), source }
}

/// Formats with (at least) the given number of significant digits, fixed
/// notation. Stable across runs; used for every float written to a report.
pub fn fmt_sig(x: f64, digits: u32) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// id,pc1,pc2,source rows for a 2-D projection scatter.
pub fn write_pca_csv(
    path: &Path,
    ids: &[String],
    projections: &[Vec<f64>],
    sources: &[String],
) -> Result<(), ReportError> {
    if projections.iter().any(|p| p.len() < 2) {
        let got = projections.iter().map(Vec::len).min().unwrap_or(0);
        return Err(ReportError::NeedsTwoComponents { got });
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["id", "pc1", "pc2", "source"]).map_err(csv_err(path))?;
    for ((id, proj), source) in ids.iter().zip(projections).zip(sources) {
        w.write_record([id, &fmt_sig(proj[0], 6), &fmt_sig(proj[1], 6), source])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

/// id,coverage,bin rows, one per query.
pub fn write_coverage_csv(
    path: &Path,
    ids: &[String],
    report: &CoverageReport,
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["id", "coverage", "bin"]).map_err(csv_err(path))?;
    for (i, id) in ids.iter().enumerate() {
        w.write_record([
            id.as_str(),
            &fmt_sig(report.coverage[i], 6),
            &report.bin_index[i].to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

/// Per-bin summary: bin,lo,hi,count,mean_coverage (empty cell for an empty
/// bin).
pub fn write_coverage_bins_csv(path: &Path, report: &CoverageReport) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["bin", "lo", "hi", "count", "mean_coverage"]).map_err(csv_err(path))?;
    for b in 0..report.bin_counts.len() {
        let mean = report.bin_mean_coverage[b].map(|m| fmt_sig(m, 6)).unwrap_or_default();
        w.write_record([
            b.to_string(),
            fmt_sig(report.bin_edges[b], 6),
            fmt_sig(report.bin_edges[b + 1], 6),
            report.bin_counts[b].to_string(),
            mean,
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

/// label,mean,std,min,max rows at three decimals, half-even.
pub fn write_size_sweep_csv(
    path: &Path,
    rows: &[(String, RunStats)],
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["label", "mean", "std", "min", "max"]).map_err(csv_err(path))?;
    for (label, s) in rows {
        w.write_record([
            label.as_str(),
            &format_rounded(s.mean, 3),
            &format_rounded(s.std, 3),
            &format_rounded(s.min, 3),
            &format_rounded(s.max, 3),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const PALETTE: [&str; 8] = [
    "#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#b279a2", "#ff9da6", "#9d755d",
];

/// Plot frame mapping data coordinates to pixels.
struct Frame {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

const X0: f64 = 60.0;
const Y0: f64 = 40.0;
const PLOT_W: f64 = WIDTH - X0 - 20.0;
const PLOT_H: f64 = HEIGHT - Y0 - 50.0;

impl Frame {
    fn bounded(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>) -> Frame {
        let mut f = Frame { xmin: f64::INFINITY, xmax: f64::NEG_INFINITY, ymin: f64::INFINITY, ymax: f64::NEG_INFINITY };
        for x in xs {
            f.xmin = f.xmin.min(x);
            f.xmax = f.xmax.max(x);
        }
        for y in ys {
            f.ymin = f.ymin.min(y);
            f.ymax = f.ymax.max(y);
        }
        if !f.xmin.is_finite() || f.xmin == f.xmax {
            let c = if f.xmin.is_finite() { f.xmin } else { 0.0 };
            f.xmin = c - 1.0;
            f.xmax = c + 1.0;
        }
        if !f.ymin.is_finite() || f.ymin == f.ymax {
            let c = if f.ymin.is_finite() { f.ymin } else { 0.0 };
            f.ymin = c - 1.0;
            f.ymax = c + 1.0;
        }
        let (px, py) = ((f.xmax - f.xmin) * 0.05, (f.ymax - f.ymin) * 0.05);
        f.xmin -= px;
        f.xmax += px;
        f.ymin -= py;
        f.ymax += py;
        f
    }

    fn px(&self, x: f64) -> f64 {
        X0 + (x - self.xmin) / (self.xmax - self.xmin) * PLOT_W
    }

    fn py(&self, y: f64) -> f64 {
        Y0 + PLOT_H - (y - self.ymin) / (self.ymax - self.ymin) * PLOT_H
    }
}

fn svg_open(out: &mut String, title: &str) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
}

fn svg_axes(out: &mut String, frame: &Frame) {
    out.push_str(&format!(
        "<line x1=\"{X0}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333333\"/>\n",
        Y0 + PLOT_H,
        X0 + PLOT_W,
        Y0 + PLOT_H
    ));
    out.push_str(&format!(
        "<line x1=\"{X0}\" y1=\"{Y0}\" x2=\"{X0}\" y2=\"{}\" stroke=\"#333333\"/>\n",
        Y0 + PLOT_H
    ));
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = frame.xmin + t * (frame.xmax - frame.xmin);
        let yv = frame.ymin + t * (frame.ymax - frame.ymin);
        let xp = fmt_sig(frame.px(xv), 6);
        let yp = fmt_sig(frame.py(yv), 6);
        out.push_str(&format!(
            "<text x=\"{xp}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
            Y0 + PLOT_H + 16.0,
            fmt_sig(xv, 3)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{yp}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
            X0 - 6.0,
            fmt_sig(yv, 3)
        ));
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// 2-D scatter, one color per series (sorted by series name).
pub fn scatter_svg(series: &BTreeMap<String, Vec<(f64, f64)>>, title: &str) -> String {
    let mut out = String::new();
    svg_open(&mut out, title);
    let frame = Frame::bounded(
        series.values().flatten().map(|p| p.0),
        series.values().flatten().map(|p| p.1),
    );
    svg_axes(&mut out, &frame);
    for (i, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for &(x, y) in points {
            out.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\" fill-opacity=\"0.7\"/>\n",
                fmt_sig(frame.px(x), 6),
                fmt_sig(frame.py(y), 6)
            ));
        }
        let ly = Y0 + 14.0 * i as f64;
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
            X0 + PLOT_W - 110.0,
            ly
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
            X0 + PLOT_W - 96.0,
            ly + 9.0,
            escape(name)
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Vertical bar chart of labeled counts, in the given order.
pub fn histogram_svg(bars: &[(String, usize)], title: &str) -> String {
    let mut out = String::new();
    svg_open(&mut out, title);
    let top = bars.iter().map(|b| b.1).max().unwrap_or(0).max(1) as f64;
    let n = bars.len().max(1) as f64;
    let slot = PLOT_W / n;
    for (i, (label, count)) in bars.iter().enumerate() {
        let h = *count as f64 / top * PLOT_H;
        let x = X0 + slot * i as f64 + slot * 0.15;
        let y = Y0 + PLOT_H - h;
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
            fmt_sig(x, 6),
            fmt_sig(y, 6),
            fmt_sig(slot * 0.7, 6),
            fmt_sig(h, 6),
            PALETTE[0]
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
            fmt_sig(x + slot * 0.35, 6),
            fmt_sig(y - 4.0, 6),
            count
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
            fmt_sig(x + slot * 0.35, 6),
            Y0 + PLOT_H + 16.0,
            escape(label)
        ));
    }
    out.push_str(&format!(
        "<line x1=\"{X0}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333333\"/>\n",
        Y0 + PLOT_H,
        X0 + PLOT_W,
        Y0 + PLOT_H
    ));
    out.push_str("</svg>\n");
    out
}

/// Mean line with +-std error bars over labeled x positions.
pub fn sweep_svg(rows: &[(String, RunStats)], title: &str) -> String {
    let mut out = String::new();
    svg_open(&mut out, title);
    let frame = Frame::bounded(
        (0..rows.len()).map(|i| i as f64),
        rows.iter().flat_map(|(_, s)| [s.mean - s.std, s.mean + s.std, s.min, s.max]),
    );
    let mut line = String::new();
    for (i, (label, s)) in rows.iter().enumerate() {
        let x = frame.px(i as f64);
        line.push_str(&format!("{},{} ", fmt_sig(x, 6), fmt_sig(frame.py(s.mean), 6)));
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"{3}\" stroke-width=\"1.5\"/>\n",
            fmt_sig(x, 6),
            fmt_sig(frame.py(s.mean - s.std), 6),
            fmt_sig(frame.py(s.mean + s.std), 6),
            PALETTE[3]
        ));
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3.5\" fill=\"{}\"/>\n",
            fmt_sig(x, 6),
            fmt_sig(frame.py(s.mean), 6),
            PALETTE[0]
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
            fmt_sig(x, 6),
            Y0 + PLOT_H + 16.0,
            escape(label)
        ));
    }
    out.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
        line.trim_end(),
        PALETTE[0]
    ));
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let yv = frame.ymin + t * (frame.ymax - frame.ymin);
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
            X0 - 6.0,
            fmt_sig(frame.py(yv), 6),
            fmt_sig(yv, 3)
        ));
    }
    out.push_str(&format!(
        "<line x1=\"{X0}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333333\"/>\n",
        Y0 + PLOT_H,
        X0 + PLOT_W,
        Y0 + PLOT_H
    ));
    out.push_str("</svg>\n");
    out
}
