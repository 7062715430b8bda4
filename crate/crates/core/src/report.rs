//! Results persistence and charting.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::SimError;
use crate::sweep::{AggregateRow, TrialRow};

pub const RESULTS_HEADER: [&str; 13] = [
    "condition",
    "rows",
    "cols",
    "n_batch",
    "trial",
    "seed",
    "t_session_s",
    "n_new",
    "n_overview",
    "n_view",
    "n_single",
    "n_global",
    "n_rank",
];

/// Writes trial rows as CSV. `t_session` uses the shortest lossless float
/// representation, so a read-back reproduces the rows exactly.
pub fn write_results_csv<W: Write>(rows: &[TrialRow], writer: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(writer);
    let fail = |e: csv::Error| SimError::Parse {
        line: 0,
        message: e.to_string(),
    };
    w.write_record(RESULTS_HEADER).map_err(fail)?;
    for r in rows {
        w.write_record([
            r.condition.as_str(),
            &r.rows.to_string(),
            &r.cols.to_string(),
            &r.n_batch.to_string(),
            &r.trial.to_string(),
            &r.seed.to_string(),
            &format!("{:?}", r.t_session),
            &r.n_new.to_string(),
            &r.n_overview.to_string(),
            &r.n_view.to_string(),
            &r.n_single.to_string(),
            &r.n_global.to_string(),
            &r.n_rank.to_string(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| SimError::io("results csv", e))?;
    Ok(())
}

pub fn read_results_csv<R: Read>(source: R) -> Result<Vec<TrialRow>, SimError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    {
        let headers = reader.headers().map_err(|e| SimError::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        for column in RESULTS_HEADER {
            if !headers.iter().any(|h| h == column) {
                return Err(SimError::Parse {
                    line: 1,
                    message: format!("missing column '{column}'"),
                });
            }
        }
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.deserialize::<TrialRow>().enumerate() {
        rows.push(record.map_err(|e| SimError::Parse {
            line: idx + 2,
            message: e.to_string(),
        })?);
    }
    Ok(rows)
}

/// Writes to a temp file in the target's directory, then renames into
/// place, so readers never observe a half-written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), SimError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir),
        None => tempfile::NamedTempFile::new_in("."),
    }
    .map_err(|e| SimError::io(&path.display().to_string(), e))?;
    tmp.write_all(contents)
        .and_then(|_| tmp.flush())
        .map_err(|e| SimError::io(&path.display().to_string(), e))?;
    tmp.persist(path)
        .map_err(|e| SimError::io(&path.display().to_string(), e.error))?;
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    "#7f7f7f",
];

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders a layout/time chart: one polyline per condition over batch
/// size, with +-1 sample standard deviation error bars.
pub fn render_chart_svg(
    title: &str,
    aggregates: &[AggregateRow],
) -> Result<String, SimError> {
    if aggregates.is_empty() {
        return Err(SimError::InvalidConfig(
            "cannot chart an empty aggregate".into(),
        ));
    }
    let width = 760.0;
    let height = 480.0;
    let left = 70.0;
    let right = 30.0;
    let top = 50.0;
    let bottom = 70.0;
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    // Condition order as first seen; x positions by distinct batch size.
    let mut conditions: Vec<&str> = Vec::new();
    let mut batches: Vec<usize> = Vec::new();
    for a in aggregates {
        if !conditions.contains(&a.condition.as_str()) {
            conditions.push(&a.condition);
        }
        if !batches.contains(&a.n_batch) {
            batches.push(a.n_batch);
        }
    }
    batches.sort_unstable();

    let mut y_max = aggregates
        .iter()
        .map(|a| a.mean_t + a.std_t)
        .fold(0.0f64, f64::max);
    if y_max <= 0.0 {
        y_max = 1.0;
    }
    y_max *= 1.05;

    let x_of = |n_batch: usize| -> f64 {
        if batches.len() == 1 {
            return left + plot_w / 2.0;
        }
        let idx = batches.iter().position(|&b| b == n_batch).unwrap();
        left + plot_w * idx as f64 / (batches.len() - 1) as f64
    };
    let y_of = |t: f64| -> f64 { top + plot_h * (1.0 - t / y_max) };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" \
         font-family=\"sans-serif\">{}</text>\n",
        width / 2.0,
        xml_escape(title)
    ));
    // Axes.
    svg.push_str(&format!(
        "  <line x1=\"{left}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        top + plot_h,
        left + plot_w
    ));
    svg.push_str(&format!(
        "  <line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"black\"/>\n",
        top + plot_h
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" \
         font-family=\"sans-serif\">layout (batch size)</text>\n",
        left + plot_w / 2.0,
        height - 12.0
    ));
    svg.push_str(&format!(
        "  <text x=\"18\" y=\"{0}\" text-anchor=\"middle\" font-size=\"12\" \
         font-family=\"sans-serif\" transform=\"rotate(-90 18 {0})\">session time (s)\
         </text>\n",
        top + plot_h / 2.0
    ));
    // Y ticks.
    for i in 0..=4 {
        let t = y_max * i as f64 / 4.0;
        let y = y_of(t);
        svg.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{y}\" x2=\"{left}\" y2=\"{y}\" stroke=\"black\"/>\n",
            left - 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\" \
             font-family=\"sans-serif\">{t:.0}</text>\n",
            left - 9.0,
            y + 4.0
        ));
    }
    // X ticks, labelled "rows x cols (n)".
    for &b in &batches {
        let x = x_of(b);
        let label = aggregates
            .iter()
            .find(|a| a.n_batch == b)
            .map(|a| format!("{}\u{d7}{} ({})", a.rows, a.cols, b))
            .unwrap_or_else(|| b.to_string());
        svg.push_str(&format!(
            "  <line x1=\"{x}\" y1=\"{0}\" x2=\"{x}\" y2=\"{1}\" stroke=\"black\"/>\n",
            top + plot_h,
            top + plot_h + 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{x}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\" \
             font-family=\"sans-serif\">{}</text>\n",
            top + plot_h + 20.0,
            xml_escape(&label)
        ));
    }
    // One polyline plus error bars per condition.
    for (ci, condition) in conditions.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let mut points: Vec<(f64, f64, f64)> = aggregates
            .iter()
            .filter(|a| a.condition == *condition)
            .map(|a| (x_of(a.n_batch), a.mean_t, a.std_t))
            .collect();
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let path: Vec<String> = points
            .iter()
            .map(|&(x, mean, _)| format!("{:.2},{:.2}", x, y_of(mean)))
            .collect();
        svg.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
             stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
        for &(x, mean, std) in &points {
            if std > 0.0 {
                let y_lo = y_of(mean - std);
                let y_hi = y_of(mean + std);
                svg.push_str(&format!(
                    "  <line x1=\"{x:.2}\" y1=\"{y_hi:.2}\" x2=\"{x:.2}\" \
                     y2=\"{y_lo:.2}\" stroke=\"{color}\"/>\n"
                ));
                for y in [y_hi, y_lo] {
                    svg.push_str(&format!(
                        "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
                         stroke=\"{color}\"/>\n",
                        x - 3.0,
                        x + 3.0
                    ));
                }
            }
            svg.push_str(&format!(
                "  <circle cx=\"{x:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>\n",
                y_of(mean)
            ));
        }
        // Legend entry.
        let ly = top + 6.0 + 16.0 * ci as f64;
        let lx = left + plot_w - 150.0;
        svg.push_str(&format!(
            "  <line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" \
             stroke-width=\"1.5\"/>\n",
            lx + 22.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-size=\"11\" font-family=\"sans-serif\">{}\
            </text>\n",
            lx + 28.0,
            ly + 4.0,
            xml_escape(condition)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
