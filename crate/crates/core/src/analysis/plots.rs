//! Static SVG charts. Output depends only on the report, so files are
//! byte-stable across runs.
//!
//! * `item-<item_id>.svg`: answer distribution, one bar per scale point.
//! * `dimensions.svg`: mean score per dimension (only with two or more).
//! * `empty.svg`: written instead of all of the above when nothing was analysed.
//!
//! Every chart is a 480x300 SVG 1.1 document using integer coordinates.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::report::AnalysisReport;
use super::AnalysisError;

const W: i64 = 480;
const H: i64 = 300;
const MARGIN: i64 = 40;
const PLOT_H: i64 = H - 2 * MARGIN;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chart {
    pub file_name: String,
    pub svg: String,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// File-name-safe form of an identifier.
fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"#ffffff\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        W / 2,
        escape(title)
    )
}

/// Bars with integer heights; `values` are non-negative magnitudes.
fn bars(svg: &mut String, labels: &[String], values: &[i64], value_labels: &[String]) {
    let n = values.len().max(1) as i64;
    let slot = (W - 2 * MARGIN) / n;
    let bar_w = (slot * 3 / 4).max(1);
    let max = values.iter().copied().max().unwrap_or(0).max(1);
    let base = H - MARGIN;
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN}\" y1=\"{base}\" x2=\"{}\" y2=\"{base}\" stroke=\"#333333\"/>",
        W - MARGIN
    );
    for (i, v) in values.iter().enumerate() {
        let x = MARGIN + i as i64 * slot + (slot - bar_w) / 2;
        let h = v * PLOT_H / max;
        let cx = x + bar_w / 2;
        let _ = writeln!(
            svg,
            "<rect x=\"{x}\" y=\"{}\" width=\"{bar_w}\" height=\"{h}\" fill=\"#4a7ab5\"/>",
            base - h
        );
        let _ = writeln!(
            svg,
            "<text x=\"{cx}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            base + 14,
            escape(&labels[i])
        );
        let _ = writeln!(
            svg,
            "<text x=\"{cx}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            base - h - 4,
            escape(&value_labels[i])
        );
    }
}

/// Parses a rendered mean ("3.2500") into ten-thousandths.
fn mean_units(s: &str) -> i64 {
    s.replace('.', "").parse().unwrap_or(0)
}

pub fn render_charts(report: &AnalysisReport) -> Vec<Chart> {
    let stats = &report.body.statistics;
    if stats.responses == 0 {
        let mut svg = header("Survey results");
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">No responses analysed (n = 0)</text>",
            W / 2,
            H / 2
        );
        svg.push_str("</svg>\n");
        return vec![Chart {
            file_name: "empty.svg".into(),
            svg,
        }];
    }

    let mut charts = Vec::new();
    for item in &stats.items {
        let mut svg = header(&format!("{} (n = {})", item.item_id, item.n));
        let labels: Vec<String> = item.distribution.iter().map(|d| d.value.to_string()).collect();
        let values: Vec<i64> = item.distribution.iter().map(|d| d.count as i64).collect();
        let value_labels: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        bars(&mut svg, &labels, &values, &value_labels);
        svg.push_str("</svg>\n");
        charts.push(Chart {
            file_name: format!("item-{}.svg", slug(&item.item_id)),
            svg,
        });
    }

    if stats.dimensions.len() >= 2 {
        let mut svg = header("Mean score by dimension");
        let labels: Vec<String> = stats.dimensions.iter().map(|d| d.dimension.clone()).collect();
        let means: Vec<String> = stats
            .dimensions
            .iter()
            .map(|d| d.mean.clone().unwrap_or_else(|| "n/a".into()))
            .collect();
        let values: Vec<i64> = means.iter().map(|m| mean_units(m).max(0)).collect();
        bars(&mut svg, &labels, &values, &means);
        svg.push_str("</svg>\n");
        charts.push(Chart {
            file_name: "dimensions.svg".into(),
            svg,
        });
    }
    charts
}

/// Writes every chart for `report` into `dir`.
pub fn export_plots(report: &AnalysisReport, dir: &Path) -> Result<Vec<Chart>, AnalysisError> {
    fs::create_dir_all(dir)?;
    let charts = render_charts(report);
    for c in &charts {
        fs::write(dir.join(&c.file_name), &c.svg)?;
    }
    Ok(charts)
}
