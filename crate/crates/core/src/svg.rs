//! Small self-contained SVG renderers for the probe and evaluation outputs.

use std::fmt::Write as _;

use ndarray::ArrayView2;

use crate::eval::ErrorDistribution;
use crate::model::PatternKey;
use crate::probe::{Projection, TraversalReport};

const PALETTE: [&str; 14] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#ad494a", "#637939", "#843c39",
];

fn colour(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn open(w: f64, h: f64) -> String {
    format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"10\">\n")
}

/// Diverging blue-white-red for values in [-1, 1].
fn diverging(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t < 0.0 {
        let a = -t;
        (255.0 * (1.0 - a), 255.0 * (1.0 - a * 0.6), 255.0)
    } else {
        (255.0, 255.0 * (1.0 - t * 0.6), 255.0 * (1.0 - t))
    };
    format!("rgb({:.0},{:.0},{:.0})", r, g, b)
}

/// Heatmap of a grid (e.g. a 32×24 reshaped embedding), symmetric colour scale around 0.
pub fn heatmap(grid: ArrayView2<'_, f32>, cell: f64) -> String {
    let (rows, cols) = grid.dim();
    let scale = grid.iter().fold(0f32, |m, v| m.max(v.abs())).max(f32::MIN_POSITIVE) as f64;
    let mut s = open(cols as f64 * cell, rows as f64 * cell);
    for r in 0..rows {
        for c in 0..cols {
            let v = grid[[r, c]] as f64;
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{cell:.1}\" height=\"{cell:.1}\" fill=\"{}\"><title>{v:.4}</title></rect>",
                c as f64 * cell,
                r as f64 * cell,
                diverging(v / scale)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Scatter plot of a 2-D projection coloured by pattern, with a legend.
pub fn scatter(p: &Projection, labels: &[PatternKey]) -> String {
    let mut keys: Vec<&PatternKey> = labels.iter().collect();
    keys.sort();
    keys.dedup();
    let (size, pad, legend) = (480.0, 20.0, 200.0);
    let xs = p.coords.column(0);
    let ys = p.coords.column(1);
    let span = |v: ndarray::ArrayView1<'_, f64>| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, (hi - lo).max(1e-12))
    };
    let ((x0, xw), (y0, yw)) = (span(xs), span(ys));
    let mut s = open(size + legend, size);
    for (i, l) in labels.iter().enumerate() {
        let k = keys.binary_search(&l).unwrap();
        let x = pad + (xs[i] - x0) / xw * (size - 2.0 * pad);
        let y = size - pad - (ys[i] - y0) / yw * (size - 2.0 * pad);
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.7\"/>",
            colour(k)
        );
    }
    for (k, key) in keys.iter().enumerate() {
        let y = pad + k as f64 * 14.0;
        let _ = writeln!(
            s,
            "<rect x=\"{:.0}\" y=\"{:.0}\" width=\"10\" height=\"10\" fill=\"{}\"/>",
            size,
            y,
            colour(k)
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.0}\" y=\"{:.0}\">{}</text>",
            size + 14.0,
            y + 9.0,
            escape(key.as_str())
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One stacked bar per run, segments sized by each error label's share.
pub fn stacked_bars(runs: &[(String, ErrorDistribution)]) -> String {
    let mut labels: Vec<&String> = runs.iter().flat_map(|(_, d)| d.counts.keys()).collect();
    labels.sort();
    labels.dedup();
    let (bar, gap, height, top, legend) = (40.0, 20.0, 300.0, 20.0, 160.0);
    let width = runs.len() as f64 * (bar + gap) + gap + legend;
    let mut s = open(width, height + top + 40.0);
    for (i, (name, d)) in runs.iter().enumerate() {
        let x = gap + i as f64 * (bar + gap);
        let mut y = top + height;
        for (k, l) in labels.iter().enumerate() {
            let h = d.share(l) * height;
            if h > 0.0 {
                y -= h;
                let _ = writeln!(
                    s,
                    "<rect x=\"{x:.1}\" y=\"{y:.2}\" width=\"{bar:.0}\" height=\"{h:.2}\" fill=\"{}\"><title>{} {:.3}</title></rect>",
                    colour(k),
                    escape(l),
                    d.share(l)
                );
            }
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.0}\" text-anchor=\"middle\">{}</text>",
            x + bar / 2.0,
            top + height + 14.0,
            escape(name)
        );
    }
    let lx = width - legend + 10.0;
    for (k, l) in labels.iter().enumerate() {
        let y = top + k as f64 * 14.0;
        let _ = writeln!(
            s,
            "<rect x=\"{lx:.0}\" y=\"{y:.0}\" width=\"10\" height=\"10\" fill=\"{}\"/>",
            colour(k)
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.0}\" y=\"{:.0}\">{}</text>",
            lx + 14.0,
            y + 9.0,
            escape(l)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Grid of traversal panels, one row per latent unit and one column per step. Each panel
/// shows predicted pattern against true pattern, shaded by row-normalised counts.
pub fn traversal_grid(report: &TraversalReport) -> String {
    let n = report.patterns.len();
    let cell = 4.0;
    let panel = n as f64 * cell;
    let gap = 8.0;
    let steps = report.grid.first().map_or(0, Vec::len);
    let w = steps as f64 * (panel + gap) + gap + 40.0;
    let h = report.grid.len() as f64 * (panel + gap) + gap;
    let mut s = open(w, h);
    for (u, row) in report.grid.iter().enumerate() {
        let oy = gap + u as f64 * (panel + gap);
        let _ = writeln!(s, "<text x=\"2\" y=\"{:.0}\">z{u}</text>", oy + panel / 2.0);
        for (k, c) in row.iter().enumerate() {
            let ox = 40.0 + k as f64 * (panel + gap);
            let _ = writeln!(
                s,
                "<rect x=\"{ox:.0}\" y=\"{oy:.0}\" width=\"{panel:.0}\" height=\"{panel:.0}\" fill=\"white\" stroke=\"#ccc\"><title>z{u} = {:.3}</title></rect>",
                report.values[u][k]
            );
            for (i, counts) in c.counts.iter().enumerate() {
                let total: usize = counts.iter().sum();
                for (j, &m) in counts.iter().enumerate() {
                    if m == 0 {
                        continue;
                    }
                    let _ = writeln!(
                        s,
                        "<rect x=\"{:.0}\" y=\"{:.0}\" width=\"{cell:.0}\" height=\"{cell:.0}\" fill=\"#08306b\" fill-opacity=\"{:.3}\"/>",
                        ox + j as f64 * cell,
                        oy + i as f64 * cell,
                        m as f64 / total as f64
                    );
                }
            }
        }
    }
    s.push_str("</svg>\n");
    s
}
