//! Static SVG panels for simulation metrics: rmse (log-log), Jaccard
//! similarity, and correct-support-size percentage against sample size.
//! Hand-rolled SVG keeps output byte-deterministic.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use spacetsiv::simulate::MetricsRow;

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 46.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Panel {
    title: &'static str,
    log_y: bool,
    y_min: f64,
    y_max: f64,
}

fn mean_rmse(row: &MetricsRow) -> f64 {
    if row.rmse.is_empty() {
        return f64::NAN;
    }
    row.rmse.iter().sum::<f64>() / row.rmse.len() as f64
}

pub fn write_metrics_svg(rows: &[MetricsRow], path: &Path) -> std::io::Result<()> {
    let estimators: Vec<String> = {
        let mut seen = BTreeSet::new();
        rows.iter()
            .filter(|r| seen.insert(r.estimator.clone()))
            .map(|r| r.estimator.clone())
            .collect()
    };
    let ns: Vec<usize> = {
        let set: BTreeSet<usize> = rows.iter().map(|r| r.n).collect();
        set.into_iter().collect()
    };
    let value_for = |estimator: &str, n: usize, pick: &dyn Fn(&MetricsRow) -> f64| -> f64 {
        rows.iter()
            .find(|r| r.estimator == estimator && r.n == n)
            .map(pick)
            .unwrap_or(f64::NAN)
    };

    let rmse_values: Vec<f64> = rows.iter().map(mean_rmse).filter(|v| *v > 0.0).collect();
    let rmse_lo = rmse_values.iter().copied().fold(1e-3, f64::min);
    let rmse_hi = rmse_values.iter().copied().fold(1.0, f64::max);
    let panels = [
        Panel {
            title: "mean rmse",
            log_y: true,
            y_min: rmse_lo * 0.5,
            y_max: rmse_hi * 2.0,
        },
        Panel {
            title: "jaccard similarity",
            log_y: false,
            y_min: 0.0,
            y_max: 1.05,
        },
        Panel {
            title: "correct support size (%)",
            log_y: false,
            y_min: 0.0,
            y_max: 105.0,
        },
    ];
    let pickers: [&dyn Fn(&MetricsRow) -> f64; 3] = [
        &mean_rmse,
        &|r: &MetricsRow| r.jaccard_mean,
        &|r: &MetricsRow| r.correct_size_pct,
    ];

    let total_w = panels.len() as f64 * (PANEL_W + MARGIN) + MARGIN;
    let total_h = PANEL_H + 2.0 * MARGIN + 24.0;
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{total_w}\" height=\"{total_h}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );

    let x_lo = (*ns.first().unwrap_or(&1) as f64).ln();
    let x_hi = (*ns.last().unwrap_or(&10) as f64).max(2.0).ln();
    let x_of = |n: usize, origin: f64| -> f64 {
        if ns.len() < 2 {
            return origin + PANEL_W / 2.0;
        }
        origin + (n as f64).ln().clamp(x_lo, x_hi) / (x_hi - x_lo) * PANEL_W
            - x_lo / (x_hi - x_lo) * PANEL_W
    };

    for (p_idx, panel) in panels.iter().enumerate() {
        let origin_x = MARGIN + p_idx as f64 * (PANEL_W + MARGIN);
        let origin_y = MARGIN;
        let y_of = |v: f64| -> f64 {
            let t = if panel.log_y {
                (v.max(panel.y_min).ln() - panel.y_min.ln()) / (panel.y_max.ln() - panel.y_min.ln())
            } else {
                (v - panel.y_min) / (panel.y_max - panel.y_min)
            };
            origin_y + PANEL_H - t.clamp(0.0, 1.0) * PANEL_H
        };

        let _ = write!(
            svg,
            "<rect x=\"{origin_x}\" y=\"{origin_y}\" width=\"{PANEL_W}\" height=\"{PANEL_H}\" \
             fill=\"none\" stroke=\"#444\"/>\n<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            origin_x + PANEL_W / 2.0,
            origin_y - 10.0,
            panel.title
        );
        // x tick labels at the grid points
        for &n in &ns {
            let _ = write!(
                svg,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"#444\">{n}</text>\n",
                x_of(n, origin_x),
                origin_y + PANEL_H + 16.0
            );
        }

        for (e_idx, estimator) in estimators.iter().enumerate() {
            let color = COLORS[e_idx % COLORS.len()];
            let mut points = Vec::new();
            for &n in &ns {
                let v = value_for(estimator, n, pickers[p_idx]);
                if v.is_finite() {
                    points.push(format!("{:.2},{:.2}", x_of(n, origin_x), y_of(v)));
                }
            }
            if !points.is_empty() {
                let _ = write!(
                    svg,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                    points.join(" ")
                );
            }
            if p_idx == 0 {
                let _ = write!(
                    svg,
                    "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{estimator}</text>\n",
                    origin_x + 8.0,
                    origin_y + 14.0 + 13.0 * e_idx as f64
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
}
