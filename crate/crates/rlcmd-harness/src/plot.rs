//! Self-contained SVG line plots: gap (log10 scale) against iteration,
//! one curve per trace, optional convergence-bound overlay for the damped
//! iterations. No external assets; everything is inline SVG.

use std::fmt::Write as _;

use rlcmd_core::metrics::IterationRecord;

use crate::HarnessError;

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotColumn {
    GapAvg,
    GapInst,
}

#[derive(Debug, Clone)]
pub struct PlotStyle {
    pub column: PlotColumn,
    /// Overlay the bound column (dashed) for traces labeled `rlc`/`co_rlc`.
    pub with_bounds: bool,
    pub title: String,
}

impl Default for PlotStyle {
    fn default() -> Self {
        PlotStyle {
            column: PlotColumn::GapAvg,
            with_bounds: true,
            title: "duality gap vs iteration".into(),
        }
    }
}

fn column_value(record: &IterationRecord, column: PlotColumn) -> f64 {
    match column {
        PlotColumn::GapAvg => record.gap_avg,
        PlotColumn::GapInst => record.gap_inst,
    }
}

/// Renders the traces into one SVG document. The y axis is log10 of the
/// gap; nonpositive or non-finite values (a converged clamp or a diverged
/// overflow) are omitted from their curve.
pub fn emit_plot(
    traces: &[(String, Vec<IterationRecord>)],
    style: &PlotStyle,
) -> Result<String, HarnessError> {
    if traces.is_empty() || traces.iter().all(|(_, r)| r.is_empty()) {
        return Err(HarnessError::Config("nothing to plot: empty trace set".into()));
    }

    let mut max_k: f64 = 1.0;
    let mut log_min = f64::INFINITY;
    let mut log_max = f64::NEG_INFINITY;
    let mut include = |v: f64| {
        if v.is_finite() && v > 0.0 {
            log_min = log_min.min(v.log10());
            log_max = log_max.max(v.log10());
        }
    };
    for (label, records) in traces {
        for r in records {
            max_k = max_k.max(r.k as f64);
            include(column_value(r, style.column));
            if style.with_bounds && bound_overlay(label) {
                include(r.theorem_bound);
            }
        }
    }
    if !log_min.is_finite() {
        return Err(HarnessError::Config(
            "nothing to plot: no positive finite gap values".into(),
        ));
    }
    let log_min = log_min.floor();
    let log_max = (log_max.ceil()).max(log_min + 1.0);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |k: f64| MARGIN_LEFT + plot_w * (k - 1.0) / (max_k - 1.0).max(1.0);
    let y_of = |v: f64| MARGIN_TOP + plot_h * (log_max - v.log10()) / (log_max - log_min);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        xml_escape(&style.title)
    );

    // Axes.
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;
    let _ = writeln!(
        svg,
        r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#,
        MARGIN_LEFT + plot_w
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}" stroke="black"/>"#
    );

    // y ticks at integer powers of ten.
    let mut p = log_min;
    while p <= log_max + 1e-9 {
        let y = MARGIN_TOP + plot_h * (log_max - p) / (log_max - log_min);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{x0}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/>"##,
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="end">1e{}</text>"#,
            x0 - 8.0,
            y + 4.0,
            p as i64
        );
        p += 1.0;
    }

    // x ticks.
    let tick_step = nice_step(max_k / 5.0);
    let mut k = 0.0;
    while k <= max_k + 1e-9 {
        let kk = if k == 0.0 { 1.0 } else { k };
        let x = x_of(kk);
        let _ = writeln!(
            svg,
            r#"<line x1="{x}" y1="{y0}" x2="{x}" y2="{}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            y0 + 20.0,
            kk as u64
        );
        k += tick_step;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">iteration</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">gap (log10)</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    // Curves and legend.
    let mut legend_y = MARGIN_TOP + 10.0;
    for (idx, (label, records)) in traces.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let points = polyline_points(records, style.column, &x_of, &y_of);
        if !points.is_empty() {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.6" points="{points}"/>"#
            );
        }
        legend_entry(&mut svg, legend_y, color, label, false);
        legend_y += 18.0;

        if style.with_bounds && bound_overlay(label) {
            let bound_points: String = records
                .iter()
                .filter(|r| r.theorem_bound.is_finite() && r.theorem_bound > 0.0)
                .map(|r| format!("{:.2},{:.2}", x_of(r.k as f64), y_of(r.theorem_bound)))
                .collect::<Vec<_>>()
                .join(" ");
            if !bound_points.is_empty() {
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" stroke-dasharray="6,4" points="{bound_points}"/>"#
                );
                legend_entry(&mut svg, legend_y, color, &format!("{label} bound"), true);
                legend_y += 18.0;
            }
        }
    }

    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

fn polyline_points(
    records: &[IterationRecord],
    column: PlotColumn,
    x_of: &impl Fn(f64) -> f64,
    y_of: &impl Fn(f64) -> f64,
) -> String {
    records
        .iter()
        .filter_map(|r| {
            let v = column_value(r, column);
            (v.is_finite() && v > 0.0)
                .then(|| format!("{:.2},{:.2}", x_of(r.k as f64), y_of(v)))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn legend_entry(svg: &mut String, y: f64, color: &str, label: &str, dashed: bool) {
    let x = WIDTH - MARGIN_RIGHT + 12.0;
    let dash = if dashed {
        r#" stroke-dasharray="6,4""#
    } else {
        ""
    };
    let _ = writeln!(
        svg,
        r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="1.6"{dash}/>"#,
        x + 26.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
        x + 32.0,
        y + 4.0,
        xml_escape(label)
    );
}

fn bound_overlay(label: &str) -> bool {
    label.starts_with("rlc") || label.starts_with("co_rlc")
}

fn nice_step(raw: f64) -> f64 {
    if raw <= 1.0 {
        return 1.0;
    }
    let mag = 10f64.powf(raw.log10().floor());
    let candidates = [1.0, 2.0, 5.0, 10.0];
    for c in candidates {
        if c * mag >= raw {
            return c * mag;
        }
    }
    10.0 * mag
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
