//! Barcode rendering as a standalone SVG document.
//!
//! One panel per homology dimension, bars stacked top to bottom in barcode
//! order, x-axis in units of ε. Bars that never die (or are still alive at
//! the construction cap) run to the right margin and end in an arrowhead.
//! All coordinates are printed with fixed precision so identical barcodes
//! give byte-identical files.

use std::fmt::Write as _;

use grassfire::persistence::Barcode;

const WIDTH: f64 = 720.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 40.0;
const TOP: f64 = 20.0;
const TITLE: f64 = 22.0;
const PITCH: f64 = 8.0;
const BAR: f64 = 4.0;
const MIN_BODY: f64 = 16.0;
const AXIS: f64 = 34.0;
const GAP: f64 = 18.0;
const TICKS: usize = 5;
const DIMS: [u8; 2] = [0, 1];

pub fn render_svg(barcode: &Barcode) -> String {
    let x_max = axis_max(barcode);
    let plot_right = WIDTH - RIGHT;
    let x_of = |v: f64| LEFT + (plot_right - LEFT) * (v / x_max).clamp(0.0, 1.0);

    let mut body = String::new();
    let mut y = TOP;
    for dim in DIMS {
        let bars: Vec<_> = barcode.dim(dim).collect();
        let inner = (bars.len() as f64 * PITCH).max(MIN_BODY);
        let _ = writeln!(body, r#"<g class="panel" id="panel-dim-{dim}">"#);
        let _ = writeln!(
            body,
            r#"<text x="{LEFT:.2}" y="{:.2}" class="title">H{dim} ({} bars)</text>"#,
            y + 14.0,
            bars.len()
        );
        let top = y + TITLE;
        let _ = writeln!(
            body,
            r#"<rect x="{LEFT:.2}" y="{top:.2}" width="{:.2}" height="{inner:.2}" class="frame"/>"#,
            plot_right - LEFT
        );
        for (i, bar) in bars.iter().enumerate() {
            let by = top + PITCH * (i as f64 + 0.5);
            let x1 = x_of(bar.birth);
            let runs_off = bar.is_infinite() || bar.open;
            let (x2, marker) = if runs_off {
                (plot_right, r#" marker-end="url(#arrow)""#)
            } else {
                (x_of(bar.death), "")
            };
            let kind = if runs_off { " infinite" } else { "" };
            let _ = writeln!(
                body,
                r#"<line class="bar dim-{dim}{kind}" x1="{x1:.2}" y1="{by:.2}" x2="{x2:.2}" y2="{by:.2}"{marker}/>"#
            );
        }
        let axis_y = top + inner;
        for t in 0..=TICKS {
            let v = x_max * t as f64 / TICKS as f64;
            let tx = x_of(v);
            let _ = writeln!(
                body,
                r#"<line class="tick" x1="{tx:.2}" y1="{axis_y:.2}" x2="{tx:.2}" y2="{:.2}"/>"#,
                axis_y + 4.0
            );
            let _ = writeln!(
                body,
                r#"<text x="{tx:.2}" y="{:.2}" class="tick-label">{v:.3e}</text>"#,
                axis_y + 16.0
            );
        }
        let _ = writeln!(
            body,
            r#"<text x="{:.2}" y="{:.2}" class="axis-label">ε</text>"#,
            (LEFT + plot_right) / 2.0,
            axis_y + 30.0
        );
        body.push_str("</g>\n");
        y = axis_y + AXIS + GAP;
    }
    let height = y - GAP + TOP;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}">"#
    );
    svg.push_str(concat!(
        "<defs>\n",
        r#"<marker id="arrow" viewBox="0 0 10 10" refX="5" refY="5" markerWidth="5" markerHeight="5" orient="auto-start-reverse">"#,
        "\n",
        r#"<path d="M 0 0 L 10 5 L 0 10 z" fill="black"/>"#,
        "\n</marker>\n",
        "<style>\n",
        ".bar { stroke: #1f4e9a; stroke-linecap: butt; }\n",
        ".dim-1 { stroke: #b03a2e; }\n",
        ".frame { fill: none; stroke: #999; stroke-width: 0.5; }\n",
        ".tick { stroke: #333; stroke-width: 0.75; }\n",
        "text { font-family: sans-serif; font-size: 10px; }\n",
        ".title { font-size: 12px; font-weight: bold; }\n",
        ".tick-label, .axis-label { text-anchor: middle; }\n",
        "</style>\n",
        "</defs>\n",
    ));
    let _ = writeln!(svg, r#"<g stroke-width="{BAR:.0}">"#);
    svg.push_str(&body);
    svg.push_str("</g>\n</svg>\n");
    svg
}

/// Right end of the ε axis: the largest finite endpoint, padded by 5%.
fn axis_max(barcode: &Barcode) -> f64 {
    let largest = barcode
        .intervals()
        .iter()
        .flat_map(|b| [b.birth, b.death])
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    if largest > 0.0 {
        largest * 1.05
    } else {
        1.0
    }
}
