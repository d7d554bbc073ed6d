//! Static SVG rendering of a trace: one polyline per strategy rate on the
//! left axis, utilization dashed on the right axis, shared step axis.
//! Output is a pure function of the trace, so identical input gives
//! identical bytes.

use std::fmt::Write;

use irm_core::engine::SimTrace;
use irm_core::Decimal;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 70.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 80.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn to_f64(d: Decimal) -> f64 {
    d.to_string().parse().unwrap_or(0.0)
}

/// Smallest "nice" step (1, 2 or 5 times a power of ten) giving at most `ticks` intervals.
fn nice_step(span: f64, ticks: f64) -> f64 {
    let raw = span / ticks;
    let mag = 10f64.powf(raw.log10().floor());
    for k in [1.0, 2.0, 5.0, 10.0] {
        if k * mag >= raw {
            return k * mag;
        }
    }
    10.0 * mag
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

pub fn render(trace: &SimTrace) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let first = trace.rows.first().map_or(0, |r| r.step) as f64;
    let last = trace.rows.last().map_or(1, |r| r.step) as f64;
    let x_span = (last - first).max(1.0);
    let max_rate = trace
        .rows
        .iter()
        .flat_map(|r| r.cells.iter().map(|c| to_f64(c.rate)))
        .fold(0.0, f64::max);
    let y_step = nice_step(if max_rate > 0.0 { max_rate } else { 1.0 }, 5.0);
    let y_max = (max_rate / y_step).ceil().max(1.0) * y_step;

    let x = |step: u32| LEFT + (step as f64 - first) / x_span * plot_w;
    let y_rate = |v: f64| TOP + plot_h - v / y_max * plot_h;
    let y_util = |v: f64| TOP + plot_h - v * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    // Gridlines and left (rate) axis.
    let mut v = 0.0;
    while v <= y_max + y_step / 2.0 {
        let y = y_rate(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0,
            label(v)
        );
        v += y_step;
    }
    // Right (utilization) axis.
    for i in 0..=5 {
        let u = i as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            LEFT + plot_w + 6.0,
            y_util(u) + 4.0,
            label(u)
        );
    }
    // Step axis.
    let x_step = nice_step(x_span, 10.0).max(1.0);
    let mut s = (first / x_step).ceil() * x_step;
    while s <= last {
        let px = x(s as u32);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 4.0,
            TOP + plot_h + 16.0,
            s as u64
        );
        s += x_step;
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">step</text>"#,
        LEFT + plot_w / 2.0,
        TOP + plot_h + 32.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">rate</text>"#,
        TOP + plot_h / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate({:.2} {:.2}) rotate(90)" text-anchor="middle">utilization</text>"#,
        WIDTH - 16.0,
        TOP + plot_h / 2.0
    );

    let points = |f: &dyn Fn(&irm_core::engine::TraceRow) -> (f64, f64)| {
        trace
            .rows
            .iter()
            .map(|r| {
                let (px, py) = f(r);
                format!("{px:.2},{py:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(
        svg,
        r##"<polyline class="utilization" fill="none" stroke="#555555" stroke-dasharray="5 3" points="{}"/>"##,
        points(&|r| (x(r.step), y_util(to_f64(r.utilization))))
    );
    for (i, col) in trace.strategies.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<polyline class="rate" data-strategy="{}" fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            escape(&col.name),
            points(&|r| (x(r.step), y_rate(to_f64(r.cells[i].rate))))
        );
    }

    // Legend below the axis label.
    let legend_y = HEIGHT - 18.0;
    let mut lx = LEFT;
    let _ = writeln!(
        svg,
        r##"<line x1="{lx:.2}" y1="{legend_y:.2}" x2="{:.2}" y2="{legend_y:.2}" stroke="#555555" stroke-dasharray="5 3"/><text x="{:.2}" y="{:.2}">utilization</text>"##,
        lx + 20.0,
        lx + 24.0,
        legend_y + 4.0
    );
    lx += 110.0;
    for (i, col) in trace.strategies.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{legend_y:.2}" x2="{:.2}" y2="{legend_y:.2}" stroke="{colour}" stroke-width="1.5"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 24.0,
            legend_y + 4.0,
            escape(&col.name)
        );
        lx += 30.0 + 7.0 * col.name.len() as f64 + 20.0;
    }
    svg.push_str("</svg>\n");
    svg
}
