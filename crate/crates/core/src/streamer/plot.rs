use std::fmt::Write;

use super::{Signal, StreamError};

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 260.0;
const LEFT: f64 = 50.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 15.0;
const BOTTOM: f64 = 35.0;

/// Standalone SVG: shaded ground-truth events, the score polyline and
/// axes ticked in seconds. Events are clipped to the plotted time range.
pub fn render_plot_svg(signal: &Signal) -> Result<Vec<u8>, StreamError> {
    let (first, last) = match (signal.points.first(), signal.points.last()) {
        (Some(f), Some(l)) => (f.t_s, l.t_s),
        _ => return Err(StreamError::EmptySignal),
    };
    let (lo, hi) = if last > first { (first, last) } else { (first - 0.5, first + 0.5) };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |t: f64| LEFT + (t - lo) / (hi - lo) * plot_w;
    let y = |s: f64| TOP + (1.0 - s) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    for ev in signal.ground_truth.iter().flatten() {
        let a = ev.start_s.max(lo);
        let b = ev.end_s.min(hi);
        if b <= a {
            continue;
        }
        let _ = writeln!(
            svg,
            r#"<rect class="event" x="{:.2}" y="{TOP:.2}" width="{:.2}" height="{plot_h:.2}" fill="red" fill-opacity="0.25"/>"#,
            x(a),
            x(b) - x(a)
        );
    }

    // Axes.
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    );
    let _ = writeln!(svg, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}" stroke="black"/>"#, TOP + plot_h);
    let span = hi - lo;
    let step = (span / 20.0).ceil().max(1.0);
    let mut t = (lo / step).ceil() * step;
    while t <= hi + 1e-9 {
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="black"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4}</text>"#,
            x(t),
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0,
            t
        );
        t += step;
    }
    for s in [0.0, 0.5, 1.0] {
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{LEFT}" y2="{1:.2}" stroke="black"/><text x="{2:.2}" y="{3:.2}" text-anchor="end">{s}</text>"#,
            LEFT - 5.0,
            y(s),
            LEFT - 8.0,
            y(s) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time (s)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 4.0
    );

    let pts: Vec<String> = signal
        .points
        .iter()
        .map(|p| format!("{:.2},{:.2}", x(p.t_s), y(p.score)))
        .collect();
    let _ = writeln!(
        svg,
        r#"<polyline class="score" points="{}" fill="none" stroke="green" stroke-width="1.5"/>"#,
        pts.join(" ")
    );
    svg.push_str("</svg>\n");
    Ok(svg.into_bytes())
}
