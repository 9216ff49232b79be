use std::fmt::Write;

use super::SweepPoint;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Scatter of reconstruction error (x) against content-probe accuracy (y), one
/// polyline per activation through increasing bottleneck sizes.
pub fn tradeoff_svg(points: &[SweepPoint]) -> String {
    let usable: Vec<(&SweepPoint, f64, f64)> = points
        .iter()
        .map(|p| (p, p.rec_error().0, p.acc_content().0))
        .filter(|(_, x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (mut x_lo, mut x_hi) = usable.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, x, _)| (lo.min(*x), hi.max(*x)));
    if !x_lo.is_finite() {
        (x_lo, x_hi) = (0.0, 1.0);
    }
    if x_hi - x_lo < 1e-9 {
        x_hi = x_lo + 1e-3;
    }
    let pad = 0.05 * (x_hi - x_lo);
    let (x_lo, x_hi) = (x_lo - pad, x_hi + pad);
    let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - y / 100.0 * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(svg, r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#);
    for tick in (0..=100).step_by(20) {
        let y = sy(f64::from(tick));
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{tick}</text>"#, left - 6.0, y + 4.0);
    }
    for i in 0..=4 {
        let v = x_lo + (x_hi - x_lo) * f64::from(i) / 4.0;
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{v:.3}</text>"#, sx(v), bottom + 16.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">reconstruction error</text>"#, WIDTH / 2.0, HEIGHT - 18.0);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">content speaker accuracy (%)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    let mut groups: Vec<String> = Vec::new();
    for (p, _, _) in &usable {
        let key = p.activation.to_string();
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    for (g, key) in groups.iter().enumerate() {
        let colour = PALETTE[g % PALETTE.len()];
        let mut series: Vec<&(&SweepPoint, f64, f64)> = usable.iter().filter(|(p, _, _)| p.activation.to_string() == *key).collect();
        series.sort_by_key(|(p, _, _)| p.bottleneck);
        let path: Vec<String> = series.iter().map(|(_, x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" stroke="{colour}" fill="none"/>"#, path.join(" "));
        for (p, x, y) in series {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{colour}"/>"#, sx(*x), sy(*y));
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, sx(*x) + 6.0, sy(*y) - 6.0, p.bottleneck);
        }
        let ly = top + 14.0 * g as f64;
        let _ = writeln!(svg, r#"<rect x="{}" y="{}" width="10" height="10" fill="{colour}"/>"#, right - 110.0, ly - 9.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}">{key}</text>"#, right - 95.0);
    }
    svg.push_str("</svg>\n");
    svg
}
