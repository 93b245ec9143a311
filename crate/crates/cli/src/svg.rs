//! Minimal SVG overlay: histogram bars with the three density curves.

use std::fmt::Write as _;

const W: f64 = 720.0;
const H: f64 = 460.0;
const PAD: f64 = 50.0;
const COLORS: [(&str, &str); 3] = [
    ("normal", "#1f77b4"),
    ("expansion", "#d62728"),
    ("expansion plus", "#2ca02c"),
];

pub fn overlay(title: &str, edges: &[f64], dens: &[f64], xs: &[f64], curves: &[[f64; 3]]) -> String {
    let (lo, hi) = (edges[0], edges[edges.len() - 1]);
    let top = dens
        .iter()
        .chain(curves.iter().flatten())
        .fold(0.0f64, |m, &v| m.max(v))
        * 1.05;
    let top = if top > 0.0 { top } else { 1.0 };
    let px = |x: f64| PAD + (x - lo) / (hi - lo).max(f64::MIN_POSITIVE) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - y.max(0.0) / top * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    for (i, w) in edges.windows(2).enumerate() {
        let (x0, x1, y) = (px(w[0]), px(w[1]), py(dens[i]));
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#cccccc" stroke="#999999" stroke-width="0.5"/>"##,
            x1 - x0,
            H - PAD - y
        );
    }
    for (k, (_, color)) in COLORS.iter().enumerate() {
        let pts: Vec<String> = xs
            .iter()
            .zip(curves)
            .map(|(&x, c)| format!("{:.2},{:.2}", px(x), py(c[k])))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
    }
    let axis_y = H - PAD;
    let _ = writeln!(s, r#"<line x1="{PAD}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="black"/>"#, W - PAD);
    let _ = writeln!(s, r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{axis_y}" stroke="black"/>"#);
    for i in 0..=4 {
        let x = lo + (hi - lo) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{x:.2}</text>"#, px(x), axis_y + 18.0);
        let y = top * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{y:.3}</text>"#, PAD - 6.0, py(y) + 4.0);
    }
    for (k, (name, color)) in COLORS.iter().enumerate() {
        let y = PAD + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{name}</text>"#,
            W - PAD - 130.0,
            W - PAD - 110.0,
            W - PAD - 104.0,
            y + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
