//! Static SVG charts: grouped bars and line series with axes and labels.
//! Output is a pure function of the inputs so reruns diff cleanly.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

pub struct LineSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

/// Nice-ish tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    // index-based and rounded to the step's precision so 3 × 0.2 prints as 0.6
    let decimals = (-step.log10().floor()).max(0.0) as usize + 1;
    let first = (lo / step).ceil() as i64;
    let mut out = Vec::new();
    for k in first.. {
        let t = k as f64 * step;
        if t > hi + 1e-9 * span {
            break;
        }
        let t: f64 = format!("{t:.decimals$}").parse().expect("formatted float");
        out.push(if t == 0.0 { 0.0 } else { t });
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn axes(out: &mut String, x_label: &str, y_label: &str, y_lo: f64, y_hi: f64) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for t in ticks(y_lo, y_hi) {
        let y = y0 - (t - y_lo) / (y_hi - y_lo) * (y0 - y1);
        let _ = writeln!(
            out,
            r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            x0 - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 16.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            y - 10.0,
            PALETTE[i % PALETTE.len()],
            x + 18.0,
            y,
            escape(name)
        );
    }
}

fn y_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Grouped bars: one group per category, one bar per series.
pub fn bar_chart(title: &str, y_label: &str, categories: &[String], series: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (lo, hi) = y_range(series.iter().flat_map(|s| s.values.iter().copied()));
    axes(&mut out, "", y_label, lo, hi);
    let plot_w = WIDTH - RIGHT - LEFT;
    let group_w = plot_w / categories.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    let y_of = |v: f64| (HEIGHT - BOTTOM) - (v - lo) / (hi - lo) * (HEIGHT - BOTTOM - TOP);
    for (c, cat) in categories.iter().enumerate() {
        let gx = LEFT + group_w * c as f64 + group_w * 0.1;
        for (k, s) in series.iter().enumerate() {
            let v = s.values.get(c).copied().unwrap_or(f64::NAN);
            if !v.is_finite() {
                continue;
            }
            let (ya, yb) = (y_of(v.max(0.0)), y_of(v.min(0.0)));
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{ya:.2}" width="{bar_w:.2}" height="{:.2}" fill="{}"><title>{}: {v}</title></rect>"#,
                gx + bar_w * k as f64,
                yb - ya,
                PALETTE[k % PALETTE.len()],
                escape(&s.name)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + group_w * (c as f64 + 0.5),
            HEIGHT - BOTTOM + 16.0,
            escape(cat)
        );
    }
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    if names.len() > 1 {
        legend(&mut out, &names);
    }
    out.push_str("</svg>\n");
    out
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[LineSeries]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (lo, hi) = y_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (x_lo, x_hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (x_lo, x_hi) = if x_lo.is_finite() && x_hi > x_lo {
        (x_lo, x_hi)
    } else if x_lo.is_finite() {
        (x_lo - 1.0, x_lo + 1.0)
    } else {
        (0.0, 1.0)
    };
    axes(&mut out, x_label, y_label, lo, hi);
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * (WIDTH - RIGHT - LEFT);
    let py = |y: f64| (HEIGHT - BOTTOM) - (y - lo) / (hi - lo) * (HEIGHT - BOTTOM - TOP);
    for t in ticks(x_lo, x_hi) {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            px(t),
            HEIGHT - BOTTOM + 16.0,
            fmt_tick(t)
        );
    }
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        for p in &pts {
            let (x, y) = p.split_once(',').expect("formatted pair");
            let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        }
    }
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}
