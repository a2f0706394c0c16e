//! Static SVG line and strip charts. Output depends only on the data, so a
//! chart can be diffed byte for byte.

use std::fmt::Write;

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            x,
            y,
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Roughly `n` round tick values covering `[lo, hi]`, plus the step.
pub fn ticks(lo: f64, hi: f64, n: usize) -> (Vec<f64>, f64) {
    let raw = (hi - lo) / n.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), step)
}

fn tick_label(v: f64, step: f64) -> String {
    // fewest decimals that still show the step exactly
    let decimals = (0..12)
        .find(|&d| {
            let scaled = step * 10f64.powi(d as i32);
            (scaled - scaled.round()).abs() < 1e-6 * scaled.max(1.0)
        })
        .unwrap_or(12);
    let s = format!("{v:.decimals$}");
    // avoid "-0"
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        (WIDTH - RIGHT + LEFT) / 2.0,
        escape(title)
    );
}

fn path(frame: &Frame, x: &[f64], y: &[f64]) -> String {
    let mut d = String::new();
    let mut pen_down = false;
    for (&a, &b) in x.iter().zip(y) {
        if !(a.is_finite() && b.is_finite()) {
            pen_down = false;
            continue;
        }
        let cmd = if pen_down { 'L' } else { 'M' };
        let _ = write!(d, "{cmd}{:.2} {:.2} ", frame.px(a), frame.py(b));
        pen_down = true;
    }
    d.trim_end().to_string()
}

fn x_axis(out: &mut String, frame: &Frame, label: &str) {
    let base = HEIGHT - BOTTOM;
    let (xt, xs) = ticks(frame.x0, frame.x1, 8);
    for v in xt {
        let x = frame.px(v);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{base:.1}" x2="{x:.2}" y2="{:.1}" stroke="#000"/><text x="{x:.2}" y="{:.1}" text-anchor="middle">{}</text>"##,
            base + 5.0,
            base + 18.0,
            tick_label(v, xs)
        );
    }
    let _ = writeln!(
        out,
        r##"<line x1="{LEFT}" y1="{base:.1}" x2="{:.1}" y2="{base:.1}" stroke="#000"/>"##,
        WIDTH - RIGHT
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (WIDTH - RIGHT + LEFT) / 2.0,
        HEIGHT - 10.0,
        escape(label)
    );
}

/// Line chart of one or more series sharing both axes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1) = range(series.iter().flat_map(|s| s.x.iter().copied()));
    let (y0, y1) = range(series.iter().flat_map(|s| s.y.iter().copied()));
    let pad = 0.05 * (y1 - y0);
    let frame = Frame {
        x0,
        x1,
        y0: y0 - pad,
        y1: y1 + pad,
    };

    let mut out = String::new();
    header(&mut out, title);
    let (yt, ys) = ticks(frame.y0, frame.y1, 6);
    for v in yt {
        let y = frame.py(v);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="#ddd"/><text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"##,
            WIDTH - RIGHT,
            LEFT - 6.0,
            y + 4.0,
            tick_label(v, ys)
        );
    }
    let _ = writeln!(
        out,
        r##"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.1}" stroke="#000"/>"##,
        HEIGHT - BOTTOM
    );
    x_axis(&mut out, &frame, x_label);
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (HEIGHT - BOTTOM + TOP) / 2.0,
        escape(y_label)
    );

    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
            path(&frame, &s.x, &s.y)
        );
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Stacked step traces, one band per signal, for binary and level signals.
pub fn strip_chart(title: &str, x_label: &str, x: &[f64], rows: &[(String, Vec<f64>)]) -> String {
    let (x0, x1) = range(x.iter().copied());
    let n = rows.len().max(1) as f64;
    let band = (HEIGHT - TOP - BOTTOM) / n;
    let frame = Frame {
        x0,
        x1,
        y0: 0.0,
        y1: 1.0,
    };

    let mut out = String::new();
    header(&mut out, title);
    for (k, (name, values)) in rows.iter().enumerate() {
        let (lo, hi) = range(values.iter().copied());
        let top = TOP + band * k as f64 + 0.15 * band;
        let height = 0.7 * band;
        let py = |v: f64| top + height * (1.0 - (v - lo) / (hi - lo));
        let mut d = String::new();
        let mut prev: Option<f64> = None;
        for (&a, &b) in x.iter().zip(values) {
            if !(a.is_finite() && b.is_finite()) {
                prev = None;
                continue;
            }
            let xp = frame.px(a);
            match prev {
                None => {
                    let _ = write!(d, "M{xp:.2} {:.2} ", py(b));
                }
                Some(p) => {
                    // hold the previous level up to this sample
                    let _ = write!(d, "L{xp:.2} {:.2} L{xp:.2} {:.2} ", py(p), py(b));
                }
            }
            prev = Some(b);
        }
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
            d.trim_end()
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            WIDTH - RIGHT + 12.0,
            top + 0.5 * height + 4.0,
            escape(name)
        );
    }
    x_axis(&mut out, &frame, x_label);
    out.push_str("</svg>\n");
    out
}
