//! Minimal static SVG rendering of plot data.

use std::fmt::Write as _;

use super::{Histogram, RDPlotData};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Frame {
        let pad = |a: f64, b: f64| {
            if b > a {
                (a - 0.04 * (b - a), b + 0.04 * (b - a))
            } else {
                (a - 0.5, b + 0.5)
            }
        };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    for i in 0..=4 {
        let xv = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
        let yv = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            f.px(xv),
            b + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            l - 4.0,
            f.py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xlabel}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{ylabel}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn cutoff_line(out: &mut String, f: &Frame, c: f64) {
    let x = f.px(c);
    let _ = writeln!(
        out,
        r#"<line x1="{x:.1}" y1="{MARGIN}" x2="{x:.1}" y2="{:.1}" stroke="firebrick" stroke-dasharray="5,4"/>"#,
        HEIGHT - MARGIN
    );
}

/// Dots for bin means, polylines for the global fits, dashed cutoff line.
pub fn rdplot_svg(p: &RDPlotData) -> String {
    const CURVE_POINTS: usize = 80;
    let mut curves: Vec<Vec<(f64, f64)>> = Vec::new();
    for (fit, (lo, hi)) in [(&p.fit_below, p.range_below), (&p.fit_above, p.range_above)] {
        if let Some(fit) = fit {
            curves.push(
                (0..=CURVE_POINTS)
                    .map(|i| {
                        let x = lo + (hi - lo) * i as f64 / CURVE_POINTS as f64;
                        (x, fit.eval(x, p.cutoff))
                    })
                    .collect(),
            );
        }
    }
    let xs = p
        .bins
        .iter()
        .map(|b| b.midpoint)
        .chain([p.range_below.0, p.range_above.1]);
    let ys = p
        .bins
        .iter()
        .map(|b| b.mean)
        .chain(curves.iter().flatten().map(|&(_, y)| y));
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let f = Frame::new(x0, x1, y0, y1);
    let mut out = String::new();
    open(&mut out, &f, "score", "outcome");
    for curve in &curves {
        let pts: Vec<String> = curve
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", f.px(x), f.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
            pts.join(" ")
        );
    }
    for b in &p.bins {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="black"/>"#,
            f.px(b.midpoint),
            f.py(b.mean)
        );
    }
    cutoff_line(&mut out, &f, p.cutoff);
    out.push_str("</svg>\n");
    out
}

/// Bars for the score histogram with the cutoff marked.
pub fn histogram_svg(h: &Histogram) -> String {
    let x0 = h
        .bins
        .first()
        .map_or(h.cutoff - 1.0, |b| b.lower.min(h.cutoff));
    let x1 = h
        .bins
        .last()
        .map_or(h.cutoff + 1.0, |b| b.upper.max(h.cutoff));
    let ymax = h.bins.iter().map(|b| b.count).max().unwrap_or(1) as f64;
    let f = Frame::new(x0, x1, 0.0, ymax);
    let mut out = String::new();
    open(&mut out, &f, "score", "count");
    for b in &h.bins {
        let (l, r) = (f.px(b.lower), f.px(b.upper));
        let top = f.py(b.count as f64);
        let _ = writeln!(
            out,
            r#"<rect x="{l:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="lightgray" stroke="gray"/>"#,
            (r - l).max(0.5),
            (f.py(0.0) - top).max(0.0)
        );
    }
    cutoff_line(&mut out, &f, h.cutoff);
    out.push_str("</svg>\n");
    out
}
