use std::fmt::Write as _;
use std::path::Path;

use crate::error::{EmbedError, Result};
use crate::types::{Embedding, PressureReport, TraceRecord};

const SIZE: f64 = 800.0;
const MARGIN: f64 = 50.0;
const MIN_RADIUS: f64 = 2.5;
const MAX_RADIUS: f64 = 10.0;

// tab10
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Linear map from `[lo, hi]` onto `[a, b]`, padded by 5% on each side.
struct Axis {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, a: f64, b: f64) -> Self {
        let (mut lo, mut hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
                (l.min(v), h.max(v))
            });
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Self {
            lo: lo - pad,
            hi: hi + pad,
            a,
            b,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}

fn frame(svg: &mut String, x: &Axis, y: &Axis, top: f64, bottom: f64) {
    let _ = writeln!(
        svg,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333" stroke-width="1"/>"##,
        x.a,
        top,
        x.b - x.a,
        bottom - top
    );
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let (xv, yv) = (x.lo + f * (x.hi - x.lo), y.lo + f * (y.hi - y.lo));
        let (px, py) = (x.map(xv), y.map(yv));
        let _ = writeln!(
            svg,
            r#"<text x="{px:.2}" y="{:.2}" font-size="11" text-anchor="middle">{xv:.3}</text>"#,
            bottom + 15.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{yv:.3}</text>"#,
            x.a - 5.0,
            py + 4.0
        );
    }
}

fn write_file(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| EmbedError::io(path, e))
}

/// 2-D scatter plot: color by label, marker radius affine in pressure.
pub fn render_scatter(
    path: impl AsRef<Path>,
    embedding: &Embedding,
    labels: Option<&[i64]>,
    report: Option<&PressureReport>,
) -> Result<()> {
    if embedding.dim() != 2 {
        return Err(EmbedError::Unsupported(format!(
            "scatter plot of a {}-dimensional embedding",
            embedding.dim()
        )));
    }
    let n = embedding.n();
    if labels.is_some_and(|l| l.len() != n) || report.is_some_and(|r| r.pressure.len() != n) {
        return Err(EmbedError::Validation(
            "labels or report do not match the embedding size".into(),
        ));
    }
    let c = embedding.coords();
    let x = Axis::new(c.column(0).iter().copied(), MARGIN, SIZE - MARGIN);
    let y = Axis::new(c.column(1).iter().copied(), SIZE - MARGIN, MARGIN);
    let max_p = report.map_or(0.0, |r| r.pressure.iter().copied().fold(0.0, f64::max));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    frame(&mut svg, &x, &y, MARGIN, SIZE - MARGIN);
    for i in 0..n {
        let color = labels.map_or(PALETTE[0], |l| {
            PALETTE[l[i].rem_euclid(PALETTE.len() as i64) as usize]
        });
        let r = match report {
            Some(rep) if max_p > 0.0 => {
                MIN_RADIUS + (MAX_RADIUS - MIN_RADIUS) * rep.pressure[i] / max_p
            }
            _ => MIN_RADIUS,
        };
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.3}" cy="{:.3}" r="{r:.3}" fill="{color}" fill-opacity="0.75"/>"#,
            x.map(c[[i, 0]]),
            y.map(c[[i, 1]])
        );
    }
    svg.push_str("</svg>\n");
    write_file(path.as_ref(), &svg)
}

/// Objective (top) and pressured fraction (bottom) against iteration for one
/// or more runs; circles mark changes of the penalty weight.
pub fn render_convergence(path: impl AsRef<Path>, series: &[(&str, &[TraceRecord])]) -> Result<()> {
    let (w, h) = (SIZE, SIZE);
    let split = MARGIN + 0.6 * (h - 2.0 * MARGIN);
    let iters = series
        .iter()
        .flat_map(|(_, t)| t.iter().map(|r| r.iter as f64));
    let x = Axis::new(iters, MARGIN + 30.0, w - MARGIN);
    let y_obj = Axis::new(
        series
            .iter()
            .flat_map(|(_, t)| t.iter().map(|r| r.base_objective)),
        split - 20.0,
        MARGIN,
    );
    let y_frac = Axis::new([0.0, 1.0].into_iter(), h - MARGIN, split + 20.0);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    frame(&mut svg, &x, &y_obj, MARGIN, split - 20.0);
    frame(&mut svg, &x, &y_frac, split + 20.0, h - MARGIN);

    for (s, (name, trace)) in series.iter().enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        for (axis, value) in [
            (
                &y_obj,
                (|r: &TraceRecord| r.base_objective) as fn(&TraceRecord) -> f64,
            ),
            (&y_frac, |r: &TraceRecord| r.pressured_fraction),
        ] {
            let points: Vec<String> = trace
                .iter()
                .map(|r| format!("{:.2},{:.2}", x.map(r.iter as f64), axis.map(value(r))))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                points.join(" ")
            );
        }
        for pair in trace.windows(2) {
            if pair[1].mu != pair[0].mu {
                let r = &pair[1];
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="{color}"/>"#,
                    x.map(r.iter as f64),
                    y_obj.map(r.base_objective)
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="{color}">{}</text>"#,
            w - MARGIN - 150.0,
            MARGIN + 18.0 * (s as f64 + 1.0),
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    write_file(path.as_ref(), &svg)
}
