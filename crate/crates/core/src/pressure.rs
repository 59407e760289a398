//! Pressured points.
//!
//! Give point `k` alone a coordinate `z` along a fresh embedding dimension
//! (every other point stays at 0). The objective as a function of `z` is even
//! and has a stationary point at `z = 0`. If that point is a maximum the
//! slice has a nontrivial minimum `z_hat > 0`; point `k` is *pressured* and
//! `z_hat` is its pressure. Otherwise the pressure is 0.
//!
//! EE and SNE have closed forms; t-SNE uses a safeguarded Newton iteration;
//! UMAP uses a numeric second-derivative test and golden-section search.
//!
//! The closed forms only need the per-point repulsion sums that the gradient
//! already accumulates ([`Evaluation::repulsion_rows`]), so tracking pressure
//! during optimization costs O(N) on top of an objective evaluation.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{EmbedError, Result};
use crate::objectives::{evaluate, exp_neg, Evaluation, Method, MethodTag, UMAP_MIN_SQDIST};
use crate::types::{pairwise_sqdist, AffinityGraph, Embedding, PressureReport, PressureWarning};

/// Upper end of the Newton bracket for t-SNE.
const NEWTON_Z_MAX: f64 = 50.0;
/// Search interval for golden-section and numeric fallbacks.
const SEARCH_Z_MAX: f64 = 10.0;
const FALLBACK_GRID: usize = 2001;
const UMAP_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub init: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            init: 1e-3,
            max_iter: 50,
            tol: 1e-10,
        }
    }
}

/// Pressure report for any method.
pub fn pressure(
    m: &Method,
    g: &AffinityGraph,
    x: &Embedding,
    newton: &NewtonConfig,
) -> Result<PressureReport> {
    match m.tag {
        MethodTag::Ee => pressure_ee(g, x),
        MethodTag::Sne => pressure_sne(g, x),
        MethodTag::Tsne => pressure_tsne(g, x, newton),
        MethodTag::Umap => pressure_umap(g, x, m),
    }
}

pub fn pressure_ee(g: &AffinityGraph, x: &Embedding) -> Result<PressureReport> {
    pressure_penalized(&Method::ee(), g, x, 0.0)
}

pub fn pressure_sne(g: &AffinityGraph, x: &Embedding) -> Result<PressureReport> {
    pressure_penalized(&Method::sne(), g, x, 0.0)
}

/// EE/SNE pressure of the slice with an extra `mu z^2` penalty, as seen by the
/// extra-dimension optimizer. `mu = 0` gives the plain pressure.
pub fn pressure_penalized(
    m: &Method,
    g: &AffinityGraph,
    x: &Embedding,
    mu: f64,
) -> Result<PressureReport> {
    x.check_matches(g)?;
    let eval = evaluate(m, g, x.coords().view(), false)?;
    pressure_from_evaluation(m, g, &eval, mu)
}

/// EE/SNE pressure from the repulsion row sums of an evaluation at `X`.
pub fn pressure_from_evaluation(
    m: &Method,
    g: &AffinityGraph,
    eval: &Evaluation,
    mu: f64,
) -> Result<PressureReport> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(EmbedError::Validation(format!("mu must be >= 0, got {mu}")));
    }
    let d_plus = g.d_plus();
    let rows = &eval.repulsion_rows;
    let mut warnings = Vec::new();
    let values: Vec<f64> = match m.tag {
        MethodTag::Ee => (0..g.n())
            .map(|k| {
                let (z, w) = ee_point(d_plus[k], rows[k], mu);
                if let Some(w) = w {
                    warnings.push((k, w));
                }
                z
            })
            .collect(),
        MethodTag::Sne => {
            let total: f64 = rows.iter().sum();
            (0..g.n())
                .map(|k| {
                    let (z, w) = sne_point(d_plus[k], rows[k], total, mu);
                    if let Some(w) = w {
                        warnings.push((k, w));
                    }
                    z
                })
                .collect()
        }
        other => {
            return Err(EmbedError::Unsupported(format!(
                "closed-form pressure for {other}"
            )))
        }
    };
    Ok(PressureReport::from_values(m.tag, values, warnings))
}

/// Slice `2 z^2 (d+ + mu/2) + 2 d- exp(-z^2)`: pressured iff `d- > d+ + mu/2`.
fn ee_point(d_plus: f64, d_minus: f64, mu: f64) -> (f64, Option<PressureWarning>) {
    if d_plus <= 0.0 {
        return (0.0, Some(PressureWarning::IsolatedPoint));
    }
    let attraction = d_plus + 0.5 * mu;
    if d_minus <= attraction {
        return (0.0, None);
    }
    let log_ratio = (d_minus / attraction).ln();
    if log_ratio > 0.0 {
        (log_ratio.sqrt(), None)
    } else {
        (0.0, None)
    }
}

/// Slice `2 z^2 (d+ + mu/2) + log(2 (exp(-z^2) - 1) d- + sum_n d-_n)`.
fn sne_point(d_plus: f64, d_minus: f64, total: f64, mu: f64) -> (f64, Option<PressureWarning>) {
    if d_plus <= 0.0 {
        return (0.0, Some(PressureWarning::IsolatedPoint));
    }
    let attraction = d_plus + 0.5 * mu;
    let rest = total - 2.0 * d_minus;
    let lhs = d_minus * (1.0 - 2.0 * attraction);
    let rhs = attraction * rest;
    if lhs <= rhs {
        return (0.0, None);
    }
    if rhs > 0.0 {
        let arg = lhs / rhs;
        return if arg > 1.0 {
            (arg.ln().sqrt(), None)
        } else {
            (0.0, None)
        };
    }
    // No pairs outside point k carry weight: the closed form breaks down.
    let slice = |z: f64| {
        let u = exp_neg(z * z);
        2.0 * z * z * attraction + (2.0 * (u - 1.0) * d_minus + total).ln()
    };
    let z = grid_then_golden(slice, 0.0, SEARCH_Z_MAX, FALLBACK_GRID);
    (z, Some(PressureWarning::NumericFallback))
}

/// Per-point t-SNE slice pieces: `q_i = 1 + s_ik`, attraction weights, and the
/// kernel mass of all pairs not involving `k`.
struct TsneSlice {
    q: Vec<f64>,
    w: Vec<f64>,
    rest: f64,
}

impl TsneSlice {
    fn new(k: usize, sq: &Array2<f64>, g: &AffinityGraph, total: f64) -> Self {
        let n = g.n();
        let mut q = Vec::with_capacity(n - 1);
        let mut w = Vec::with_capacity(n - 1);
        let mut own = 0.0;
        for i in (0..n).filter(|&i| i != k) {
            let qi = 1.0 + sq[[i, k]];
            own += 1.0 / qi;
            q.push(qi);
            w.push(g.w_plus()[[i, k]]);
        }
        Self {
            q,
            w,
            rest: total - 2.0 * own,
        }
    }

    /// `h(t)` with `dE/dz = 4 z h(z^2)`, and `dh/dt`.
    fn bracket_term(&self, t: f64) -> (f64, f64) {
        let (mut attr, mut attr_d) = (0.0, 0.0);
        let (mut a, mut b, mut a_d) = (0.0, self.rest, 0.0);
        for (&qi, &wi) in self.q.iter().zip(&self.w) {
            let r = 1.0 / (qi + t);
            attr += wi * r;
            attr_d -= wi * r * r;
            a += r * r;
            a_d -= 2.0 * r * r * r;
            b += 2.0 * r;
        }
        let b_d = -2.0 * a;
        let h = attr - a / b;
        let h_d = attr_d - (a_d * b - a * b_d) / (b * b);
        (h, h_d)
    }

    fn value(&self, z: f64) -> f64 {
        let t = z * z;
        let mut attr = 0.0;
        let mut norm = self.rest;
        for (&qi, &wi) in self.q.iter().zip(&self.w) {
            attr += wi * (qi + t).ln();
            norm += 2.0 / (qi + t);
        }
        2.0 * attr + norm.ln()
    }
}

pub fn pressure_tsne(
    g: &AffinityGraph,
    x: &Embedding,
    cfg: &NewtonConfig,
) -> Result<PressureReport> {
    x.check_matches(g)?;
    if !(cfg.init > 0.0 && cfg.init < NEWTON_Z_MAX) {
        return Err(EmbedError::Config(format!(
            "Newton init must lie in (0, {NEWTON_Z_MAX}), got {}",
            cfg.init
        )));
    }
    let sq = pairwise_sqdist(x.coords().view())?;
    let eval = evaluate(&Method::tsne(), g, x.coords().view(), false)?;
    let total: f64 = eval.repulsion_rows.iter().sum();
    let mut warnings = Vec::new();
    let mut values = Vec::with_capacity(g.n());
    for k in 0..g.n() {
        let slice = TsneSlice::new(k, &sq, g, total);
        // second derivative at 0 is 4 h(0)
        let (h0, _) = slice.bracket_term(0.0);
        if h0 >= 0.0 {
            values.push(0.0);
            continue;
        }
        match newton_root(&slice, cfg) {
            Some(z) => values.push(z),
            None => {
                warnings.push((k, PressureWarning::NewtonFallback));
                values.push(grid_then_golden(
                    |z| slice.value(z),
                    0.0,
                    NEWTON_Z_MAX,
                    FALLBACK_GRID,
                ));
            }
        }
    }
    Ok(PressureReport::from_values(
        MethodTag::Tsne,
        values,
        warnings,
    ))
}

/// Newton on `dE/dz`, kept inside the sign bracket `(lo, hi)` of `h`; any
/// iterate leaving the bracket (or a non-convex step) is replaced by bisection.
fn newton_root(slice: &TsneSlice, cfg: &NewtonConfig) -> Option<f64> {
    let (mut lo, mut hi) = (0.0, NEWTON_Z_MAX);
    let (h_hi, _) = slice.bracket_term(hi * hi);
    if h_hi <= 0.0 {
        return None;
    }
    let mut z = cfg.init;
    for _ in 0..cfg.max_iter {
        let (h, h_d) = slice.bracket_term(z * z);
        let d1 = 4.0 * z * h;
        if d1.abs() < cfg.tol {
            return Some(z);
        }
        if h < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let d2 = 4.0 * h + 8.0 * z * z * h_d;
        let step = z - d1 / d2;
        z = if d2 > 0.0 && step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
    }
    None
}

/// Change of the UMAP objective when point `k` moves to `z` along a fresh
/// dimension.
fn umap_slice_delta(m: &Method, sq: &Array2<f64>, g: &AffinityGraph, k: usize, z: f64) -> f64 {
    let (a, b) = (m.umap_a, m.umap_b);
    let pair = |s: f64, w: f64| {
        let s = s.max(UMAP_MIN_SQDIST);
        let xk = a * s.powf(b);
        let l = xk.ln_1p();
        w * l + (w - 1.0) * (xk.ln() - l)
    };
    let t = z * z;
    let mut delta = 0.0;
    for i in (0..g.n()).filter(|&i| i != k) {
        let (s, w) = (sq[[i, k]], g.w_plus()[[i, k]]);
        delta += pair(s + t, w) - pair(s, w);
    }
    2.0 * delta
}

pub fn pressure_umap(g: &AffinityGraph, x: &Embedding, m: &Method) -> Result<PressureReport> {
    x.check_matches(g)?;
    if m.tag != MethodTag::Umap {
        return Err(EmbedError::Validation(format!(
            "pressure_umap needs a UMAP method, got {}",
            m.tag
        )));
    }
    let sq = pairwise_sqdist(x.coords().view())?;
    let values = (0..g.n())
        .map(|k| {
            let h = UMAP_FD_STEP;
            // slice is even, so the central second difference is 2 delta(h) / h^2
            let curvature = 2.0 * umap_slice_delta(m, &sq, g, k, h) / (h * h);
            if curvature >= 0.0 {
                0.0
            } else {
                golden_section(
                    |z| umap_slice_delta(m, &sq, g, k, z),
                    0.0,
                    SEARCH_Z_MAX,
                    1e-10,
                )
            }
        })
        .collect();
    Ok(PressureReport::from_values(
        MethodTag::Umap,
        values,
        Vec::new(),
    ))
}

/// Full objective with point `k` displaced by `z` along a new dimension.
pub fn objective_slice(
    m: &Method,
    g: &AffinityGraph,
    x: &Embedding,
    k: usize,
    z: f64,
) -> Result<f64> {
    x.check_matches(g)?;
    if k >= x.n() {
        return Err(EmbedError::Validation(format!(
            "point index {k} out of range for {} points",
            x.n()
        )));
    }
    let (n, d) = x.coords().dim();
    let mut lifted = Array2::zeros((n, d + 1));
    lifted.slice_mut(ndarray::s![.., ..d]).assign(x.coords());
    lifted[[k, d]] = z;
    Ok(evaluate(m, g, lifted.view(), false)?.value.total)
}

/// Minimizer of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Grid search followed by golden-section refinement around the best node.
pub(crate) fn grid_then_golden(f: impl Fn(f64) -> f64, lo: f64, hi: f64, nodes: usize) -> f64 {
    let h = (hi - lo) / (nodes - 1) as f64;
    let (best, _) =
        (0..nodes)
            .map(|i| (i, f(lo + h * i as f64)))
            .fold(
                (0, f64::INFINITY),
                |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
            );
    let a = lo + h * best.saturating_sub(1) as f64;
    let b = (lo + h * (best + 1) as f64).min(hi);
    golden_section(f, a, b, 1e-12)
}
