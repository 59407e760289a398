//! Attraction/repulsion objectives and their gradients.
//!
//! Every objective is a sum over ordered pairs `i != j`, so each unordered
//! pair contributes twice. With `s = |x_i - x_j|^2`:
//!
//! | method | attraction              | repulsion                                  |
//! |--------|-------------------------|--------------------------------------------|
//! | EE     | `sum w+ s`              | `lambda sum w- exp(-s)`                    |
//! | SNE    | `sum w+ s`              | `log sum exp(-s)`                          |
//! | t-SNE  | `sum w+ log(1 + s)`     | `log sum 1 / (1 + s)`                      |
//! | UMAP   | `sum w+ log(1 + a s^b)` | `sum (w+ - 1) log(1 - 1 / (1 + a s^b))`    |
//!
//! The coordinate matrix may have any number of columns; the augmented
//! objective evaluates the same functions on `[X | Z]`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{EmbedError, Result};
use crate::types::{AffinityGraph, Embedding};

/// Squared distances below this are clamped before being inverted.
pub(crate) const MIN_SQDIST: f64 = 1e-30;
/// UMAP's log term diverges at zero distance; distances are clamped to 1e-8.
pub(crate) const UMAP_MIN_SQDIST: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodTag {
    #[serde(rename = "EE")]
    Ee,
    #[serde(rename = "SNE")]
    Sne,
    #[serde(rename = "TSNE")]
    Tsne,
    #[serde(rename = "UMAP")]
    Umap,
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodTag::Ee => "EE",
            MethodTag::Sne => "SNE",
            MethodTag::Tsne => "TSNE",
            MethodTag::Umap => "UMAP",
        })
    }
}

impl FromStr for MethodTag {
    type Err = EmbedError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ee" => Ok(MethodTag::Ee),
            "sne" => Ok(MethodTag::Sne),
            "tsne" | "t-sne" => Ok(MethodTag::Tsne),
            "umap" => Ok(MethodTag::Umap),
            other => Err(EmbedError::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub tag: MethodTag,
    /// UMAP kernel constants; ignored by the other methods.
    pub umap_a: f64,
    pub umap_b: f64,
}

impl Method {
    // a, b fitted for min_dist = 0.1, the common UMAP default
    pub const DEFAULT_UMAP_A: f64 = 1.577;
    pub const DEFAULT_UMAP_B: f64 = 0.8951;

    pub fn new(tag: MethodTag) -> Self {
        Self {
            tag,
            umap_a: Self::DEFAULT_UMAP_A,
            umap_b: Self::DEFAULT_UMAP_B,
        }
    }

    pub fn ee() -> Self {
        Self::new(MethodTag::Ee)
    }

    pub fn sne() -> Self {
        Self::new(MethodTag::Sne)
    }

    pub fn tsne() -> Self {
        Self::new(MethodTag::Tsne)
    }

    pub fn umap(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
            return Err(EmbedError::Config(format!(
                "UMAP constants must be positive, got a={a}, b={b}"
            )));
        }
        Ok(Self {
            tag: MethodTag::Umap,
            umap_a: a,
            umap_b: b,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub total: f64,
    pub attract: f64,
    pub repulse: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: ObjectiveValue,
    pub gradient: Option<Array2<f64>>,
    /// Per-point sums of the repulsive kernel over all other points:
    /// `lambda sum_i w-_ik exp(-s_ik)` (EE), `sum_i exp(-s_ik)` (SNE),
    /// `sum_i 1/(1+s_ik)` (t-SNE), `sum_i 1/(1+a s_ik^b)` (UMAP).
    pub repulsion_rows: Vec<f64>,
}

/// `exp(-s)` with arguments past the underflow limit mapped to exactly 0.
#[inline]
pub(crate) fn exp_neg(s: f64) -> f64 {
    if s > 708.0 {
        0.0
    } else {
        (-s).exp()
    }
}

pub fn objective(m: &Method, g: &AffinityGraph, x: &Embedding) -> Result<ObjectiveValue> {
    x.check_matches(g)?;
    Ok(evaluate(m, g, x.coords().view(), false)?.value)
}

pub fn gradient(m: &Method, g: &AffinityGraph, x: &Embedding) -> Result<Array2<f64>> {
    x.check_matches(g)?;
    Ok(evaluate(m, g, x.coords().view(), true)?
        .gradient
        .expect("gradient requested"))
}

/// Objective, optional gradient and repulsion row sums in one pass over the pairs.
pub fn evaluate(
    m: &Method,
    g: &AffinityGraph,
    coords: ArrayView2<f64>,
    with_grad: bool,
) -> Result<Evaluation> {
    let (n, dim) = coords.dim();
    if n != g.n() {
        return Err(EmbedError::Validation(format!(
            "coordinates have {n} rows but the affinity graph has {} points",
            g.n()
        )));
    }
    let x = coords.as_standard_layout();
    let x = x.as_slice().expect("standard layout");
    let wp = g.w_plus();
    let wm = g.w_minus();
    let lambda = g.lambda();

    let sqd = |i: usize, j: usize| -> f64 {
        let (a, b) = (&x[i * dim..(i + 1) * dim], &x[j * dim..(j + 1) * dim]);
        a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()
    };

    let mut rows = vec![0.0; n];
    let mut attract = 0.0;
    let mut repulse = 0.0;
    // per-pair gradient coefficient dE_pair/ds, upper triangle, row-major
    let mut coef: Vec<f64> = if with_grad {
        Vec::with_capacity(n * (n - 1) / 2)
    } else {
        Vec::new()
    };

    match m.tag {
        MethodTag::Ee => {
            for i in 0..n {
                for j in (i + 1)..n {
                    let s = sqd(i, j);
                    let (wpij, wmij) = (wp[[i, j]], wm[[i, j]]);
                    let k = lambda * wmij * exp_neg(s);
                    attract += wpij * s;
                    repulse += k;
                    rows[i] += k;
                    rows[j] += k;
                    if with_grad {
                        coef.push(wpij - k);
                    }
                }
            }
            attract *= 2.0;
            repulse *= 2.0;
        }
        MethodTag::Sne | MethodTag::Tsne => {
            let tsne = m.tag == MethodTag::Tsne;
            let mut kernel = Vec::with_capacity(n * (n - 1) / 2);
            let mut total = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    let s = sqd(i, j);
                    let w = wp[[i, j]];
                    let k = if tsne {
                        attract += w * s.ln_1p();
                        1.0 / (1.0 + s.max(MIN_SQDIST))
                    } else {
                        attract += w * s;
                        exp_neg(s)
                    };
                    total += k;
                    rows[i] += k;
                    rows[j] += k;
                    kernel.push(k);
                }
            }
            attract *= 2.0;
            total *= 2.0;
            if !(total > 0.0) {
                return Err(EmbedError::Evaluation(format!(
                    "{} normalizer underflowed to {total}",
                    m.tag
                )));
            }
            repulse = total.ln();
            if with_grad {
                let mut idx = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        let k = kernel[idx];
                        let w = wp[[i, j]];
                        coef.push(if tsne {
                            w * k - k * k / total
                        } else {
                            w - k / total
                        });
                        idx += 1;
                    }
                }
            }
        }
        MethodTag::Umap => {
            let (a, b) = (m.umap_a, m.umap_b);
            for i in 0..n {
                for j in (i + 1)..n {
                    let raw = sqd(i, j);
                    let s = raw.max(UMAP_MIN_SQDIST);
                    let xk = a * s.powf(b);
                    let l = xk.ln_1p();
                    let w = wp[[i, j]];
                    attract += w * l;
                    // log(1 - 1/(1+x)) = log(x) - log(1+x)
                    repulse += (w - 1.0) * (xk.ln() - l);
                    let k = 1.0 / (1.0 + xk);
                    rows[i] += k;
                    rows[j] += k;
                    if with_grad {
                        coef.push(if raw < UMAP_MIN_SQDIST {
                            0.0
                        } else {
                            b / s * (w - k)
                        });
                    }
                }
            }
            attract *= 2.0;
            repulse *= 2.0;
        }
    }

    let total = attract + repulse;
    if !total.is_finite() {
        return Err(EmbedError::Evaluation(format!(
            "{} objective is {total} (attract {attract}, repulse {repulse})",
            m.tag
        )));
    }

    let gradient = if with_grad {
        let mut grad = vec![0.0; n * dim];
        let mut idx = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let c = 4.0 * coef[idx];
                idx += 1;
                if c == 0.0 {
                    continue;
                }
                for t in 0..dim {
                    let f = c * (x[i * dim + t] - x[j * dim + t]);
                    grad[i * dim + t] += f;
                    grad[j * dim + t] -= f;
                }
            }
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::Evaluation(format!(
                "{} gradient is not finite",
                m.tag
            )));
        }
        Some(Array2::from_shape_vec((n, dim), grad).expect("shape"))
    } else {
        None
    };

    Ok(Evaluation {
        value: ObjectiveValue {
            total,
            attract,
            repulse,
        },
        gradient,
        repulsion_rows: rows,
    })
}
