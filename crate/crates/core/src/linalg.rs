//! Graph Laplacian and a dense Cholesky factorization for the spectral
//! direction's partial-Hessian solves.

use ndarray::Array2;

use crate::error::{EmbedError, Result};
use crate::types::AffinityGraph;

/// `L+ = D+ - W+`.
pub fn graph_laplacian(g: &AffinityGraph) -> Array2<f64> {
    let mut l = -g.w_plus();
    for (k, &d) in g.d_plus().iter().enumerate() {
        l[[k, k]] = d;
    }
    l
}

/// Lower-triangular factor `L` with `A = L L^T`, stored row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    factor: Vec<f64>,
}

impl Cholesky {
    /// Factors a symmetric positive-definite matrix; only the lower triangle is read.
    pub fn factor(a: &Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(EmbedError::Validation(format!(
                "cannot factor a {}x{} matrix",
                n,
                a.ncols()
            )));
        }
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                let dot: f64 = ri.iter().zip(rj).map(|(p, q)| p * q).sum();
                let v = a[[i, j]] - dot;
                if i == j {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(EmbedError::Evaluation(format!(
                            "matrix is not positive definite (pivot {i} = {v})"
                        )));
                    }
                    l[i * n + i] = v.sqrt();
                } else {
                    l[i * n + j] = v / l[j * n + j];
                }
            }
        }
        Ok(Self { n, factor: l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let l = &self.factor;
        for i in 0..n {
            let dot: f64 = l[i * n..i * n + i]
                .iter()
                .zip(&b[..i])
                .map(|(p, q)| p * q)
                .sum();
            b[i] = (b[i] - dot) / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            for k in (i + 1)..n {
                v -= l[k * n + i] * b[k];
            }
            b[i] = v / l[i * n + i];
        }
    }

    /// Solves column by column.
    pub fn solve_columns(&self, rhs: &Array2<f64>) -> Array2<f64> {
        let mut out = rhs.clone();
        let mut col = vec![0.0; self.n];
        for mut c in out.columns_mut() {
            for (v, x) in col.iter_mut().zip(c.iter()) {
                *v = *x;
            }
            self.solve_in_place(&mut col);
            for (x, v) in c.iter_mut().zip(&col) {
                *x = *v;
            }
        }
        out
    }
}
