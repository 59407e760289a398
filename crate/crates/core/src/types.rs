//! Domain records shared across the crate.
//!
//! Matrices are dense and row-major by point index: row `i` of a dataset or
//! embedding is point `i`. All arithmetic is `f64`.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{EmbedError, Result};
use crate::objectives::MethodTag;

/// Input-space points with optional ground-truth labels (used for coloring only).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Array2<f64>,
    pub labels: Option<Vec<i64>>,
}

impl Dataset {
    pub fn new(points: Array2<f64>, labels: Option<Vec<i64>>) -> Result<Self> {
        let (n, dim) = points.dim();
        if n < 2 {
            return Err(EmbedError::Validation(format!(
                "dataset needs at least 2 points, got {n}"
            )));
        }
        if dim < 1 {
            return Err(EmbedError::Validation("dataset has zero columns".into()));
        }
        check_finite(points.view(), "dataset")?;
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(EmbedError::Validation(format!(
                    "{} labels for {n} points",
                    labels.len()
                )));
            }
        }
        Ok(Self { points, labels })
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

/// Attraction and repulsion weights over all point pairs.
///
/// Both weight matrices are symmetric, nonnegative and have a zero diagonal;
/// `d_plus[k]` is the column sum of `w_plus`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph {
    w_plus: Array2<f64>,
    w_minus: Array2<f64>,
    d_plus: Array1<f64>,
    lambda: f64,
}

impl AffinityGraph {
    /// Validates the weights, zeroes the diagonals and computes the degrees.
    ///
    /// Asymmetry up to `1e-12` relative is tolerated and removed by averaging.
    pub fn new(mut w_plus: Array2<f64>, mut w_minus: Array2<f64>, lambda: f64) -> Result<Self> {
        let n = w_plus.nrows();
        if w_plus.dim() != (n, n) || w_minus.dim() != (n, n) {
            return Err(EmbedError::Validation(format!(
                "weight matrices must both be square of the same size, got {:?} and {:?}",
                w_plus.dim(),
                w_minus.dim()
            )));
        }
        if n < 2 {
            return Err(EmbedError::Validation(
                "affinity graph needs at least 2 points".into(),
            ));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(EmbedError::Validation(format!(
                "lambda must be >= 0, got {lambda}"
            )));
        }
        for (name, w) in [("w_plus", &mut w_plus), ("w_minus", &mut w_minus)] {
            check_finite(w.view(), name)?;
            for i in 0..n {
                w[[i, i]] = 0.0;
                for j in (i + 1)..n {
                    let (a, b) = (w[[i, j]], w[[j, i]]);
                    if a < 0.0 || b < 0.0 {
                        return Err(EmbedError::Validation(format!(
                            "{name} has a negative entry at ({i}, {j})"
                        )));
                    }
                    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
                        return Err(EmbedError::Validation(format!(
                            "{name} is not symmetric at ({i}, {j}): {a} vs {b}"
                        )));
                    }
                    let mean = 0.5 * (a + b);
                    w[[i, j]] = mean;
                    w[[j, i]] = mean;
                }
            }
        }
        let d_plus = w_plus.sum_axis(ndarray::Axis(0));
        Ok(Self {
            w_plus,
            w_minus,
            d_plus,
            lambda,
        })
    }

    pub fn n(&self) -> usize {
        self.w_plus.nrows()
    }

    pub fn w_plus(&self) -> &Array2<f64> {
        &self.w_plus
    }

    pub fn w_minus(&self) -> &Array2<f64> {
        &self.w_minus
    }

    pub fn d_plus(&self) -> &Array1<f64> {
        &self.d_plus
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same weights with a different repulsion scale.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(EmbedError::Validation(format!(
                "lambda must be >= 0, got {lambda}"
            )));
        }
        Ok(Self {
            lambda,
            ..self.clone()
        })
    }
}

/// Low-dimensional coordinates, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    coords: Array2<f64>,
}

impl Embedding {
    pub fn new(coords: Array2<f64>) -> Result<Self> {
        if coords.ncols() == 0 {
            return Err(EmbedError::Validation("embedding has zero columns".into()));
        }
        check_finite(coords.view(), "embedding")?;
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &Array2<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> Array2<f64> {
        self.coords
    }

    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub(crate) fn check_matches(&self, g: &AffinityGraph) -> Result<()> {
        if self.n() != g.n() {
            return Err(EmbedError::Validation(format!(
                "embedding has {} points but the affinity graph has {}",
                self.n(),
                g.n()
            )));
        }
        Ok(())
    }
}

/// Something worth surfacing about an individual point's pressure value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureWarning {
    /// Zero attraction degree; reported as not pressured.
    IsolatedPoint,
    /// Closed form unusable; value found by numeric search of the slice.
    NumericFallback,
    /// Root finder did not converge; value found by numeric search of the slice.
    NewtonFallback,
}

/// Per-point pressure values at a given embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureReport {
    pub pressure: Vec<f64>,
    pub pressured_set: BTreeSet<usize>,
    pub fraction: f64,
    pub method: MethodTag,
    pub warnings: Vec<(usize, PressureWarning)>,
}

impl PressureReport {
    pub fn from_values(
        method: MethodTag,
        pressure: Vec<f64>,
        warnings: Vec<(usize, PressureWarning)>,
    ) -> Self {
        let pressured_set: BTreeSet<usize> = pressure
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, _)| k)
            .collect();
        let fraction = if pressure.is_empty() {
            0.0
        } else {
            pressured_set.len() as f64 / pressure.len() as f64
        };
        Self {
            pressure,
            pressured_set,
            fraction,
            method,
            warnings,
        }
    }

    pub fn is_pressured(&self, k: usize) -> bool {
        self.pressure[k] > 0.0
    }
}

/// State of the extra-dimension optimization: `z[i]` is nonzero only inside
/// the pressured set.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub embedding: Embedding,
    pub z: Vec<f64>,
    pub pressured: Vec<bool>,
    pub mu: f64,
}

impl AugmentedState {
    /// State with an empty pressured set and `z = 0`.
    pub fn flat(embedding: Embedding, mu: f64) -> Self {
        let n = embedding.n();
        Self {
            embedding,
            z: vec![0.0; n],
            pressured: vec![false; n],
            mu,
        }
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn pressured_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.pressured[i]).collect()
    }

    pub fn pressured_count(&self) -> usize {
        self.pressured.iter().filter(|&&p| p).count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.embedding.n();
        if self.z.len() != n || self.pressured.len() != n {
            return Err(EmbedError::Validation(format!(
                "augmented state sizes disagree: {n} points, {} z values, {} flags",
                self.z.len(),
                self.pressured.len()
            )));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(EmbedError::Validation(format!(
                "mu must be >= 0, got {}",
                self.mu
            )));
        }
        for (i, (&z, &p)) in self.z.iter().zip(&self.pressured).enumerate() {
            if !z.is_finite() {
                return Err(EmbedError::Validation(format!("z[{i}] is not finite")));
            }
            if !p && z != 0.0 {
                return Err(EmbedError::Validation(format!(
                    "z[{i}] = {z} but point {i} is not in the pressured set"
                )));
            }
        }
        Ok(())
    }

    /// `[X | Z]` as an `N x (d+1)` matrix.
    pub fn lifted_coords(&self) -> Array2<f64> {
        let x = self.embedding.coords();
        let (n, d) = x.dim();
        let mut out = Array2::zeros((n, d + 1));
        out.slice_mut(ndarray::s![.., ..d]).assign(x);
        for i in 0..n {
            out[[i, d]] = self.z[i];
        }
        out
    }
}

/// One optimizer iteration.
///
/// `objective` is the value of the objective being minimized at that
/// iteration (the augmented one during pressured-point refinement),
/// `start_objective` is the same objective before the step, and
/// `base_objective` is always the plain d-dimensional objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub start_objective: f64,
    pub base_objective: f64,
    pub step: f64,
    pub pressured_fraction: f64,
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct OptimRun {
    pub trace: Vec<TraceRecord>,
    pub final_embedding: Embedding,
    pub final_objective: f64,
    pub converged: bool,
    /// Number of mu values visited (0 for plain minimization).
    pub mu_steps: usize,
    pub warnings: Vec<String>,
}

/// Squared Euclidean distances between all rows.
pub fn pairwise_sqdist(points: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_finite(points, "points")?;
    let n = points.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        let pi = points.row(i);
        for j in (i + 1)..n {
            let s: f64 = pi
                .iter()
                .zip(points.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let s = s.max(0.0);
            out[[i, j]] = s;
            out[[j, i]] = s;
        }
    }
    Ok(out)
}

pub(crate) fn check_finite(m: ArrayView2<f64>, what: &str) -> Result<()> {
    if let Some(((i, j), v)) = m.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(EmbedError::Validation(format!(
            "{what} has a non-finite entry {v} at ({i}, {j})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn sqdist_small_cases() {
        let d = pairwise_sqdist(array![[0.0], [1.0]].view()).unwrap();
        assert_eq!(d, array![[0.0, 1.0], [1.0, 0.0]]);
        let d = pairwise_sqdist(array![[0.0, 0.0], [3.0, 4.0]].view()).unwrap();
        assert_eq!(d, array![[0.0, 25.0], [25.0, 0.0]]);
    }

    #[test]
    fn sqdist_matches_loop() {
        let p = array![
            [0.3, -1.2, 2.0],
            [1.1, 0.4, -0.7],
            [-2.2, 0.9, 0.1],
            [0.0, 0.0, 5.5],
            [3.3, -0.1, -4.0]
        ];
        let d = pairwise_sqdist(p.view()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let mut s = 0.0;
                for m in 0..3 {
                    s += (p[[i, m]] - p[[j, m]]).powi(2);
                }
                assert!((d[[i, j]] - s).abs() <= 1e-12 * s.max(1.0));
            }
        }
    }

    #[test]
    fn sqdist_rejects_nan() {
        assert!(pairwise_sqdist(array![[0.0], [f64::NAN]].view()).is_err());
    }

    #[test]
    fn graph_zeroes_diagonal_and_computes_degrees() {
        let wp = array![[5.0, 1.0, 2.0], [1.0, 5.0, 0.5], [2.0, 0.5, 9.0]];
        let g = AffinityGraph::new(wp, Array2::ones((3, 3)), 1.0).unwrap();
        assert_eq!(g.w_plus()[[1, 1]], 0.0);
        assert_eq!(g.w_minus()[[2, 2]], 0.0);
        assert_eq!(g.d_plus().to_vec(), vec![3.0, 1.5, 2.5]);
    }

    #[test]
    fn graph_rejects_asymmetric_and_negative() {
        let wp = array![[0.0, 1.0], [2.0, 0.0]];
        assert!(AffinityGraph::new(wp, Array2::zeros((2, 2)), 1.0).is_err());
        let wp = array![[0.0, -1.0], [-1.0, 0.0]];
        assert!(AffinityGraph::new(wp, Array2::zeros((2, 2)), 1.0).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(array![[0.0]], None).is_err());
        assert!(Dataset::new(array![[0.0], [1.0]], Some(vec![1])).is_err());
        assert!(Dataset::new(array![[0.0], [f64::INFINITY]], None).is_err());
        assert!(Dataset::new(array![[0.0], [1.0]], Some(vec![1, 2])).is_ok());
    }

    #[test]
    fn augmented_state_invariant() {
        let e = Embedding::new(array![[0.0], [1.0]]).unwrap();
        let mut s = AugmentedState::flat(e, 0.0);
        assert!(s.validate().is_ok());
        s.z[1] = 0.5;
        assert!(s.validate().is_err());
        s.pressured[1] = true;
        assert!(s.validate().is_ok());
        assert_eq!(s.lifted_coords(), array![[0.0, 0.0], [1.0, 0.5]]);
    }

    proptest! {
        #[test]
        fn sqdist_translation_invariant(
            pts in proptest::collection::vec(-10.0f64..10.0, 12),
            shift in proptest::collection::vec(-100.0f64..100.0, 3),
        ) {
            let p = Array2::from_shape_vec((4, 3), pts).unwrap();
            let mut q = p.clone();
            for mut row in q.rows_mut() {
                for (v, s) in row.iter_mut().zip(&shift) {
                    *v += s;
                }
            }
            let a = pairwise_sqdist(p.view()).unwrap();
            let b = pairwise_sqdist(q.view()).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }

        #[test]
        fn degrees_match_column_sums(ws in proptest::collection::vec(0.0f64..3.0, 10)) {
            let mut wp = Array2::zeros((5, 5));
            let mut it = ws.into_iter();
            for i in 0..5 {
                for j in (i + 1)..5 {
                    let w = it.next().unwrap();
                    wp[[i, j]] = w;
                    wp[[j, i]] = w;
                }
            }
            let g = AffinityGraph::new(wp, Array2::zeros((5, 5)), 1.0).unwrap();
            for k in 0..5 {
                let s: f64 = (0..5).map(|i| g.w_plus()[[i, k]]).sum();
                prop_assert!((s - g.d_plus()[k]).abs() <= 1e-12 * s.max(1e-300));
            }
        }
    }
}
