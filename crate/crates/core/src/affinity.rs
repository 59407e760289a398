//! Input-space affinities: attraction weights from a Gaussian kernel (fixed
//! bandwidth or per-point perplexity calibration) and repulsion weights.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{EmbedError, Result};
use crate::types::{pairwise_sqdist, AffinityGraph, Dataset};

const MAX_BISECTION_STEPS: usize = 200;
const PERPLEXITY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMode {
    FixedSigma(f64),
    Perplexity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepulsionWeights {
    /// `w-_ij = |y_i - y_j|^2`
    Sqdist,
    /// `w-_ij = 1` off the diagonal
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinityConfig {
    pub mode: BandwidthMode,
    pub lambda: f64,
    pub w_minus_mode: RepulsionWeights,
}

impl Default for AffinityConfig {
    fn default() -> Self {
        Self {
            mode: BandwidthMode::Perplexity(20.0),
            lambda: 1.0,
            w_minus_mode: RepulsionWeights::Sqdist,
        }
    }
}

impl AffinityConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self.mode {
            BandwidthMode::FixedSigma(s) if !(s.is_finite() && s > 0.0) => {
                return Err(EmbedError::Config(format!(
                    "sigma must be positive, got {s}"
                )))
            }
            BandwidthMode::Perplexity(p) if !(p > 1.0 && p < n as f64) => {
                return Err(EmbedError::Config(format!(
                    "perplexity must lie in (1, {n}), got {p}"
                )))
            }
            _ => {}
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(EmbedError::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

pub fn build_affinities(data: &Dataset, cfg: &AffinityConfig) -> Result<AffinityGraph> {
    let n = data.n();
    cfg.validate(n)?;
    let sq = pairwise_sqdist(data.points.view())?;

    let w_plus = match cfg.mode {
        BandwidthMode::FixedSigma(sigma) => {
            let scale = 1.0 / (2.0 * sigma * sigma);
            let mut w = sq.mapv(|s| (-s * scale).exp());
            w.diag_mut().fill(0.0);
            w
        }
        BandwidthMode::Perplexity(perplexity) => {
            let (p, _) = conditional_probabilities(&sq, perplexity)?;
            let mut w = &p + &p.t();
            w.mapv_inplace(|v| 0.5 * v / n as f64);
            w
        }
    };

    let mut w_minus = match cfg.w_minus_mode {
        RepulsionWeights::Sqdist => sq,
        RepulsionWeights::Uniform => Array2::ones((n, n)),
    };
    w_minus.diag_mut().fill(0.0);

    AffinityGraph::new(w_plus, w_minus, cfg.lambda)
}

/// Row-stochastic Gaussian neighbor probabilities, each row calibrated so
/// that its perplexity `exp(H)` equals `perplexity`.
///
/// Returns the matrix and the per-row precisions `beta_i = 1 / (2 sigma_i^2)`.
pub fn conditional_probabilities(
    sqdist: &Array2<f64>,
    perplexity: f64,
) -> Result<(Array2<f64>, Vec<f64>)> {
    let n = sqdist.nrows();
    let target = perplexity.ln();
    let mut p = Array2::zeros((n, n));
    let mut betas = Vec::with_capacity(n);
    let mut row = vec![0.0; n];

    for i in 0..n {
        let dists: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| sqdist[[i, j]]).collect();
        let d_min = dists.iter().copied().fold(f64::INFINITY, f64::min);

        let mut beta = 1.0;
        let mut lo = 0.0;
        let mut hi = f64::INFINITY;
        let mut found = false;
        for _ in 0..MAX_BISECTION_STEPS {
            let h = row_entropy(&dists, d_min, beta, &mut row);
            if (h.exp() - perplexity).abs() <= PERPLEXITY_TOL {
                found = true;
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_finite() {
                    0.5 * (beta + hi)
                } else {
                    beta * 2.0
                };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        if !found {
            return Err(EmbedError::Calibration {
                point: i,
                reason: format!(
                    "no bandwidth reaches perplexity {perplexity} within {MAX_BISECTION_STEPS} bisection steps"
                ),
            });
        }
        row_entropy(&dists, d_min, beta, &mut row);
        let mut it = row.iter();
        for j in (0..n).filter(|&j| j != i) {
            p[[i, j]] = *it.next().unwrap();
        }
        betas.push(beta);
    }
    Ok((p, betas))
}

/// Fills `out[..dists.len()]` with normalized probabilities and returns their
/// Shannon entropy (nats).
fn row_entropy(dists: &[f64], d_min: f64, beta: f64, out: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for (o, &d) in out.iter_mut().zip(dists) {
        *o = (-beta * (d - d_min)).exp();
        total += *o;
    }
    let mut h = 0.0;
    for o in out.iter_mut().take(dists.len()) {
        *o /= total;
        if *o > 0.0 {
            h -= *o * o.ln();
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(n: usize, dim: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = Array2::from_shape_fn((n, dim), |_| rng.gen_range(-2.0..2.0));
        Dataset::new(pts, None).unwrap()
    }

    #[test]
    fn two_point_fixed_sigma() {
        let data = Dataset::new(array![[0.0, 0.0], [1.0, 1.0]], None).unwrap();
        let cfg = AffinityConfig {
            mode: BandwidthMode::FixedSigma(1.0),
            lambda: 1.0,
            w_minus_mode: RepulsionWeights::Sqdist,
        };
        let g = build_affinities(&data, &cfg).unwrap();
        assert!((g.w_plus()[[0, 1]] - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(g.w_minus()[[0, 1]], 2.0);
        assert_eq!(g.w_plus()[[0, 0]], 0.0);

        let cfg = AffinityConfig {
            w_minus_mode: RepulsionWeights::Uniform,
            ..cfg
        };
        let g = build_affinities(&data, &cfg).unwrap();
        assert_eq!(g.w_minus()[[0, 1]], 1.0);
        assert_eq!(g.w_minus()[[1, 1]], 0.0);
    }

    #[test]
    fn perplexity_rows_hit_target() {
        let data = random_dataset(10, 3, 7);
        let sq = pairwise_sqdist(data.points.view()).unwrap();
        let (p, _) = conditional_probabilities(&sq, 5.0).unwrap();
        for i in 0..10 {
            // independent entropy recomputation
            let row: Vec<f64> = (0..10).filter(|&j| j != i).map(|j| p[[i, j]]).collect();
            let total: f64 = row.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            let h: f64 = row.iter().filter(|&&q| q > 0.0).map(|&q| -q * q.ln()).sum();
            assert!((h.exp() - 5.0).abs() < 1e-3, "row {i}: {}", h.exp());
            assert_eq!(p[[i, i]], 0.0);
        }
    }

    #[test]
    fn perplexity_graph_is_symmetric_and_sums_to_one() {
        let data = random_dataset(12, 4, 3);
        let g = build_affinities(&data, &AffinityConfig::default().with_perplexity(4.0)).unwrap();
        let w = g.w_plus();
        assert!((w.sum() - 1.0).abs() < 1e-12);
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(w[[i, j]], w[[j, i]]);
            }
        }
    }

    #[test]
    fn unreachable_perplexity_is_a_calibration_error() {
        // three coincident points: every row has entropy ln 2 whatever the bandwidth
        let data = Dataset::new(array![[0.0], [0.0], [0.0]], None).unwrap();
        let sq = pairwise_sqdist(data.points.view()).unwrap();
        match conditional_probabilities(&sq, 2.5) {
            Err(EmbedError::Calibration { point, .. }) => assert_eq!(point, 0),
            other => panic!("expected calibration error, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let data = random_dataset(5, 2, 1);
        let bad = AffinityConfig::default().with_perplexity(5.0);
        assert!(build_affinities(&data, &bad).is_err());
        let bad = AffinityConfig {
            mode: BandwidthMode::FixedSigma(0.0),
            ..AffinityConfig::default()
        };
        assert!(build_affinities(&data, &bad).is_err());
    }

    #[test]
    fn fixed_sigma_scale_invariance_and_monotonicity() {
        let data = random_dataset(8, 3, 11);
        let c = 3.7;
        let scaled = Dataset::new(data.points.mapv(|v| v * c), None).unwrap();
        let cfg = |s| AffinityConfig {
            mode: BandwidthMode::FixedSigma(s),
            ..AffinityConfig::default()
        };
        let a = build_affinities(&data, &cfg(0.8)).unwrap();
        let b = build_affinities(&scaled, &cfg(0.8 * c)).unwrap();
        for (x, y) in a.w_plus().iter().zip(b.w_plus().iter()) {
            assert!((x - y).abs() < 1e-9);
        }

        let mut prev = f64::INFINITY;
        for step in 1..10 {
            let pts = array![[0.0], [step as f64 * 0.3], [50.0]];
            let g = build_affinities(&Dataset::new(pts, None).unwrap(), &cfg(1.0)).unwrap();
            assert!(g.w_plus()[[0, 1]] < prev);
            prev = g.w_plus()[[0, 1]];
        }
    }

    impl AffinityConfig {
        fn with_perplexity(self, p: f64) -> Self {
            Self {
                mode: BandwidthMode::Perplexity(p),
                ..self
            }
        }
    }
}
