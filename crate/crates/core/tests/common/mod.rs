//! Independent oracles shared by the integration tests. Nothing here calls
//! into the objective or pressure code of the crate; formulas are written out
//! as plain loops over ordered pairs.
#![allow(dead_code)]

use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pressure_embed::affinity::{build_affinities, AffinityConfig, BandwidthMode, RepulsionWeights};
use pressure_embed::data_io::{generate_rings, RingsConfig};
use pressure_embed::{AffinityGraph, Dataset, Embedding, Method, MethodTag, TraceRecord};

pub const FD_STEP: f64 = 1e-5;
pub const GRID_NODES: usize = 2001;
pub const GRID_MAX: f64 = 5.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn symmetric(n: usize, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Array2<f64> {
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.gen_range(lo..hi);
            w[[i, j]] = v;
            w[[j, i]] = v;
        }
    }
    w
}

/// Random graph suited to `tag`: probability-like attraction for SNE/t-SNE,
/// memberships in (0, 1) for UMAP, arbitrary weights for EE.
pub fn random_graph(tag: MethodTag, n: usize, rng: &mut ChaCha8Rng) -> AffinityGraph {
    let mut wp = symmetric(n, rng, 0.0, 1.0);
    match tag {
        MethodTag::Sne | MethodTag::Tsne => {
            let total = wp.sum();
            wp.mapv_inplace(|v| v / total);
        }
        MethodTag::Ee => wp.mapv_inplace(|v| 0.5 * v),
        MethodTag::Umap => {}
    }
    let wm = symmetric(n, rng, 0.5, 2.0);
    let lambda = rng.gen_range(0.5..2.0);
    AffinityGraph::new(wp, wm, lambda).unwrap()
}

pub fn random_coords(n: usize, d: usize, scale: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.gen_range(-scale..scale))
}

pub fn method_for(tag: MethodTag) -> Method {
    match tag {
        MethodTag::Ee => Method::ee(),
        MethodTag::Sne => Method::sne(),
        MethodTag::Tsne => Method::tsne(),
        MethodTag::Umap => Method::umap(1.577, 0.8951).unwrap(),
    }
}

pub const ALL_TAGS: [MethodTag; 4] = [
    MethodTag::Ee,
    MethodTag::Sne,
    MethodTag::Tsne,
    MethodTag::Umap,
];

fn sqdist(x: &Array2<f64>, i: usize, j: usize) -> f64 {
    x.row(i)
        .iter()
        .zip(x.row(j).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// The four objectives written verbatim over ordered pairs `i != j`.
pub fn naive_objective(m: &Method, g: &AffinityGraph, x: &Array2<f64>) -> f64 {
    let n = x.nrows();
    let (wp, wm) = (g.w_plus(), g.w_minus());
    let mut attract = 0.0;
    let mut repulse = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let s = sqdist(x, i, j);
            match m.tag {
                MethodTag::Ee => {
                    attract += wp[[i, j]] * s;
                    repulse += g.lambda() * wm[[i, j]] * (-s).exp();
                }
                MethodTag::Sne => {
                    attract += wp[[i, j]] * s;
                    repulse += (-s).exp();
                }
                MethodTag::Tsne => {
                    attract += wp[[i, j]] * (1.0 + s).ln();
                    repulse += 1.0 / (1.0 + s);
                }
                MethodTag::Umap => {
                    let q = m.umap_a * s.max(1e-16).powf(m.umap_b);
                    attract += wp[[i, j]] * (1.0 + q).ln();
                    repulse += (wp[[i, j]] - 1.0) * (1.0 - 1.0 / (1.0 + q)).ln();
                }
            }
        }
    }
    match m.tag {
        MethodTag::Sne | MethodTag::Tsne => attract + repulse.ln(),
        _ => attract + repulse,
    }
}

/// `[X | e_k z]`: point `k` lifted by `z` along a fresh dimension.
pub fn lift_one(x: &Array2<f64>, k: usize, z: f64) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut out = Array2::zeros((n, d + 1));
    out.slice_mut(ndarray::s![.., ..d]).assign(x);
    out[[k, d]] = z;
    out
}

pub fn lift_all(x: &Array2<f64>, z: &[f64]) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut out = Array2::zeros((n, d + 1));
    out.slice_mut(ndarray::s![.., ..d]).assign(x);
    for i in 0..n {
        out[[i, d]] = z[i];
    }
    out
}

/// Brute-force pressure: argmin of the slice over `GRID_NODES` points of
/// `[0, GRID_MAX]`. Pressured iff the minimum is not at `z = 0`.
pub fn grid_pressure(m: &Method, g: &AffinityGraph, x: &Array2<f64>, k: usize) -> f64 {
    let h = GRID_MAX / (GRID_NODES - 1) as f64;
    let mut best = (0.0, naive_objective(m, g, &lift_one(x, k, 0.0)));
    for i in 1..GRID_NODES {
        let z = h * i as f64;
        let v = naive_objective(m, g, &lift_one(x, k, z));
        if v < best.1 {
            best = (z, v);
        }
    }
    best.0
}

/// Central differences of `f` at every entry of `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = v[i];
            v[i] = orig + FD_STEP;
            let up = f(&v);
            v[i] = orig - FD_STEP;
            let down = f(&v);
            v[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `||a - b|| / ||b||` (absolute when `b` is 0).
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// The EE augmented objective written as the four-term expansion: the
/// non-pressured block, the lifted pressured block, and the cross terms
/// (attraction in X, repulsion damped by `exp(-z_i^2)`, and `z_i^2` pulled by
/// the cross attraction), plus the penalty.
pub fn ee_expansion(
    g: &AffinityGraph,
    x: &Array2<f64>,
    z: &[f64],
    pressured: &[bool],
    mu: f64,
) -> f64 {
    let n = x.nrows();
    let (wp, wm, lambda) = (g.w_plus(), g.w_minus(), g.lambda());
    let mut outside = 0.0;
    let mut inside = 0.0;
    let mut cross_attract = 0.0;
    let mut cross_repulse = 0.0;
    let mut cross_z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let s = sqdist(x, i, j);
            match (pressured[i], pressured[j]) {
                (false, false) => outside += wp[[i, j]] * s + lambda * wm[[i, j]] * (-s).exp(),
                (true, true) => {
                    let t = s + (z[i] - z[j]).powi(2);
                    inside += wp[[i, j]] * t + lambda * wm[[i, j]] * (-t).exp();
                }
                (true, false) => {
                    cross_attract += wp[[i, j]] * s;
                    cross_repulse += (-z[i] * z[i]).exp() * wm[[i, j]] * (-s).exp();
                    cross_z += z[i] * z[i] * wp[[i, j]];
                }
                (false, true) => {}
            }
        }
    }
    let penalty: f64 = (0..n)
        .filter(|&i| pressured[i])
        .map(|i| mu * z[i] * z[i])
        .sum();
    outside + inside + 2.0 * (cross_attract + lambda * cross_repulse + cross_z) + penalty
}

/// Three points on a line: `y0`, `y1` close, `y2` far, Gaussian attraction
/// with `sigma = 2`, squared-distance repulsion, `lambda = 1`.
pub fn three_point_graph() -> AffinityGraph {
    let data = Dataset::new(array![[0.0], [0.5], [3.0]], None).unwrap();
    let cfg = AffinityConfig {
        mode: BandwidthMode::FixedSigma(2.0),
        lambda: 1.0,
        w_minus_mode: RepulsionWeights::Sqdist,
    };
    build_affinities(&data, &cfg).unwrap()
}

/// `x2` placed between `x0` and `x1`.
pub fn three_point_init() -> Embedding {
    Embedding::new(array![[-1.0], [1.0], [0.0]]).unwrap()
}

/// Nodes of `[-5, 5]` for the 1-D search over `x0`.
pub const X0_GRID: usize = 10_001;

/// `E` as a function of `x0` with the other points held fixed:
/// `(nodes, values)`.
pub fn x0_profile(m: &Method, g: &AffinityGraph, x: &Embedding) -> (Vec<f64>, Vec<f64>) {
    let mut c = x.coords().clone();
    let nodes: Vec<f64> = (0..X0_GRID)
        .map(|i| -5.0 + 10.0 * i as f64 / (X0_GRID - 1) as f64)
        .collect();
    let values = nodes
        .iter()
        .map(|&t| {
            c[[0, 0]] = t;
            naive_objective(m, g, &c)
        })
        .collect();
    (nodes, values)
}

/// Interior grid minima `(x0, E)` of a profile.
pub fn local_minima(nodes: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    (1..nodes.len() - 1)
        .filter(|&i| values[i] < values[i - 1] && values[i] <= values[i + 1])
        .map(|i| (nodes[i], values[i]))
        .collect()
}

pub const RING_SEEDS: u64 = 10;

/// The rings benchmark: default 10 x 72 rings, perplexity 20, and
/// `(lambda, repulsion)` per method.
pub fn rings_graph(tag: MethodTag) -> AffinityGraph {
    let data = generate_rings(&RingsConfig::default(), 0).unwrap();
    let cfg = AffinityConfig {
        mode: BandwidthMode::Perplexity(20.0),
        lambda: match tag {
            MethodTag::Ee => 1e-4,
            _ => 1.0,
        },
        w_minus_mode: RepulsionWeights::Uniform,
    };
    build_affinities(&data, &cfg).unwrap()
}

/// Trace entries whose objective went up relative to the objective they
/// started from. The Armijo test guarantees a strict decrease; 1e-12 relative
/// slack absorbs the last bit of rounding.
pub fn monotonicity_violations(trace: &[TraceRecord]) -> usize {
    trace
        .iter()
        .filter(|r| r.step > 0.0)
        .filter(|r| r.objective > r.start_objective + 1e-12 * r.start_objective.abs().max(1.0))
        .count()
}

/// For runs without a penalty stage, also check consecutive records.
pub fn sequence_violations(trace: &[TraceRecord]) -> usize {
    trace
        .windows(2)
        .filter(|w| w[1].objective > w[0].objective + 1e-12 * w[0].objective.abs().max(1.0))
        .count()
}
