use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{EmbedError, Result};
use crate::types::Dataset;

const SWISSROLL_CLASSES: f64 = 10.0;

/// Point on the noiseless roll: `(t cos t, h, t sin t)`.
pub fn swissroll_point(t: f64, h: f64) -> [f64; 3] {
    [t * t.cos(), h, t * t.sin()]
}

/// Swiss roll with `t ~ U[1.5 pi, 4.5 pi]`, `h ~ U[0, 20]` and isotropic
/// Gaussian noise; labels are `t` quantized into 10 bands.
pub fn generate_swissroll(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 10 {
        return Err(EmbedError::Config(format!(
            "swiss roll needs n >= 10, got {n}"
        )));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(EmbedError::Config(format!(
            "noise must be >= 0, got {noise}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t_lo, t_span) = (1.5 * PI, 3.0 * PI);
    let mut points = Array2::zeros((n, 3));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t = t_lo + t_span * rng.gen::<f64>();
        let h = 20.0 * rng.gen::<f64>();
        let p = swissroll_point(t, h);
        for (c, v) in p.iter().enumerate() {
            let eps: f64 = if noise > 0.0 {
                noise * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            points[[i, c]] = v + eps;
        }
        let band = ((t - t_lo) / t_span * SWISSROLL_CLASSES).floor();
        labels.push(band.min(SWISSROLL_CLASSES - 1.0) as i64);
    }
    Dataset::new(points, Some(labels))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingsConfig {
    pub n_objects: usize,
    pub points_per_ring: usize,
    pub radius: f64,
    pub separation: f64,
}

impl Default for RingsConfig {
    fn default() -> Self {
        // 10 objects photographed every 5 degrees
        Self {
            n_objects: 10,
            points_per_ring: 72,
            radius: 1.0,
            separation: 3.0,
        }
    }
}

/// Circles in 3-D, one per object, at random orientations; centers are at
/// least `separation` apart. Points are evenly spaced around each circle and
/// labeled by circle.
pub fn generate_rings(cfg: &RingsConfig, seed: u64) -> Result<Dataset> {
    if cfg.points_per_ring < 8 {
        return Err(EmbedError::Config(format!(
            "rings need at least 8 points each, got {}",
            cfg.points_per_ring
        )));
    }
    if cfg.n_objects == 0 || !(cfg.radius > 0.0) || !(cfg.separation >= 0.0) {
        return Err(EmbedError::Config(format!(
            "invalid ring configuration {cfg:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = place_centers(cfg.n_objects, cfg.separation, &mut rng);

    let n = cfg.n_objects * cfg.points_per_ring;
    let mut points = Array2::zeros((n, 3));
    let mut labels = Vec::with_capacity(n);
    for (obj, c) in centers.iter().enumerate() {
        let (u, v) = random_plane(&mut rng);
        for j in 0..cfg.points_per_ring {
            let theta = 2.0 * PI * j as f64 / cfg.points_per_ring as f64;
            let (s, co) = theta.sin_cos();
            let row = obj * cfg.points_per_ring + j;
            for a in 0..3 {
                points[[row, a]] = c[a] + cfg.radius * (co * u[a] + s * v[a]);
            }
            labels.push(obj as i64);
        }
    }
    Dataset::new(points, Some(labels))
}

fn place_centers(k: usize, separation: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let mut side = (separation * (k as f64).cbrt() * 1.5).max(1.0);
    loop {
        let mut centers: Vec<[f64; 3]> = Vec::with_capacity(k);
        for _ in 0..10_000 {
            if centers.len() == k {
                break;
            }
            let c = [
                side * rng.gen::<f64>(),
                side * rng.gen::<f64>(),
                side * rng.gen::<f64>(),
            ];
            let clear = centers.iter().all(|o| {
                let d2: f64 = o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                d2 >= separation * separation
            });
            if clear {
                centers.push(c);
            }
        }
        if centers.len() == k {
            return centers;
        }
        side *= 1.5;
    }
}

/// Orthonormal pair spanning a uniformly random plane through the origin.
fn random_plane(rng: &mut ChaCha8Rng) -> ([f64; 3], [f64; 3]) {
    let gauss = |rng: &mut ChaCha8Rng| -> [f64; 3] {
        [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ]
    };
    let norm = |v: [f64; 3]| {
        let l = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        [v[0] / l, v[1] / l, v[2] / l]
    };
    loop {
        let u = norm(gauss(rng));
        let w = gauss(rng);
        let p: f64 = u.iter().zip(&w).map(|(a, b)| a * b).sum();
        let v = [w[0] - p * u[0], w[1] - p * u[1], w[2] - p * u[2]];
        let l = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if l > 1e-6 {
            return (u, norm(v));
        }
    }
}

/// Isotropic Gaussian blobs with centers drawn from `N(0, 10^2)`.
pub fn generate_clusters(
    n_clusters: usize,
    per_cluster: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_clusters == 0 || per_cluster == 0 || dim == 0 || n_clusters * per_cluster < 2 {
        return Err(EmbedError::Config(format!(
            "invalid cluster sizes: {n_clusters} clusters x {per_cluster} points in {dim}-D"
        )));
    }
    let noise = Normal::new(0.0, spread)
        .map_err(|e| EmbedError::Config(format!("cluster spread {spread}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..n_clusters)
        .map(|_| {
            (0..dim)
                .map(|_| 10.0 * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let n = n_clusters * per_cluster;
    let mut points = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for j in 0..per_cluster {
            let row = c * per_cluster + j;
            for a in 0..dim {
                points[[row, a]] = center[a] + noise.sample(&mut rng);
            }
            labels.push(c as i64);
        }
    }
    Dataset::new(points, Some(labels))
}
