//! Spectral-direction minimization and the pressured-point refinement loop.
//!
//! The spectral direction preconditions the gradient with the attraction
//! Hessian `4 L+ + eps I`, which is constant over a run, so it is factored
//! once. During refinement the extra coordinate of the pressured points uses
//! the principal submatrix of the same operator shifted by `2 mu`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augmented::{
    augmented_objective, augmented_value_and_gradient, update_pressured_set, MuSchedule,
};
use crate::error::{EmbedError, Result};
use crate::linalg::{graph_laplacian, Cholesky};
use crate::objectives::{evaluate, objective, Evaluation, Method, MethodTag};
use crate::pressure::{pressure, pressure_from_evaluation, pressure_penalized, NewtonConfig};
use crate::types::{AffinityGraph, AugmentedState, Embedding, OptimRun, TraceRecord};

/// Hard cap on the number of penalty values visited by [`pp_optimize`].
pub const MAX_MU_STEPS: usize = 50;
const MIN_STEP: f64 = 1e-12;
const INIT_SCALE: f64 = 1e-2;
const PROGRESS_EVERY: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    /// Iteration cap (per penalty value during refinement).
    pub max_iter: usize,
    /// Stop once an iteration lowers the objective by less than this.
    pub conv_tol: f64,
    /// Diagonal shift of the attraction Hessian; `None` picks
    /// `1e-10 * trace(4 L+) / N`.
    pub epsilon: Option<f64>,
    pub ls_backtrack: f64,
    pub ls_armijo: f64,
    pub seed: u64,
    /// Record the pressured fraction of every iterate.
    pub track_pressure: bool,
    /// Progress lines on stderr every 25 iterations.
    pub verbose: bool,
    pub newton: NewtonConfig,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            conv_tol: 1e-5,
            epsilon: None,
            ls_backtrack: 0.8,
            ls_armijo: 1e-4,
            seed: 0,
            track_pressure: true,
            verbose: false,
            newton: NewtonConfig::default(),
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.conv_tol > 0.0) {
            return Err(EmbedError::Config(format!(
                "conv_tol must be > 0, got {}",
                self.conv_tol
            )));
        }
        if !(self.ls_backtrack > 0.0 && self.ls_backtrack < 1.0) {
            return Err(EmbedError::Config(format!(
                "ls_backtrack must lie in (0, 1), got {}",
                self.ls_backtrack
            )));
        }
        if !(self.ls_armijo > 0.0 && self.ls_armijo < 1.0) {
            return Err(EmbedError::Config(format!(
                "ls_armijo must lie in (0, 1), got {}",
                self.ls_armijo
            )));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) {
                return Err(EmbedError::Config(format!(
                    "epsilon must be > 0, got {eps}"
                )));
            }
        }
        Ok(())
    }
}

/// Default Hessian shift: `1e-10 * trace(4 L+) / N`.
pub fn default_epsilon(laplacian: &Array2<f64>) -> f64 {
    let n = laplacian.nrows() as f64;
    let eps = 1e-10 * 4.0 * laplacian.diag().sum() / n;
    if eps > 0.0 {
        eps
    } else {
        1e-10
    }
}

/// Solves `(4 L+ + eps I) dir_x = grad_x` and, on the pressured rows,
/// `(4 L+_PP + (eps + 2 mu) I) dir_z = grad_z`.
///
/// Standalone form that factors on every call; [`SpectralDirection`] caches
/// the factorizations across iterations.
pub fn spectral_direction(
    l_plus: &Array2<f64>,
    eps: f64,
    grad_x: &Array2<f64>,
    grad_z: &[f64],
    mu: f64,
    pressured: &[bool],
) -> Result<(Array2<f64>, Vec<f64>)> {
    let mut sd = SpectralDirection::from_laplacian(l_plus.clone(), eps);
    let idx: Vec<usize> = (0..pressured.len()).filter(|&i| pressured[i]).collect();
    let dir_x = sd.direction_x(grad_x);
    let dir_z = sd.direction_z(grad_z, mu, &idx);
    match sd.warnings.first() {
        Some(w) => Err(EmbedError::Evaluation(w.clone())),
        None => Ok((dir_x, dir_z)),
    }
}

pub struct SpectralDirection {
    laplacian: Array2<f64>,
    eps: f64,
    x_factor: Option<Cholesky>,
    z_block: Option<(Vec<usize>, f64, Option<Cholesky>)>,
    pub warnings: Vec<String>,
}

impl SpectralDirection {
    pub fn new(g: &AffinityGraph, eps: Option<f64>) -> Self {
        let l = graph_laplacian(g);
        let eps = eps.unwrap_or_else(|| default_epsilon(&l));
        Self::from_laplacian(l, eps)
    }

    pub fn from_laplacian(laplacian: Array2<f64>, eps: f64) -> Self {
        let n = laplacian.nrows();
        let mut a = laplacian.mapv(|v| 4.0 * v);
        for i in 0..n {
            a[[i, i]] += eps;
        }
        let mut warnings = Vec::new();
        let x_factor = match Cholesky::factor(&a) {
            Ok(c) => Some(c),
            Err(e) => {
                warnings.push(format!(
                    "spectral direction unavailable ({e}); using the gradient"
                ));
                None
            }
        };
        Self {
            laplacian,
            eps,
            x_factor,
            z_block: None,
            warnings,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    pub fn direction_x(&self, grad_x: &Array2<f64>) -> Array2<f64> {
        match &self.x_factor {
            Some(c) => c.solve_columns(grad_x),
            None => grad_x.clone(),
        }
    }

    /// Direction for the extra coordinate; zero outside `pressured`.
    pub fn direction_z(&mut self, grad_z: &[f64], mu: f64, pressured: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; grad_z.len()];
        if pressured.is_empty() {
            return out;
        }
        let stale = match &self.z_block {
            Some((idx, m, _)) => idx.as_slice() != pressured || *m != mu,
            None => true,
        };
        if stale {
            let k = pressured.len();
            let shift = self.eps + 2.0 * mu;
            let block = Array2::from_shape_fn((k, k), |(a, b)| {
                let v = 4.0 * self.laplacian[[pressured[a], pressured[b]]];
                if a == b {
                    v + shift
                } else {
                    v
                }
            });
            let factor = match Cholesky::factor(&block) {
                Ok(c) => Some(c),
                Err(e) => {
                    self.warnings.push(format!(
                        "extra-dimension block not factorable ({e}); using the gradient"
                    ));
                    None
                }
            };
            self.z_block = Some((pressured.to_vec(), mu, factor));
        }
        let mut rhs: Vec<f64> = pressured.iter().map(|&i| grad_z[i]).collect();
        if let Some((_, _, Some(c))) = &self.z_block {
            c.solve_in_place(&mut rhs);
        }
        for (&i, v) in pressured.iter().zip(rhs) {
            out[i] = v;
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Armijo backtracking from a unit step along `-dir`.
///
/// Returns the accepted step and the new objective value, or `None` when the
/// step falls below `MIN_STEP`.
fn backtrack(
    f0: f64,
    slope: f64,
    cfg: &OptimConfig,
    mut eval_at: impl FnMut(f64) -> Result<f64>,
) -> Result<Option<(f64, f64)>> {
    let mut alpha = 1.0;
    while alpha >= MIN_STEP {
        // a trial that overflows is treated as a rejected step
        match eval_at(alpha) {
            Ok(f) if f <= f0 - cfg.ls_armijo * alpha * slope => return Ok(Some((alpha, f))),
            Ok(_) | Err(EmbedError::Evaluation(_)) => {}
            Err(e) => return Err(e),
        }
        alpha *= cfg.ls_backtrack;
    }
    Ok(None)
}

fn tracked_fraction(
    m: &Method,
    g: &AffinityGraph,
    x: &Embedding,
    eval: &Evaluation,
    cfg: &OptimConfig,
) -> Result<f64> {
    if !cfg.track_pressure {
        return Ok(0.0);
    }
    Ok(match m.tag {
        MethodTag::Ee | MethodTag::Sne => pressure_from_evaluation(m, g, eval, 0.0)?.fraction,
        _ => pressure(m, g, x, &cfg.newton)?.fraction,
    })
}

/// Spectral-direction descent with Armijo backtracking.
pub fn minimize(
    m: &Method,
    g: &AffinityGraph,
    x0: &Embedding,
    cfg: &OptimConfig,
) -> Result<OptimRun> {
    cfg.validate()?;
    x0.check_matches(g)?;
    let sd = SpectralDirection::new(g, cfg.epsilon);
    let mut warnings = sd.warnings.clone();

    let mut x = x0.coords().clone();
    let mut eval = evaluate(m, g, x.view(), true)?;
    let mut f = eval.value.total;
    let mut trace = Vec::new();
    let mut converged = false;

    for iter in 0..cfg.max_iter {
        let grad = eval.gradient.take().expect("gradient requested");
        let mut dir = sd.direction_x(&grad);
        let mut slope = dot(dir.as_slice().unwrap(), grad.as_slice().unwrap());
        if !(slope > 0.0) {
            dir = grad.clone();
            slope = dot(grad.as_slice().unwrap(), grad.as_slice().unwrap());
        }
        if slope == 0.0 {
            converged = true;
            break;
        }
        let step = backtrack(f, slope, cfg, |alpha| {
            let trial = &x - &(&dir * alpha);
            Ok(evaluate(m, g, trial.view(), false)?.value.total)
        })?;
        let Some((alpha, f_new)) = step else {
            warnings.push(format!("line search failed at iteration {iter}"));
            break;
        };
        x.scaled_add(-alpha, &dir);
        eval = evaluate(m, g, x.view(), true)?;
        let embedding = Embedding::new(x.clone())?;
        let fraction = tracked_fraction(m, g, &embedding, &eval, cfg)?;
        let record = TraceRecord {
            iter,
            objective: f_new,
            start_objective: f,
            base_objective: f_new,
            step: alpha,
            pressured_fraction: fraction,
            mu: 0.0,
        };
        if cfg.verbose && iter % PROGRESS_EVERY == 0 {
            eprintln!(
                "iter {iter:>5}  E = {f_new:.8e}  step = {alpha:.3e}  pressured = {fraction:.4}"
            );
        }
        trace.push(record);
        let decrease = f - f_new;
        f = f_new;
        if decrease < cfg.conv_tol {
            converged = true;
            break;
        }
    }

    Ok(OptimRun {
        trace,
        final_embedding: Embedding::new(x)?,
        final_objective: f,
        converged,
        mu_steps: 0,
        warnings,
    })
}

/// Pressured-point refinement.
///
/// Starting from the pressure of `x0`, minimizes the extra-dimension
/// objective for `mu = 0, step, 2 step, ...`, refreshing the pressured set
/// after every step, until a penalty value converges with an empty set.
/// The result is the lowest-objective embedding among `x0` and the
/// converged empty-set endpoints, so it never ends above `x0`.
pub fn pp_optimize(
    m: &Method,
    g: &AffinityGraph,
    x0: &Embedding,
    sched: &MuSchedule,
    cfg: &OptimConfig,
) -> Result<OptimRun> {
    cfg.validate()?;
    x0.check_matches(g)?;
    if !matches!(m.tag, MethodTag::Ee | MethodTag::Sne) {
        return Err(EmbedError::Unsupported(format!(
            "pressured-point refinement for {}",
            m.tag
        )));
    }
    let n = x0.n() as f64;
    let mut sd = SpectralDirection::new(g, cfg.epsilon);
    let mut warnings = sd.warnings.clone();

    let mut best_x = x0.clone();
    let mut best_f = objective(m, g, x0)?.total;
    let mut state = update_pressured_set(m, g, &AugmentedState::flat(x0.clone(), 0.0))?;
    let mut trace = Vec::new();
    let mut iter = 0;
    let mut finished = false;
    let mut mu_steps = 0;
    let mut aborted = false;

    for t in 0..MAX_MU_STEPS {
        mu_steps = t + 1;
        state.mu = sched.value(t);
        if t > 0 {
            state = update_pressured_set(m, g, &state)?;
        }
        let mut stage_iters = 0;
        loop {
            let (f0, gx, gz) = augmented_value_and_gradient(m, g, &state)?;
            let idx = state.pressured_indices();
            let mut dx = sd.direction_x(&gx);
            let mut dz = sd.direction_z(&gz, state.mu, &idx);
            let mut slope = dot(dx.as_slice().unwrap(), gx.as_slice().unwrap()) + dot(&dz, &gz);
            if !(slope > 0.0) {
                dx = gx.clone();
                dz = gz.clone();
                slope = dot(gx.as_slice().unwrap(), gx.as_slice().unwrap()) + dot(&gz, &gz);
            }
            if slope == 0.0 {
                break;
            }
            let trial_state = |alpha: f64| -> Result<AugmentedState> {
                let coords = state.embedding.coords() - &(&dx * alpha);
                let z = state
                    .z
                    .iter()
                    .zip(&dz)
                    .map(|(z, d)| z - alpha * d)
                    .collect();
                Ok(AugmentedState {
                    embedding: Embedding::new(coords)
                        .map_err(|e| EmbedError::Evaluation(e.to_string()))?,
                    z,
                    pressured: state.pressured.clone(),
                    mu: state.mu,
                })
            };
            let step = backtrack(f0, slope, cfg, |alpha| {
                augmented_objective(m, g, &trial_state(alpha)?)
            })?;
            let Some((alpha, f1)) = step else {
                warnings.push(format!(
                    "line search failed at iteration {iter} (mu = {})",
                    state.mu
                ));
                aborted = true;
                break;
            };
            let moved = trial_state(alpha)?;
            state = update_pressured_set(m, g, &moved)?;
            let membership_changed = state.pressured != moved.pressured;
            let base = objective(m, g, &state.embedding)?.total;
            let fraction = state.pressured_count() as f64 / n;
            if cfg.verbose && iter % PROGRESS_EVERY == 0 {
                eprintln!(
                    "iter {iter:>5}  mu = {:.4e}  E~ = {f1:.8e}  E = {base:.8e}  pressured = {fraction:.4}",
                    state.mu
                );
            }
            trace.push(TraceRecord {
                iter,
                objective: f1,
                start_objective: f0,
                base_objective: base,
                step: alpha,
                pressured_fraction: fraction,
                mu: state.mu,
            });
            iter += 1;
            stage_iters += 1;
            if f0 - f1 < cfg.conv_tol && !membership_changed {
                break;
            }
            if stage_iters >= cfg.max_iter {
                warnings.push(format!("mu = {} hit the iteration cap", state.mu));
                break;
            }
        }
        if aborted {
            break;
        }
        if state.pressured_count() == 0 {
            let f = objective(m, g, &state.embedding)?.total;
            if f < best_f {
                best_f = f;
                best_x = state.embedding.clone();
            }
            finished = true;
            break;
        }
    }
    if !finished && !aborted {
        warnings.push(format!(
            "pressured set still non-empty after {MAX_MU_STEPS} penalty values"
        ));
    }

    // closing record for the returned embedding when it is not the last iterate
    if trace
        .last()
        .map_or(true, |r: &TraceRecord| r.objective != best_f)
    {
        trace.push(TraceRecord {
            iter,
            objective: best_f,
            start_objective: best_f,
            base_objective: best_f,
            step: 0.0,
            pressured_fraction: pressure_penalized(m, g, &best_x, 0.0)?.fraction,
            mu: state.mu,
        });
    }

    Ok(OptimRun {
        trace,
        final_embedding: best_x,
        final_objective: best_f,
        converged: finished,
        mu_steps,
        warnings,
    })
}

/// `N x dim` coordinates drawn uniformly from `[0, 1e-2)`.
pub fn random_embedding(n: usize, dim: usize, seed: u64) -> Embedding {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = Array2::from_shape_fn((n, dim), |_| INIT_SCALE * rng.gen::<f64>());
    Embedding::new(coords).expect("finite by construction")
}

#[derive(Debug, Clone)]
pub struct RestartPair {
    pub seed: u64,
    pub sd: OptimRun,
    pub pp: OptimRun,
}

impl RestartPair {
    /// SD final minus PP final; positive when refinement helped.
    pub fn improvement(&self) -> f64 {
        self.sd.final_objective - self.pp.final_objective
    }
}

/// For each restart: random initialization, spectral-direction run, then
/// refinement continued from its result. Restart `r` uses seed `cfg.seed + r`;
/// results come back in seed order whatever the thread count.
pub fn restart_benchmark(
    m: &Method,
    g: &AffinityGraph,
    n_restarts: usize,
    dim: usize,
    sched: &MuSchedule,
    cfg: &OptimConfig,
    threads: usize,
) -> Result<Vec<RestartPair>> {
    if n_restarts == 0 {
        return Err(EmbedError::Config("need at least one restart".into()));
    }
    let run = |r: usize| -> Result<RestartPair> {
        let seed = cfg.seed.wrapping_add(r as u64);
        let x0 = random_embedding(g.n(), dim, seed);
        let sd = minimize(m, g, &x0, cfg)?;
        let pp = pp_optimize(m, g, &sd.final_embedding, sched, cfg)?;
        Ok(RestartPair { seed, sd, pp })
    };
    if threads <= 1 {
        return (0..n_restarts).map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| EmbedError::Config(format!("thread pool: {e}")))?;
    pool.install(|| (0..n_restarts).into_par_iter().map(run).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample mean and (n-1)-normalized standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.17e} ± {:.17e}", self.mean, self.std)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augmented::{make_mu_schedule, MuStrategy};
    use ndarray::array;

    #[test]
    fn identity_laplacian_direction_is_gradient() {
        let l = Array2::zeros((2, 2));
        let gx = array![[1.5, -2.0], [0.5, 3.0]];
        let (dx, dz) = spectral_direction(&l, 1.0, &gx, &[0.0, 0.0], 0.0, &[false, false]).unwrap();
        assert_eq!(dx, gx);
        assert_eq!(dz, vec![0.0, 0.0]);
    }

    #[test]
    fn z_block_uses_mu_shift() {
        let l = Array2::zeros((3, 3));
        let gx = Array2::zeros((3, 1));
        let (_, dz) =
            spectral_direction(&l, 1.0, &gx, &[0.0, 6.0, 0.0], 1.0, &[false, true, false]).unwrap();
        // shift is eps + 2 mu = 3
        assert_eq!(dz.len(), 3);
        for (a, b) in dz.iter().zip([0.0, 2.0, 0.0]) {
            assert!((a - b).abs() < 1e-14, "{dz:?}");
        }
    }

    #[test]
    fn attraction_only_collapses() {
        let g =
            AffinityGraph::new(array![[0.0, 1.0], [1.0, 0.0]], Array2::zeros((2, 2)), 1.0).unwrap();
        let x0 = Embedding::new(array![[0.0, 0.0], [1.0, -2.0]]).unwrap();
        let run = minimize(&Method::ee(), &g, &x0, &OptimConfig::default()).unwrap();
        assert!(run.converged);
        assert!(run.final_objective < 1e-6);
    }

    #[test]
    fn config_validation() {
        let bad = OptimConfig {
            ls_backtrack: 1.0,
            ..OptimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimConfig {
            conv_tol: 0.0,
            ..OptimConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pp_rejects_tsne() {
        let g =
            AffinityGraph::new(array![[0.0, 1.0], [1.0, 0.0]], Array2::ones((2, 2)), 1.0).unwrap();
        let x0 = Embedding::new(array![[0.0], [1.0]]).unwrap();
        let sched = make_mu_schedule(&g, MuStrategy::MeanDegree).unwrap();
        assert!(matches!(
            pp_optimize(&Method::tsne(), &g, &x0, &sched, &OptimConfig::default()),
            Err(EmbedError::Unsupported(_))
        ));
    }

    #[test]
    fn mean_std_formatting() {
        let s = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert!(s.to_string().contains(" ± "));
        assert_eq!(MeanStd::of(&[4.0]).std, 0.0);
    }
}
