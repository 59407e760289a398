//! The extra-dimension objective: the base objective evaluated on `[X | Z]`
//! plus `mu * sum z_i^2`, where only pressured points may have `z_i != 0`.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{EmbedError, Result};
use crate::objectives::{evaluate, Method, MethodTag};
use crate::pressure::pressure_penalized;
use crate::types::{AffinityGraph, AugmentedState};

/// A pressured point leaves the set only once its `|z|` is below this.
pub const Z_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuStrategy {
    MeanDegree,
    MaxDegree,
    MinDegree,
}

impl std::str::FromStr for MuStrategy {
    type Err = EmbedError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" | "mean_degree" => Ok(MuStrategy::MeanDegree),
            "max" | "max_degree" => Ok(MuStrategy::MaxDegree),
            "min" | "min_degree" => Ok(MuStrategy::MinDegree),
            other => Err(EmbedError::Config(format!("unknown mu strategy {other:?}"))),
        }
    }
}

/// Penalty weights `0, step, 2 step, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuSchedule {
    pub strategy: MuStrategy,
    pub step: f64,
}

impl MuSchedule {
    pub fn value(&self, t: usize) -> f64 {
        t as f64 * self.step
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..).map(move |t| self.value(t))
    }
}

pub fn make_mu_schedule(g: &AffinityGraph, strategy: MuStrategy) -> Result<MuSchedule> {
    let d = g.d_plus();
    let step = match strategy {
        MuStrategy::MeanDegree => d.sum() / d.len() as f64,
        MuStrategy::MaxDegree => d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        MuStrategy::MinDegree => d.iter().copied().fold(f64::INFINITY, f64::min),
    };
    if !(step.is_finite() && step > 0.0) {
        return Err(EmbedError::Config(format!(
            "mu schedule step must be positive, got {step} from the attraction degrees ({strategy:?})"
        )));
    }
    Ok(MuSchedule { strategy, step })
}

fn check_supported(m: &Method) -> Result<()> {
    match m.tag {
        MethodTag::Ee | MethodTag::Sne => Ok(()),
        other => Err(EmbedError::Unsupported(format!(
            "extra-dimension optimization for {other}"
        ))),
    }
}

fn penalty(s: &AugmentedState) -> f64 {
    s.mu * s
        .z
        .iter()
        .zip(&s.pressured)
        .filter(|(_, &p)| p)
        .map(|(z, _)| z * z)
        .sum::<f64>()
}

pub fn augmented_objective(m: &Method, g: &AffinityGraph, s: &AugmentedState) -> Result<f64> {
    check_supported(m)?;
    s.validate()?;
    s.embedding.check_matches(g)?;
    let eval = evaluate(m, g, s.lifted_coords().view(), false)?;
    Ok(eval.value.total + penalty(s))
}

/// Gradient in `X` and in `Z`; `grad_z[i]` is exactly 0 outside the pressured set.
pub fn augmented_gradient(
    m: &Method,
    g: &AffinityGraph,
    s: &AugmentedState,
) -> Result<(Array2<f64>, Vec<f64>)> {
    let (_, gx, gz) = augmented_value_and_gradient(m, g, s)?;
    Ok((gx, gz))
}

pub(crate) fn augmented_value_and_gradient(
    m: &Method,
    g: &AffinityGraph,
    s: &AugmentedState,
) -> Result<(f64, Array2<f64>, Vec<f64>)> {
    check_supported(m)?;
    s.validate()?;
    s.embedding.check_matches(g)?;
    let d = s.embedding.dim();
    let eval = evaluate(m, g, s.lifted_coords().view(), true)?;
    let grad = eval.gradient.expect("gradient requested");
    let grad_x = grad.slice(s![.., ..d]).to_owned();
    let grad_z = (0..s.n())
        .map(|i| {
            if s.pressured[i] {
                grad[[i, d]] + 2.0 * s.mu * s.z[i]
            } else {
                0.0
            }
        })
        .collect();
    Ok((eval.value.total + penalty(s), grad_x, grad_z))
}

/// Refreshes the pressured set from the pressure of the current `X` under the
/// current penalty.
///
/// Newly pressured points enter with `z` at their pressure value. A member
/// leaves (and its `z` is zeroed) only when `|z| < Z_EPS` and it is no longer
/// pressured; members keep their current `z` otherwise.
pub fn update_pressured_set(
    m: &Method,
    g: &AffinityGraph,
    s: &AugmentedState,
) -> Result<AugmentedState> {
    check_supported(m)?;
    s.validate()?;
    let report = pressure_penalized(m, g, &s.embedding, s.mu)?;
    let mut next = s.clone();
    for i in 0..s.n() {
        let pressured = report.is_pressured(i);
        if s.pressured[i] {
            if s.z[i].abs() < Z_EPS && !pressured {
                next.pressured[i] = false;
                next.z[i] = 0.0;
            }
        } else if pressured {
            next.pressured[i] = true;
            next.z[i] = report.pressure[i];
        }
    }
    Ok(next)
}
