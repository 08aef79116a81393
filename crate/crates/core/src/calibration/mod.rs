//! Weighted least-squares calibration of a model to an option surface.

pub mod optimizer;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{compute_weights, mid_prices, OptionSurface, WeightVector};
use crate::models::{ModelKind, ModelParams, ParamBounds, DEFAULT_EPSILON};
use crate::pricing::{price_surface, McConfig};

/// `G(theta) = sum_j w_j (C_j(theta) - mid_j)^2` for one surface and model.
#[derive(Debug, Clone)]
pub struct Objective {
    surface: OptionSurface,
    weights: WeightVector,
    mids: Vec<f64>,
    model: ModelKind,
    epsilon: f64,
    mc: Option<McConfig>,
}

impl Objective {
    /// Objective with the inverse-squared-spread weights of the surface.
    pub fn new(surface: OptionSurface, model: ModelKind) -> Result<Self> {
        let weights = compute_weights(&surface)?;
        Self::with_weights(surface, weights, model)
    }

    pub fn with_weights(
        surface: OptionSurface,
        weights: WeightVector,
        model: ModelKind,
    ) -> Result<Self> {
        if weights.len() != surface.len() {
            return Err(Error::Validation(format!(
                "{} weights for {} quotes",
                weights.len(),
                surface.len()
            )));
        }
        if let Some(j) = weights.0.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Validation(format!(
                "weight {j} is not a positive number"
            )));
        }
        let mids = mid_prices(&surface);
        Ok(Objective {
            surface,
            weights,
            mids,
            model,
            epsilon: DEFAULT_EPSILON,
            mc: None,
        })
    }

    /// Smoothing factor used for FSV parameter points built by the optimizer.
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Validation(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    /// Simulation settings for FSV; the seed stays fixed for every evaluation.
    pub fn with_mc(mut self, mc: McConfig) -> Result<Self> {
        mc.validate()?;
        self.mc = Some(mc);
        Ok(self)
    }

    pub fn surface(&self) -> &OptionSurface {
        &self.surface
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn mids(&self) -> &[f64] {
        &self.mids
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mc(&self) -> Option<&McConfig> {
        self.mc.as_ref()
    }

    /// `sum_j w_j mid_j^2`, the natural scale of `G`.
    pub fn scale(&self) -> f64 {
        self.weights
            .0
            .iter()
            .zip(&self.mids)
            .map(|(w, m)| w * m * m)
            .sum()
    }

    pub fn model_prices(&self, theta: &ModelParams) -> Result<Vec<f64>> {
        if theta.kind() != self.model {
            return Err(Error::Validation(format!(
                "objective is for {}, got {} parameters",
                self.model,
                theta.kind()
            )));
        }
        price_surface(&self.surface, theta, self.mc.as_ref())
    }

    /// `G` for precomputed model prices.
    pub fn value_of_prices(&self, prices: &[f64]) -> f64 {
        self.weights
            .0
            .iter()
            .zip(prices.iter().zip(&self.mids))
            .map(|(w, (c, m))| w * (c - m) * (c - m))
            .sum()
    }

    pub fn evaluate(&self, theta: &ModelParams) -> Result<f64> {
        let prices = self.model_prices(theta)?;
        Ok(self.value_of_prices(&prices))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CalibrationResult {
    pub theta_hat: ModelParams,
    /// `G(theta_hat)`.
    pub objective_value: f64,
    pub model_prices: Vec<f64>,
    pub aare: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub seed: u64,
}

/// Mean absolute relative error `(1/N) sum |C_j - C*_j| / C*_j`.
pub fn compute_aare(model_prices: &[f64], market_prices: &[f64]) -> Result<f64> {
    if model_prices.len() != market_prices.len() {
        return Err(Error::Validation(format!(
            "{} model prices for {} market prices",
            model_prices.len(),
            market_prices.len()
        )));
    }
    if model_prices.is_empty() {
        return Err(Error::UndefinedMeasure(
            "AARE of an empty price list".into(),
        ));
    }
    let mut sum = 0.0;
    for (j, (c, m)) in model_prices.iter().zip(market_prices).enumerate() {
        if !(*m > 0.0) {
            return Err(Error::UndefinedMeasure(format!(
                "market price of option {j} is {m}, relative error undefined"
            )));
        }
        sum += (c - m).abs() / m;
    }
    Ok(sum / model_prices.len() as f64)
}

/// Minimum budget accepted by [`calibrate`] for a model of dimension `dim`.
pub fn min_budget(dim: usize) -> usize {
    100 * dim
}

/// Minimises the objective over the bounds box with a seeded global search
/// followed by simplex refinement in bound-scaled coordinates.
pub fn calibrate(
    obj: &Objective,
    bounds: &ParamBounds,
    budget: usize,
    seed: u64,
) -> Result<CalibrationResult> {
    let kind = obj.model;
    let dim = kind.dim();
    if budget < min_budget(dim) {
        return Err(Error::Validation(format!(
            "budget {budget} is below {} evaluations for {kind}",
            min_budget(dim)
        )));
    }
    let (lo, hi) = bounds.corners(kind);
    let unscale = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(lo.iter().zip(&hi))
            .map(|(&u, (&l, &h))| (l + u * (h - l)).clamp(l, h))
            .collect()
    };
    let f = |x: &[f64]| -> f64 {
        let theta = match ModelParams::from_vec(kind, &unscale(x), obj.epsilon) {
            Ok(t) => t,
            Err(_) => return f64::INFINITY,
        };
        match obj.evaluate(&theta) {
            Ok(v) => v,
            Err(e) => {
                tracing::debug!(?theta, error = %e, "objective evaluation failed");
                f64::INFINITY
            }
        }
    };
    let m = optimizer::minimize(&f, dim, budget, seed);
    if !m.value.is_finite() {
        return Err(Error::Calibration(format!(
            "all {} objective evaluations failed",
            m.evaluations
        )));
    }
    let theta_hat = ModelParams::from_vec(kind, &unscale(&m.x), obj.epsilon)?;
    let model_prices = obj.model_prices(&theta_hat)?;
    let objective_value = obj.value_of_prices(&model_prices);
    let aare = compute_aare(&model_prices, &obj.mids)?;
    Ok(CalibrationResult {
        theta_hat,
        objective_value,
        model_prices,
        aare,
        evaluations: m.evaluations,
        converged: m.converged,
        seed,
    })
}
