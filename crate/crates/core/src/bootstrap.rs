//! Bootstrap of the option structure: resample quotes with replacement,
//! recalibrate per resample, keep full-surface prices for every replication.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate, compute_aare, min_budget, CalibrationResult, Objective};
use crate::error::{Error, Result};
use crate::market_data::{mid_prices, OptionSurface};
use crate::models::{ModelKind, ModelParams, ParamBounds, DEFAULT_EPSILON};
use crate::pricing::{price_surface, McConfig};

pub const DEFAULT_TRIALS: usize = 200;
/// Largest tolerated share of failed trials.
pub const MAX_FAILURE_SHARE: f64 = 0.1;

/// Indices of one resample, drawn uniformly with replacement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(transparent)]
pub struct BootstrapSample {
    pub indices: Vec<usize>,
}

impl BootstrapSample {
    /// The resampled surface, duplicates included, in draw order.
    pub fn surface(&self, surface: &OptionSurface) -> Result<OptionSurface> {
        surface.select(&self.indices)
    }
}

pub fn draw_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> BootstrapSample {
    BootstrapSample {
        indices: (0..n).map(|_| rng.random_range(0..n)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    pub model: ModelKind,
    pub trials: usize,
    pub budget: usize,
    pub master_seed: u64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    pub bounds: ParamBounds,
}

impl BootstrapConfig {
    pub fn new(model: ModelKind, trials: usize, budget: usize, master_seed: u64) -> Self {
        BootstrapConfig {
            model,
            trials,
            budget,
            master_seed,
            epsilon: DEFAULT_EPSILON,
            mc: None,
            bounds: ParamBounds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(Error::Validation(format!(
                "bootstrap needs at least 2 trials, got {}",
                self.trials
            )));
        }
        let need = min_budget(self.model.dim());
        if self.budget < need {
            return Err(Error::Validation(format!(
                "budget {} is below {need} evaluations for {}",
                self.budget, self.model
            )));
        }
        if let Some(mc) = &self.mc {
            mc.validate()?;
        }
        Ok(())
    }

    fn objective(&self, surface: OptionSurface) -> Result<Objective> {
        let mut obj = Objective::new(surface, self.model)?.with_epsilon(self.epsilon)?;
        if let Some(mc) = self.mc {
            obj = obj.with_mc(mc)?;
        }
        Ok(obj)
    }

    /// Random stream of trial `i`; stream 0 belongs to the reference fit.
    fn stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(stream);
        rng
    }
}

/// One bootstrap replication. `calibration` is the fit to the resample;
/// `full_prices` and `full_aare` evaluate that fit on the original surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Trial {
    pub index: usize,
    pub seed: u64,
    pub sample: BootstrapSample,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_prices: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_aare: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trial {
    pub fn succeeded(&self) -> bool {
        self.calibration.is_some() && self.full_aare.is_some()
    }

    pub fn theta(&self) -> Option<&ModelParams> {
        self.calibration.as_ref().map(|c| &c.theta_hat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BootstrapRun {
    pub config: BootstrapConfig,
    pub surface: OptionSurface,
    /// Calibration to the full surface.
    pub reference: CalibrationResult,
    pub trials: Vec<Trial>,
    pub theta_bar: ModelParams,
}

impl BootstrapRun {
    pub fn successful(&self) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(|t| t.succeeded())
    }

    pub fn failures(&self) -> usize {
        self.trials.len() - self.successful().count()
    }
}

/// Calibrates trial `i` alone; depends only on `(surface, config, i)`.
pub fn run_trial(surface: &OptionSurface, config: &BootstrapConfig, index: usize) -> Trial {
    let mut rng = config.stream(index as u64 + 1);
    let sample = draw_sample(surface.len(), &mut rng);
    let seed = rng.random::<u64>();
    let mut trial = Trial {
        index,
        seed,
        sample,
        calibration: None,
        full_prices: None,
        full_aare: None,
        error: None,
    };
    let fit = || -> Result<(CalibrationResult, Vec<f64>, f64)> {
        let obj = config.objective(trial.sample.surface(surface)?)?;
        let cal = calibrate(&obj, &config.bounds, config.budget, seed)?;
        let prices = price_surface(surface, &cal.theta_hat, config.mc.as_ref())?;
        let aare = compute_aare(&prices, &mid_prices(surface))?;
        Ok((cal, prices, aare))
    };
    match fit() {
        Ok((cal, prices, aare)) => {
            trial.calibration = Some(cal);
            trial.full_prices = Some(prices);
            trial.full_aare = Some(aare);
        }
        Err(e) => {
            tracing::warn!(trial = index, error = %e, "bootstrap trial failed");
            trial.error = Some(e.to_string());
        }
    }
    trial
}

/// Reference calibration to the full surface, seeded from stream 0.
pub fn reference_fit(
    surface: &OptionSurface,
    config: &BootstrapConfig,
) -> Result<CalibrationResult> {
    let seed = config.stream(0).random::<u64>();
    calibrate(
        &config.objective(surface.clone())?,
        &config.bounds,
        config.budget,
        seed,
    )
}

/// Runs all trials on `workers` threads (rayon's global pool when `None`).
/// The result does not depend on the worker count.
pub fn run_bootstrap(
    surface: &OptionSurface,
    config: &BootstrapConfig,
    workers: Option<usize>,
) -> Result<BootstrapRun> {
    config.validate()?;
    let work = || -> Result<(CalibrationResult, Vec<Trial>)> {
        let reference = reference_fit(surface, config)?;
        let trials: Vec<Trial> = (0..config.trials)
            .into_par_iter()
            .map(|i| {
                let t = run_trial(surface, config, i);
                tracing::debug!(trial = i, aare = ?t.full_aare, "trial done");
                t
            })
            .collect();
        Ok((reference, trials))
    };
    let (reference, trials) = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Bootstrap(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let failed = trials.iter().filter(|t| !t.succeeded()).count();
    if failed as f64 > MAX_FAILURE_SHARE * config.trials as f64 {
        return Err(Error::Bootstrap(format!(
            "{failed} of {} trials failed",
            config.trials
        )));
    }
    let theta_bar = mean_of(
        config.model,
        config.epsilon,
        trials.iter().filter_map(Trial::theta),
    )?;
    Ok(BootstrapRun {
        config: config.clone(),
        surface: surface.clone(),
        reference,
        trials,
        theta_bar,
    })
}

/// Componentwise mean of the successful replications.
pub fn bootstrap_mean(run: &BootstrapRun) -> Result<ModelParams> {
    mean_of(
        run.config.model,
        run.config.epsilon,
        run.successful().filter_map(Trial::theta),
    )
}

fn mean_of<'a>(
    kind: ModelKind,
    epsilon: f64,
    thetas: impl Iterator<Item = &'a ModelParams>,
) -> Result<ModelParams> {
    let mut sum = vec![0.0; kind.dim()];
    let mut n = 0usize;
    for t in thetas {
        for (s, v) in sum.iter_mut().zip(t.to_vec()) {
            *s += v;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Bootstrap("no successful trials".into()));
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    ModelParams::from_vec(kind, &mean, epsilon)
}
