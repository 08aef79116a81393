//! Synthetic option surfaces priced from known parameters.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{OptionQuote, OptionSurface};
use crate::models::{ModelParams, ParamBounds};
use crate::pricing::{price_surface, McConfig};

pub const DEFAULT_HALF_SPREAD: f64 = 0.01;
pub const DEFAULT_FLOOR: f64 = 0.05;

fn default_half_spread() -> f64 {
    DEFAULT_HALF_SPREAD
}

fn default_floor() -> f64 {
    DEFAULT_FLOOR
}

/// Simulation settings used to price FSV mids when the spec gives none.
pub fn default_fsv_mc() -> McConfig {
    McConfig {
        paths: 200_000,
        ..McConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    /// True parameters; the `model` tag selects the pricer.
    pub params: ModelParams,
    pub spot: f64,
    pub rate: f64,
    /// Strikes as multiples of spot.
    pub strikes: Vec<f64>,
    /// Maturities in years.
    pub maturities: Vec<f64>,
    /// Half-spread as a fraction of mid.
    #[serde(default = "default_half_spread")]
    pub half_spread: f64,
    /// Minimum half-spread in currency units; mids below it are dropped.
    #[serde(default = "default_floor")]
    pub floor: f64,
    /// Standard deviation of the multiplicative lognormal noise on mids.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    /// FSV only; defaults to [`default_fsv_mc`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valuation_date: Option<NaiveDate>,
}

impl SynthSpec {
    /// Spec with default spread rule, no noise and seed 0.
    pub fn new(
        params: ModelParams,
        spot: f64,
        rate: f64,
        strikes: Vec<f64>,
        maturities: Vec<f64>,
    ) -> Self {
        SynthSpec {
            params,
            spot,
            rate,
            strikes,
            maturities,
            half_spread: DEFAULT_HALF_SPREAD,
            floor: DEFAULT_FLOOR,
            noise: 0.0,
            seed: 0,
            mc: None,
            valuation_date: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if self.strikes.is_empty() || self.maturities.is_empty() {
            return fail("strike and maturity grids must be non-empty".into());
        }
        if let Some(k) = self.strikes.iter().find(|k| !(**k > 0.0) || !k.is_finite()) {
            return fail(format!("relative strike must be positive, got {k}"));
        }
        if let Some(t) = self
            .maturities
            .iter()
            .find(|t| !(**t > 0.0) || !t.is_finite())
        {
            return fail(format!("maturity must be positive, got {t}"));
        }
        if !(self.spot > 0.0) || !self.spot.is_finite() {
            return fail(format!("spot must be positive, got {}", self.spot));
        }
        if !self.rate.is_finite() {
            return fail("rate must be finite".into());
        }
        if !(0.0..1.0).contains(&self.half_spread) {
            return fail(format!(
                "half_spread must lie in [0, 1), got {}",
                self.half_spread
            ));
        }
        if !(self.floor > 0.0) || !self.floor.is_finite() {
            return fail(format!("floor must be positive, got {}", self.floor));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return fail(format!("noise must be non-negative, got {}", self.noise));
        }
        let violations = self.params.validate(&ParamBounds::default());
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return fail(format!("invalid parameters: {}", list.join("; ")));
        }
        if let Some(mc) = &self.mc {
            mc.validate()?;
        }
        Ok(())
    }

    pub fn mc_or_default(&self) -> McConfig {
        self.mc.unwrap_or_else(default_fsv_mc)
    }
}

/// Quote surface on the grid `maturities x strikes`, mids priced under the
/// true parameters and optionally perturbed, bid/ask at
/// `mid -/+ max(half_spread * mid, floor)`. Options whose mid falls below the
/// floor are dropped with a warning.
pub fn generate_surface(spec: &SynthSpec) -> Result<OptionSurface> {
    spec.validate()?;
    let mut grid = Vec::with_capacity(spec.strikes.len() * spec.maturities.len());
    for &t in &spec.maturities {
        for &k in &spec.strikes {
            // placeholder spread, replaced once the mid is known
            grid.push(OptionQuote::new(k * spec.spot, t, 0.0, 1.0));
        }
    }
    let grid = OptionSurface::new(spec.spot, spec.rate, grid)?;
    let mc = spec.mc_or_default();
    let prices = price_surface(&grid, &spec.params, Some(&mc))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut quotes = Vec::with_capacity(prices.len());
    for (q, price) in grid.quotes().iter().zip(prices) {
        let z: f64 = StandardNormal.sample(&mut rng);
        let mid = if spec.noise > 0.0 {
            price * (spec.noise * z).exp()
        } else {
            price
        };
        if !(mid >= spec.floor) {
            tracing::warn!(
                strike = q.strike,
                maturity = q.maturity,
                mid,
                floor = spec.floor,
                "model price below spread floor, option dropped"
            );
            continue;
        }
        let half = (spec.half_spread * mid).max(spec.floor);
        quotes.push(OptionQuote::new(
            q.strike,
            q.maturity,
            mid - half,
            mid + half,
        ));
    }
    if quotes.is_empty() {
        return Err(Error::Validation(
            "every synthetic option priced below the spread floor".into(),
        ));
    }
    let mut surface =
        OptionSurface::new(spec.spot, spec.rate, quotes)?.with_valuation_date(spec.valuation_date);
    surface.sort();
    Ok(surface)
}
