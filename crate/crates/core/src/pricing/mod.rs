//! European call pricing: characteristic-function pricing for Heston and Bates,
//! Monte-Carlo simulation for the FSV model.

pub mod black_scholes;
pub mod cf;
pub mod fsv;
pub mod quadrature;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::OptionSurface;
use crate::models::{BatesParams, HestonParams, ModelKind, ModelParams};
use crate::num::Scalar;

pub use cf::{CfPricer, CfSettings, LogReturnCf};
pub use fsv::{price_fsv, simulate_fsv_paths, FsvSample, McConfig, McPrice};

/// Contract and market inputs of a single call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PricingRequest<T = f64> {
    pub spot: T,
    pub strike: T,
    /// Year fraction.
    pub maturity: T,
    /// Continuously compounded risk-free rate.
    pub rate: T,
}

impl<T: Scalar> PricingRequest<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.spot > T::zero()) || !self.spot.is_finite() {
            return Err(Error::Validation(format!(
                "spot must be positive, got {}",
                self.spot
            )));
        }
        if !(self.maturity > T::zero()) || !self.maturity.is_finite() {
            return Err(Error::Validation(format!(
                "maturity must be positive, got {}",
                self.maturity
            )));
        }
        if !(self.strike >= T::zero()) || !self.strike.is_finite() {
            return Err(Error::Validation(format!(
                "strike must be non-negative, got {}",
                self.strike
            )));
        }
        if !self.rate.is_finite() {
            return Err(Error::Validation("rate must be finite".into()));
        }
        Ok(())
    }
}

/// Output of the `price` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PriceResult {
    pub model: ModelKind,
    pub price: f64,
    /// Monte-Carlo standard error (FSV only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor_hit_fraction: Option<f64>,
}

pub fn price_heston<T: Scalar>(req: &PricingRequest<T>, params: &HestonParams<T>) -> Result<T> {
    req.validate()?;
    Ok(CfPricer::default().call(params, req)?)
}

pub fn price_bates<T: Scalar>(req: &PricingRequest<T>, params: &BatesParams<T>) -> Result<T> {
    req.validate()?;
    Ok(CfPricer::default().call(params, req)?)
}

/// Prices all strikes of each maturity in one pass of the CF pricer.
fn cf_surface<M: LogReturnCf<f64>>(surface: &OptionSurface, model: &M) -> Result<Vec<f64>> {
    let pricer = CfPricer::default();
    let mut prices = vec![f64::NAN; surface.len()];
    for t in surface.maturities() {
        let (idx, strikes): (Vec<usize>, Vec<f64>) = surface
            .quotes()
            .iter()
            .enumerate()
            .filter(|(_, q)| q.maturity == t)
            .map(|(j, q)| (j, q.strike))
            .unzip();
        let strip = pricer.calls(model, surface.spot, surface.rate, t, &strikes)?;
        for (j, c) in idx.into_iter().zip(strip) {
            prices[j] = c;
        }
    }
    Ok(prices)
}

/// Model price of every quote on the surface, in quote order.
///
/// FSV prices reuse one simulated path set per distinct maturity across all
/// strikes of that maturity (common random numbers); `mc` defaults to
/// [`McConfig::default`].
pub fn price_surface(
    surface: &OptionSurface,
    params: &ModelParams,
    mc: Option<&McConfig>,
) -> Result<Vec<f64>> {
    match params {
        ModelParams::Heston(p) => cf_surface(surface, p),
        ModelParams::Bates(p) => cf_surface(surface, p),
        ModelParams::Fsv(p) => {
            let default_mc = McConfig::default();
            let mc = mc.unwrap_or(&default_mc);
            let mut prices = vec![f64::NAN; surface.len()];
            for t in surface.maturities() {
                let sample = simulate_fsv_paths(p, surface.spot, surface.rate, t, mc)?;
                for (j, q) in surface.quotes().iter().enumerate() {
                    if q.maturity == t {
                        prices[j] = sample.price(q.strike).price;
                    }
                }
            }
            Ok(prices)
        }
    }
}
