//! Calibration robustness workbench for the Heston, Bates and approximative
//! fractional stochastic volatility (FSV) models.
//!
//! Pricing kernels and parameter types are generic over the scalar type
//! ([`num::Scalar`], implemented for `f32` and `f64`); the calibration,
//! bootstrap and reporting pipeline works in `f64`. Aliases for both
//! precisions are exported at the crate root.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod bootstrap;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod market_data;
pub mod mc_filter;
pub mod models;
pub mod num;
pub mod pricing;
pub mod robustness;
pub mod stats;
pub mod synthetic;

pub use error::{Error, NumericalError, Result};
pub use models::{ModelKind, ParamBounds, ParamName};

pub type HestonParams = models::HestonParams<f64>;
pub type BatesParams = models::BatesParams<f64>;
pub type FsvParams = models::FsvParams<f64>;
pub type ModelParams = models::ModelParams<f64>;
pub type PricingRequest = pricing::PricingRequest<f64>;

pub type HestonParams32 = models::HestonParams<f32>;
pub type BatesParams32 = models::BatesParams<f32>;
pub type FsvParams32 = models::FsvParams<f32>;
pub type ModelParams32 = models::ModelParams<f32>;
pub type PricingRequest32 = pricing::PricingRequest<f32>;
