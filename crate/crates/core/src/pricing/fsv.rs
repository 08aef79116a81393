//! Monte-Carlo pricing for the approximative fractional SV model.
//!
//! Euler–Maruyama on `(ln S, v)` with full truncation of the variance:
//!
//! ```text
//! d ln S = (r - lambda * kbar - v+/2) dt + sqrt(v+) dW^S + jumps
//! dv     = [(H - 1/2) psi_t sigma sqrt(v+) + kappa (theta - v+)] dt
//!          + eps^{H-1/2} sigma sqrt(v+) dW^v
//! psi_{t_k} = sum_{i<k} (t_k - t_i + eps)^{H-3/2} dW^psi_i
//! ```
//!
//! `dW^S`, `dW^v` have correlation `rho`; `W^psi` is independent. Paths are
//! generated in fixed-size blocks, each with its own ChaCha stream keyed by
//! `(seed, block index)`, so the sample does not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::FsvParams;

use super::PricingRequest;

/// Paths per random stream; even so antithetic pairs never straddle blocks.
pub const BLOCK_PATHS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct McConfig {
    pub paths: usize,
    pub steps_per_year: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            paths: 20_000,
            steps_per_year: 252,
            seed: 0,
            antithetic: true,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 2 {
            return Err(Error::Validation(format!(
                "Monte-Carlo needs at least 2 paths, got {}",
                self.paths
            )));
        }
        if self.antithetic && !self.paths.is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "antithetic sampling needs an even path count, got {}",
                self.paths
            )));
        }
        if self.steps_per_year < 50 {
            return Err(Error::Validation(format!(
                "steps_per_year must be at least 50, got {}",
                self.steps_per_year
            )));
        }
        Ok(())
    }

    /// Number of time steps for a horizon (at least one).
    pub fn steps_for(&self, horizon: f64) -> usize {
        ((horizon * self.steps_per_year as f64).ceil() as usize).max(1)
    }
}

/// Monte-Carlo price with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct McPrice {
    pub price: f64,
    pub std_error: f64,
    /// Share of paths whose variance was truncated at zero at least once.
    pub floor_hit_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Simulated terminal prices. With antithetic sampling, entries `2i` and
/// `2i + 1` form a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FsvSample {
    pub terminal: Vec<f64>,
    pub floor_hits: usize,
    pub rate: f64,
    pub horizon: f64,
    pub antithetic: bool,
}

impl FsvSample {
    pub fn floor_hit_fraction(&self) -> f64 {
        self.floor_hits as f64 / self.terminal.len() as f64
    }

    /// Discounted call price for `strike` from this sample.
    pub fn price(&self, strike: f64) -> McPrice {
        let df = (-self.rate * self.horizon).exp();
        let payoff = |s: f64| df * (s - strike).max(0.0);
        let values: Vec<f64> = if self.antithetic {
            self.terminal
                .chunks_exact(2)
                .map(|p| 0.5 * (payoff(p[0]) + payoff(p[1])))
                .collect()
        } else {
            self.terminal.iter().map(|&s| payoff(s)).collect()
        };
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let floor = self.floor_hit_fraction();
        McPrice {
            price: mean,
            std_error: (var / n).sqrt(),
            floor_hit_fraction: floor,
            warning: (floor > 0.5).then(|| {
                format!(
                    "variance truncated at zero on {:.1}% of paths; discretisation may be unstable",
                    100.0 * floor
                )
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct StepDraw {
    z_s: f64,
    z_v: f64,
    z_psi: f64,
    jumps: f64,
    z_j: f64,
}

/// Per-horizon constants shared by every path.
struct Scheme {
    steps: usize,
    dt: f64,
    sqrt_dt: f64,
    log_spot: f64,
    drift: f64,
    rho_bar: f64,
    frac: f64,
    vol_scale: f64,
    /// `kernel[j] = (j dt + eps)^{H - 3/2}` for `j >= 1`.
    kernel: Vec<f64>,
    poisson: Option<Poisson<f64>>,
    p: FsvParams,
}

impl Scheme {
    fn new(p: &FsvParams, spot: f64, rate: f64, horizon: f64, mc: &McConfig) -> Result<Self> {
        let steps = mc.steps_for(horizon);
        let dt = horizon / steps as f64;
        let frac = p.hurst - 0.5;
        let kernel = if frac != 0.0 {
            (0..=steps)
                .map(|j| (j as f64 * dt + p.epsilon).powf(p.hurst - 1.5))
                .collect()
        } else {
            Vec::new()
        };
        let poisson = if p.lambda > 0.0 {
            Some(
                Poisson::new(p.lambda * dt)
                    .map_err(|e| Error::Validation(format!("jump intensity {}: {e}", p.lambda)))?,
            )
        } else {
            None
        };
        let mean_jump = p.jump_diffusion().mean_jump();
        Ok(Scheme {
            steps,
            dt,
            sqrt_dt: dt.sqrt(),
            log_spot: spot.ln(),
            drift: rate - p.lambda * mean_jump,
            rho_bar: (1.0 - p.rho * p.rho).max(0.0).sqrt(),
            frac,
            vol_scale: p.epsilon.powf(frac),
            kernel,
            poisson,
            p: *p,
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng, draws: &mut [StepDraw], psi: &mut [f64]) {
        for d in draws.iter_mut() {
            d.z_s = rng.sample(StandardNormal);
            d.z_v = rng.sample(StandardNormal);
            d.z_psi = if self.frac != 0.0 {
                rng.sample(StandardNormal)
            } else {
                0.0
            };
            if let Some(pois) = &self.poisson {
                d.jumps = pois.sample(rng);
                d.z_j = if d.jumps > 0.0 {
                    rng.sample(StandardNormal)
                } else {
                    0.0
                };
            }
        }
        if self.frac != 0.0 {
            for (k, out) in psi.iter_mut().enumerate() {
                *out = (0..k)
                    .map(|i| self.kernel[k - i] * draws[i].z_psi)
                    .sum::<f64>()
                    * self.sqrt_dt;
            }
        }
    }

    /// Runs one path; `sign = -1` gives the antithetic partner. Returns the
    /// terminal price and whether the variance went negative.
    fn path(&self, draws: &[StepDraw], psi: &[f64], sign: f64) -> (f64, bool) {
        let p = &self.p;
        let mut x = self.log_spot;
        let mut v = p.v0;
        let mut hit = false;
        for (k, d) in draws.iter().enumerate() {
            let vp = v.max(0.0);
            let sq = vp.sqrt();
            let dw_s = self.sqrt_dt * sign * d.z_s;
            let dw_v = self.sqrt_dt * sign * (p.rho * d.z_s + self.rho_bar * d.z_v);
            if d.jumps > 0.0 {
                x += d.jumps * p.mu_j + d.jumps.sqrt() * p.sigma_j * sign * d.z_j;
            }
            x += (self.drift - 0.5 * vp) * self.dt + sq * dw_s;
            let fractional = if self.frac != 0.0 {
                self.frac * sign * psi[k] * p.sigma * sq
            } else {
                0.0
            };
            v += (fractional + p.kappa * (p.theta - vp)) * self.dt
                + self.vol_scale * p.sigma * sq * dw_v;
            if v < 0.0 {
                hit = true;
            }
        }
        (x.exp(), hit)
    }

    fn block(&self, mc: &McConfig, block: usize, count: usize) -> (Vec<f64>, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
        rng.set_stream(block as u64);
        let mut draws = vec![StepDraw::default(); self.steps];
        let mut psi = vec![0.0; self.steps];
        let mut out = Vec::with_capacity(count);
        let mut hits = 0;
        let signs: &[f64] = if mc.antithetic { &[1.0, -1.0] } else { &[1.0] };
        while out.len() < count {
            self.draw(&mut rng, &mut draws, &mut psi);
            for &sign in signs {
                let (s, hit) = self.path(&draws, &psi, sign);
                out.push(s);
                hits += hit as usize;
            }
        }
        (out, hits)
    }
}

/// Simulates `mc.paths` terminal prices `S_T` at `horizon`.
pub fn simulate_fsv_paths(
    params: &FsvParams,
    spot: f64,
    rate: f64,
    horizon: f64,
    mc: &McConfig,
) -> Result<FsvSample> {
    mc.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::Validation(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !(params.epsilon > 0.0) {
        return Err(Error::Validation(format!(
            "epsilon must be positive, got {}",
            params.epsilon
        )));
    }
    let scheme = Scheme::new(params, spot, rate, horizon, mc)?;
    let n_blocks = mc.paths.div_ceil(BLOCK_PATHS);
    let blocks: Vec<(Vec<f64>, usize)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let count = BLOCK_PATHS.min(mc.paths - b * BLOCK_PATHS);
            scheme.block(mc, b, count)
        })
        .collect();
    let mut terminal = Vec::with_capacity(mc.paths);
    let mut floor_hits = 0;
    for (s, h) in blocks {
        terminal.extend(s);
        floor_hits += h;
    }
    Ok(FsvSample {
        terminal,
        floor_hits,
        rate,
        horizon,
        antithetic: mc.antithetic,
    })
}

/// Discounted mean payoff over simulated paths, with its standard error.
pub fn price_fsv(req: &PricingRequest, params: &FsvParams, mc: &McConfig) -> Result<McPrice> {
    req.validate()?;
    let sample = simulate_fsv_paths(params, req.spot, req.rate, req.maturity, mc)?;
    Ok(sample.price(req.strike))
}
