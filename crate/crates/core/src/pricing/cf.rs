//! Characteristic functions of the forward log-return and the single-integral
//! (fundamental transform) call pricer built on them.
//!
//! With `X_T = ln(S_T / F_T)` and `phi(u) = E[exp(i u X_T)]`, the call is
//!
//! ```text
//! C = S_0 - sqrt(S_0 K) e^{-rT/2} / pi * Int_0^inf Re[e^{i u k} phi(u - i/2)] / (u^2 + 1/4) du,
//! k = ln(F_T / K).
//! ```
//!
//! `|phi(u - i/2)| <= 1` along the contour, so the integrand decays at least
//! like `u^-2`; the upper limit is extended panel by panel until the envelope
//! of the remaining tail is below tolerance.

use num_complex::Complex;

use crate::error::NumericalError;
use crate::models::{BatesParams, HestonParams};
use crate::num::Scalar;

use super::black_scholes::forward_call;
use super::quadrature::integrate_many;
use super::PricingRequest;

/// Characteristic function of the forward log-return `ln(S_T / F_T)`.
pub trait LogReturnCf<T: Scalar> {
    fn cf(&self, u: Complex<T>, maturity: T) -> Complex<T>;

    /// Jump part as `(lambda, mu_j, sigma_j)`, if any.
    fn jumps(&self) -> Option<(T, T, T)> {
        None
    }

    /// True when the variance process is identically zero.
    fn zero_diffusion(&self) -> bool;
}

/// `ln(1 + z) / z`, continuous at zero.
fn ln1p_over<T: Scalar>(z: Complex<T>) -> Complex<T> {
    if z.norm() < T::lit(1e-4) {
        let one = Complex::new(T::one(), T::zero());
        one - z * T::lit(0.5) + z * z / T::lit(3.0) - z * z * z * T::lit(0.25)
    } else {
        (z + T::one()).ln() / z
    }
}

/// `(1 - exp(-kappa t)) / kappa`, equal to `t` at `kappa = 0`.
fn decay_factor<T: Scalar>(kappa: T, t: T) -> T {
    if kappa == T::zero() {
        t
    } else {
        -(-kappa * t).exp_m1() / kappa
    }
}

/// Heston CF in a cancellation-free form: `(b - d) / sigma^2` is evaluated as
/// `-(iu + u^2) / (b + d)`, so the expression has a finite limit as
/// `sigma -> 0` and `sigma = 0` can be handled exactly.
pub fn heston_cf<T: Scalar>(p: &HestonParams<T>, u: Complex<T>, t: T) -> Complex<T> {
    let i = Complex::new(T::zero(), T::one());
    let one = Complex::new(T::one(), T::zero());
    let two = T::lit(2.0);
    let iu = i * u;
    let s = iu + u * u;

    if p.sigma == T::zero() {
        // deterministic variance: integrated variance is known in closed form
        let w = p.theta * t + (p.v0 - p.theta) * decay_factor(p.kappa, t);
        return (-s * w * T::lit(0.5)).exp();
    }

    let sigma2 = p.sigma * p.sigma;
    let b = -iu * (p.rho * p.sigma) + p.kappa;
    let d = (b * b + s * sigma2).sqrt();
    let bpd = b + d;
    let m = -s / bpd;
    let g = m * sigma2 / bpd;
    let e = (-d * t).exp();
    let big_d = m * (one - e) / (one - g * e);
    let q = m * (one - e) / (bpd * (one - g));
    let big_c = (m * t - q * ln1p_over(q * sigma2) * two) * (p.kappa * p.theta);
    (big_c + big_d * p.v0).exp()
}

/// CF of the compensated log-normal compound Poisson part.
pub fn jump_cf<T: Scalar>(lambda: T, mu_j: T, sigma_j: T, u: Complex<T>, t: T) -> Complex<T> {
    if lambda == T::zero() {
        return Complex::new(T::one(), T::zero());
    }
    let i = Complex::new(T::zero(), T::one());
    let half = T::lit(0.5);
    let mean_jump = (mu_j + half * sigma_j * sigma_j).exp_m1();
    let jump = (i * u * mu_j - u * u * (half * sigma_j * sigma_j)).exp() - T::one();
    ((jump - i * u * mean_jump) * (lambda * t)).exp()
}

impl<T: Scalar> LogReturnCf<T> for HestonParams<T> {
    fn cf(&self, u: Complex<T>, maturity: T) -> Complex<T> {
        heston_cf(self, u, maturity)
    }

    fn zero_diffusion(&self) -> bool {
        self.v0 == T::zero() && (self.theta == T::zero() || self.kappa == T::zero())
    }
}

impl<T: Scalar> LogReturnCf<T> for BatesParams<T> {
    fn cf(&self, u: Complex<T>, maturity: T) -> Complex<T> {
        heston_cf(&self.diffusion(), u, maturity)
            * jump_cf(self.lambda, self.mu_j, self.sigma_j, u, maturity)
    }

    fn jumps(&self) -> Option<(T, T, T)> {
        (self.lambda != T::zero()).then_some((self.lambda, self.mu_j, self.sigma_j))
    }

    fn zero_diffusion(&self) -> bool {
        self.diffusion().zero_diffusion()
    }
}

/// Integration controls for [`CfPricer`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfSettings<T> {
    /// Absolute price tolerance as a fraction of spot.
    pub tolerance: T,
    /// Width of the first integration panel in `u`.
    pub first_panel: T,
    /// Hard cap on the upper integration limit.
    pub max_upper: T,
    /// Maximum number of Gauss–Kronrod segments per panel.
    pub max_segments: usize,
}

impl<T: Scalar> Default for CfSettings<T> {
    fn default() -> Self {
        CfSettings {
            tolerance: T::lit(1e-9),
            first_panel: T::lit(32.0),
            max_upper: T::lit(1e7),
            max_segments: 400,
        }
    }
}

/// Semi-closed call pricer for models with a known log-return CF.
#[derive(Debug, Clone, Copy)]
pub struct CfPricer<T> {
    pub settings: CfSettings<T>,
}

impl<T: Scalar> Default for CfPricer<T> {
    fn default() -> Self {
        CfPricer {
            settings: CfSettings::default(),
        }
    }
}

impl<T: Scalar> CfPricer<T> {
    pub fn new(settings: CfSettings<T>) -> Self {
        CfPricer { settings }
    }

    /// European call price, clamped to the no-arbitrage envelope
    /// `[max(S_0 - K e^{-rT}, 0), S_0]`.
    pub fn call<M: LogReturnCf<T>>(
        &self,
        model: &M,
        req: &PricingRequest<T>,
    ) -> Result<T, NumericalError> {
        self.calls(model, req.spot, req.rate, req.maturity, &[req.strike])
            .map(|v| v[0])
    }

    /// Calls for several strikes of one maturity. Each CF value along the
    /// contour is shared by all strikes; every price meets the same absolute
    /// tolerance as [`CfPricer::call`].
    pub fn calls<M: LogReturnCf<T>>(
        &self,
        model: &M,
        spot: T,
        rate: T,
        t: T,
        strikes: &[T],
    ) -> Result<Vec<T>, NumericalError> {
        let zero = T::zero();
        let df = (-rate * t).exp();
        let lower = |strike: T| (spot - strike * df).max(zero);
        let mut prices = vec![spot; strikes.len()];
        if model.zero_diffusion() {
            for (price, &strike) in prices.iter_mut().zip(strikes) {
                if strike > zero {
                    let c = zero_diffusion_call(model.jumps(), spot, strike, t, rate);
                    *price = c.max(lower(strike)).min(spot);
                }
            }
            return Ok(prices);
        }
        let active: Vec<usize> = (0..strikes.len()).filter(|&j| strikes[j] > zero).collect();
        if active.is_empty() {
            return Ok(prices);
        }

        let forward = spot / df;
        let discount_half = (T::lit(-0.5) * rate * t).exp();
        // log-moneyness and prefactor in units of spot, so one tolerance fits all strikes
        let ks: Vec<T> = active
            .iter()
            .map(|&j| (forward / strikes[j]).ln())
            .collect();
        let weights: Vec<T> = active
            .iter()
            .map(|&j| (strikes[j] / spot).sqrt() * discount_half / T::PI())
            .collect();
        let max_weight = weights.iter().fold(zero, |m, &w| m.max(w));
        let eps_floor = T::epsilon() * T::lit(1e3);
        let tol = self.settings.tolerance.max(eps_floor);

        let half_i = Complex::new(zero, T::lit(-0.5));
        let quarter = T::lit(0.25);
        let envelope = |u: T| model.cf(Complex::new(u, zero) + half_i, t).norm();
        let integrand = |u: T, out: &mut [T]| {
            let phi = model.cf(Complex::new(u, zero) + half_i, t) / (u * u + quarter);
            for ((o, &k), &w) in out.iter_mut().zip(&ks).zip(&weights) {
                let rot = Complex::new(zero, u * k).exp();
                *o = (rot * phi).re * w;
            }
        };
        let fail = |reason: String, upper: T, err: T, evaluations: usize| NumericalError {
            reason,
            upper_limit: upper.to_f64_lossy(),
            error_estimate: (err * spot).to_f64_lossy(),
            tolerance: (tol * spot).to_f64_lossy(),
            evaluations,
        };

        let mut totals = vec![zero; active.len()];
        let mut error = zero;
        let mut evaluations = 0;
        let mut a = zero;
        let mut b = self.settings.first_panel;
        let mut panel_tol = tol * T::lit(0.25);
        loop {
            let r = integrate_many(
                integrand,
                active.len(),
                a,
                b,
                panel_tol,
                self.settings.max_segments,
            );
            evaluations += r.evaluations;
            error = error + r.error;
            for (tot, v) in totals.iter_mut().zip(&r.values) {
                *tot = *tot + *v;
            }
            if !r.converged {
                return Err(fail(
                    format!("panel [{a}, {b}] did not converge"),
                    b,
                    error,
                    evaluations,
                ));
            }
            // tail beyond b is bounded by sup|phi| * Int_b^inf du / u^2
            let tail = envelope(b).max(envelope(T::lit(1.5) * b)) * max_weight / b;
            if tail < tol * T::lit(0.25) {
                break;
            }
            a = b;
            b = b + b;
            panel_tol = (panel_tol * T::lit(0.5)).max(eps_floor * tol);
            if b > self.settings.max_upper {
                return Err(fail(
                    "integrand tail did not decay before the upper limit cap".into(),
                    a,
                    tail,
                    evaluations,
                ));
            }
        }

        for (&j, tot) in active.iter().zip(&totals) {
            let price = spot - spot * *tot;
            if !price.is_finite() {
                return Err(fail(
                    "non-finite characteristic function value".into(),
                    b,
                    T::nan(),
                    evaluations,
                ));
            }
            prices[j] = price.max(lower(strikes[j])).min(spot);
        }
        Ok(prices)
    }
}

/// Call price when the variance is identically zero: a Poisson mixture of
/// lognormal prices (a plain discounted forward payoff without jumps).
fn zero_diffusion_call<T: Scalar>(
    jumps: Option<(T, T, T)>,
    spot: T,
    strike: T,
    t: T,
    rate: T,
) -> T {
    let zero = T::zero();
    let df = (-rate * t).exp();
    let forward = spot / df;
    let Some((lambda, mu_j, sigma_j)) = jumps else {
        return df * (forward - strike).max(zero);
    };
    let half = T::lit(0.5);
    let intensity = lambda * t;
    let mean_jump = (mu_j + half * sigma_j * sigma_j).exp_m1();
    let n_max = (intensity + T::lit(20.0) * intensity.sqrt() + T::lit(50.0))
        .to_usize()
        .unwrap_or(50);
    let mut total = zero;
    let mut ln_prob = -intensity;
    for n in 0..=n_max {
        let nf = T::lit(n as f64);
        if n > 0 {
            ln_prob = ln_prob + intensity.ln() - nf.ln();
        }
        let ln_fwd_n =
            forward.ln() - intensity * mean_jump + nf * (mu_j + half * sigma_j * sigma_j);
        let var = nf * sigma_j * sigma_j;
        // price relative to the conditional forward keeps large jump means finite
        let fwd_n = ln_fwd_n.exp();
        let term = if fwd_n.is_finite() {
            ln_prob.exp() * forward_call(fwd_n, strike, var)
        } else {
            (ln_prob + ln_fwd_n).exp()
        };
        total = total + term;
    }
    df * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::black_scholes;
    use approx::assert_relative_eq;

    fn heston() -> HestonParams {
        HestonParams {
            v0: 0.04,
            kappa: 1.5,
            theta: 0.04,
            sigma: 0.3,
            rho: -0.6,
        }
    }

    fn req(strike: f64, maturity: f64) -> PricingRequest<f64> {
        PricingRequest {
            spot: 100.0,
            strike,
            maturity,
            rate: 0.02,
        }
    }

    #[test]
    fn cf_is_one_at_zero_and_martingale_at_minus_i() {
        let p = heston();
        let b = p.with_jumps(0.5, -0.1, 0.25);
        for t in [0.1, 1.0, 3.0] {
            let z = Complex::new(0.0, 0.0);
            assert!((heston_cf(&p, z, t) - 1.0).norm() < 1e-14);
            // E[exp(X)] = 1 for the forward log-return
            let mi = Complex::new(0.0, -1.0);
            assert!((heston_cf(&p, mi, t) - 1.0).norm() < 1e-12);
            assert!((b.cf(mi, t) - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn small_sigma_is_continuous() {
        let mut p = heston();
        let u = Complex::new(3.0, -0.5);
        p.sigma = 0.0;
        let exact = heston_cf(&p, u, 1.0);
        p.sigma = 1e-7;
        let near = heston_cf(&p, u, 1.0);
        assert!((exact - near).norm() < 1e-8, "{exact} vs {near}");
    }

    #[test]
    fn deterministic_variance_matches_black_scholes() {
        let p = HestonParams {
            v0: 0.09,
            kappa: 2.0,
            theta: 0.09,
            sigma: 0.0,
            rho: 0.0,
        };
        let pricer = CfPricer::default();
        for k in [50.0, 80.0, 100.0, 120.0, 200.0] {
            let c = pricer.call(&p, &req(k, 0.75)).unwrap();
            let bs = black_scholes::call(100.0, k, 0.75, 0.02, 0.3);
            assert!((c - bs).abs() < 1e-9 * 100.0, "K={k}: {c} vs {bs}");
        }
    }

    #[test]
    fn strip_pricing_matches_one_strike_at_a_time() {
        let p = heston().with_jumps(1.0, -0.1, 0.15);
        let pricer = CfPricer::default();
        let strikes = [0.0, 40.0, 85.0, 100.0, 115.0, 250.0];
        for t in [0.05, 0.5, 3.0] {
            let strip = pricer.calls(&p, 100.0, 0.02, t, &strikes).unwrap();
            for (&k, &c) in strikes.iter().zip(&strip) {
                // one-strike route through an independent scalar quadrature
                let single = scalar_reference(&p, k, t);
                assert!(
                    (c - single).abs() < 2e-9 * 100.0,
                    "K={k} T={t}: {c} vs {single}"
                );
            }
        }
    }

    fn scalar_reference<M: LogReturnCf<f64>>(model: &M, strike: f64, t: f64) -> f64 {
        if strike <= 0.0 {
            return 100.0;
        }
        let (spot, rate) = (100.0, 0.02);
        let k = (spot * (rate * t).exp() / strike).ln();
        let g = |u: f64| {
            let phi = model.cf(Complex::new(u, -0.5), t);
            (Complex::new(0.0, u * k).exp() * phi).re / (u * u + 0.25)
        };
        let edges = [0.0, 10.0, 100.0, 1e3, 1e4, 1e5];
        let total: f64 = edges
            .windows(2)
            .map(|w| crate::pricing::quadrature::integrate(g, w[0], w[1], 1e-13, 5000).value)
            .sum();
        spot - (spot * strike).sqrt() * (-0.5 * rate * t).exp() / std::f64::consts::PI * total
    }

    #[test]
    fn zero_strike_returns_spot() {
        let c = CfPricer::default().call(&heston(), &req(0.0, 1.0)).unwrap();
        assert_eq!(c, 100.0);
    }

    #[test]
    fn zero_variance_without_jumps_is_intrinsic_forward() {
        let p = HestonParams {
            v0: 0.0,
            kappa: 1.0,
            theta: 0.0,
            sigma: 0.5,
            rho: 0.0,
        };
        let c = CfPricer::default().call(&p, &req(90.0, 1.0)).unwrap();
        assert_relative_eq!(c, 100.0 - 90.0 * (-0.02f64).exp(), max_relative = 1e-14);
    }

    /// Merton jump-diffusion price by direct Poisson summation.
    #[allow(clippy::too_many_arguments)]
    fn merton(spot: f64, k: f64, t: f64, r: f64, w: f64, lambda: f64, mu: f64, sj: f64) -> f64 {
        let kbar = (mu + 0.5 * sj * sj).exp() - 1.0;
        let fwd = spot * (r * t).exp();
        let mut p = (-lambda * t).exp();
        let mut total = 0.0;
        for n in 0..200 {
            if n > 0 {
                p *= lambda * t / n as f64;
            }
            let nf = n as f64;
            let f_n = fwd * (-lambda * t * kbar + nf * (mu + 0.5 * sj * sj)).exp();
            total += p * black_scholes::forward_call(f_n, k, w + nf * sj * sj);
        }
        (-r * t).exp() * total
    }

    #[test]
    fn deterministic_variance_with_jumps_matches_merton_series() {
        let b = HestonParams {
            v0: 0.01,
            kappa: 1.0,
            theta: 0.01,
            sigma: 0.0,
            rho: 0.0,
        }
        .with_jumps(1.5, -0.05, 0.2);
        for k in [70.0, 100.0, 130.0] {
            let c = CfPricer::default().call(&b, &req(k, 0.5)).unwrap();
            let m = merton(100.0, k, 0.5, 0.02, 0.005, 1.5, -0.05, 0.2);
            assert!((c - m).abs() < 1e-8, "K={k}: {c} vs {m}");
        }
    }

    #[test]
    fn zero_variance_with_jumps_is_poisson_mixture() {
        let b = HestonParams {
            v0: 0.0,
            kappa: 0.0,
            theta: 0.0,
            sigma: 0.0,
            rho: 0.0,
        }
        .with_jumps(1.5, -0.05, 0.2);
        let c = CfPricer::default().call(&b, &req(100.0, 1.0)).unwrap();
        let m = merton(100.0, 100.0, 1.0, 0.02, 0.0, 1.5, -0.05, 0.2);
        assert!((c - m).abs() < 1e-10, "{c} vs {m}");
    }

    #[test]
    fn f32_pricing_is_close_to_f64() {
        let p64 = heston();
        let p32 = HestonParams::<f32> {
            v0: 0.04,
            kappa: 1.5,
            theta: 0.04,
            sigma: 0.3,
            rho: -0.6,
        };
        let c64 = CfPricer::<f64>::default()
            .call(&p64, &req(100.0, 1.0))
            .unwrap();
        let r32 = PricingRequest::<f32> {
            spot: 100.0,
            strike: 100.0,
            maturity: 1.0,
            rate: 0.02,
        };
        let c32 = CfPricer::<f32>::default().call(&p32, &r32).unwrap();
        assert!((c32 as f64 - c64).abs() < 1e-2, "{c32} vs {c64}");
    }
}
