use crate::num::Scalar;
use crate::stats::normal_cdf;

/// Undiscounted call on a lognormal forward with total log-variance `variance`.
pub fn forward_call<T: Scalar>(forward: T, strike: T, variance: T) -> T {
    let zero = T::zero();
    if strike <= zero {
        return forward;
    }
    if !(variance > zero) {
        return (forward - strike).max(zero);
    }
    let sd = variance.sqrt();
    let d1 = ((forward / strike).ln() + T::lit(0.5) * variance) / sd;
    let d2 = d1 - sd;
    (forward * normal_cdf(d1) - strike * normal_cdf(d2)).max(zero)
}

/// Black–Scholes European call price.
pub fn call<T: Scalar>(spot: T, strike: T, maturity: T, rate: T, vol: T) -> T {
    let df = (-rate * maturity).exp();
    df * forward_call(spot / df, strike, vol * vol * maturity)
}
