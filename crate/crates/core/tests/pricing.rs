mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use common::Estimate;
use svrobust::models::{BatesParams, FsvParams, HestonParams};
use svrobust::pricing::{price_bates, price_fsv, price_heston, CfPricer, McConfig, PricingRequest};

fn heston_point() -> HestonParams {
    HestonParams {
        v0: 0.04,
        kappa: 1.5,
        theta: 0.04,
        sigma: 0.3,
        rho: -0.6,
    }
}

fn bates_point() -> BatesParams {
    heston_point().with_jumps(0.5, -0.1, 0.25)
}

/// Standard normal pair by the polar method.
fn normal_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    loop {
        let a: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let b: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let s = a * a + b * b;
        if s > 0.0 && s < 1.0 {
            let f = (-2.0 * s.ln() / s).sqrt();
            return (a * f, b * f);
        }
    }
}

/// Antithetic Euler full-truncation estimate of an ATM-style call, with the
/// jump part drawn exactly over the whole horizon.
#[allow(clippy::too_many_arguments)]
fn euler_oracle(
    p: &BatesParams,
    spot: f64,
    strike: f64,
    t: f64,
    rate: f64,
    pairs: usize,
    steps: usize,
    seed: u64,
) -> Estimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = t / steps as f64;
    let sdt = dt.sqrt();
    let rho_bar = (1.0 - p.rho * p.rho).sqrt();
    let kbar = (p.mu_j + 0.5 * p.sigma_j * p.sigma_j).exp() - 1.0;
    let poisson = (p.lambda > 0.0).then(|| Poisson::new(p.lambda * t).unwrap());
    let df = (-rate * t).exp();
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..pairs {
        let mut x = [0.0f64; 2];
        let mut v = [p.v0; 2];
        for _ in 0..steps {
            let (z1, z2) = normal_pair(&mut rng);
            for (i, sign) in [1.0, -1.0].into_iter().enumerate() {
                let vp = v[i].max(0.0);
                let dws = sign * z1 * sdt;
                let dwv = sign * (p.rho * z1 + rho_bar * z2) * sdt;
                x[i] += -0.5 * vp * dt + vp.sqrt() * dws;
                v[i] += p.kappa * (p.theta - vp) * dt + p.sigma * vp.sqrt() * dwv;
            }
        }
        let mut jump = [0.0; 2];
        if let Some(pois) = &poisson {
            let n: f64 = pois.sample(&mut rng);
            let (zj, _) = normal_pair(&mut rng);
            let base = n * p.mu_j - p.lambda * kbar * t;
            jump = [
                base + n.sqrt() * p.sigma_j * zj,
                base - n.sqrt() * p.sigma_j * zj,
            ];
        }
        let fwd = spot * (rate * t).exp();
        let pay = |i: usize| (fwd * (x[i] + jump[i]).exp() - strike).max(0.0);
        let y = 0.5 * df * (pay(0) + pay(1));
        sum += y;
        sq += y * y;
    }
    let n = pairs as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean) * n / (n - 1.0);
    Estimate {
        price: mean,
        se: (var / n).sqrt(),
    }
}

fn atm() -> PricingRequest {
    PricingRequest {
        spot: 100.0,
        strike: 100.0,
        maturity: 1.0,
        rate: 0.02,
    }
}

#[test]
fn heston_interior_point_matches_euler_oracle() {
    let cf = price_heston(&atm(), &heston_point()).unwrap();
    let mc = euler_oracle(
        &heston_point().with_jumps(0.0, 0.0, 0.0),
        100.0,
        100.0,
        1.0,
        0.02,
        500_000,
        250,
        31,
    );
    assert!(
        (cf - mc.price).abs() < 3.0 * mc.se,
        "CF {cf} vs MC {} ± {}",
        mc.price,
        mc.se
    );
}

#[test]
fn bates_interior_point_matches_euler_oracle() {
    let cf = price_bates(&atm(), &bates_point()).unwrap();
    let mc = euler_oracle(&bates_point(), 100.0, 100.0, 1.0, 0.02, 500_000, 250, 32);
    assert!(
        (cf - mc.price).abs() < 3.0 * mc.se,
        "CF {cf} vs MC {} ± {}",
        mc.price,
        mc.se
    );
}

/// Second implementation of the FSV Euler scheme: the fractional driver is
/// kept as a running list of increments and the kernel evaluated on the fly.
fn fsv_reference(
    p: &FsvParams,
    req: &PricingRequest,
    pairs: usize,
    steps: usize,
    seed: u64,
) -> Estimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = req.maturity;
    let dt = t / steps as f64;
    let sdt = dt.sqrt();
    let rho_bar = (1.0 - p.rho * p.rho).sqrt();
    let kbar = (p.mu_j + 0.5 * p.sigma_j * p.sigma_j).exp() - 1.0;
    let step_jumps = Poisson::new(p.lambda * dt).unwrap();
    let scale = p.epsilon.powf(p.hurst - 0.5);
    let df = (-req.rate * t).exp();
    let mut dw_psi = Vec::with_capacity(steps);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..pairs {
        dw_psi.clear();
        let mut x = [req.spot.ln(); 2];
        let mut v = [p.v0; 2];
        for k in 0..steps {
            let tk = k as f64 * dt;
            let psi: f64 = dw_psi
                .iter()
                .enumerate()
                .map(|(i, dw): (usize, &f64)| {
                    (tk - i as f64 * dt + p.epsilon).powf(p.hurst - 1.5) * dw
                })
                .sum();
            let (z1, z2) = normal_pair(&mut rng);
            let (z3, z4) = normal_pair(&mut rng);
            let n: f64 = step_jumps.sample(&mut rng);
            for (i, sign) in [1.0, -1.0].into_iter().enumerate() {
                let vp = v[i].max(0.0);
                let dws = sign * z1 * sdt;
                let dwv = sign * (p.rho * z1 + rho_bar * z2) * sdt;
                x[i] += n * p.mu_j + n.sqrt() * p.sigma_j * sign * z4;
                x[i] += (req.rate - p.lambda * kbar - 0.5 * vp) * dt + vp.sqrt() * dws;
                let drift =
                    (p.hurst - 0.5) * sign * psi * p.sigma * vp.sqrt() + p.kappa * (p.theta - vp);
                v[i] += drift * dt + scale * p.sigma * vp.sqrt() * dwv;
            }
            dw_psi.push(z3 * sdt);
        }
        let pay = |i: usize| (x[i].exp() - req.strike).max(0.0);
        let y = 0.5 * df * (pay(0) + pay(1));
        sum += y;
        sq += y * y;
    }
    let n = pairs as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean) * n / (n - 1.0);
    Estimate {
        price: mean,
        se: (var / n).sqrt(),
    }
}

#[test]
fn fsv_interior_point_matches_second_implementation() {
    let p = bates_point().with_hurst(0.7, 1.0 / 252.0);
    let req = PricingRequest {
        maturity: 0.5,
        ..atm()
    };
    let mc = McConfig {
        paths: 40_000,
        steps_per_year: 100,
        seed: 5,
        antithetic: true,
    };
    let lib = price_fsv(&req, &p, &mc).unwrap();
    let reference = fsv_reference(&p, &req, 200_000, 50, 77);
    let tol = 3.0 * (lib.std_error.powi(2) + reference.se.powi(2)).sqrt();
    assert!(
        (lib.price - reference.price).abs() < tol,
        "library {} ± {} vs reference {} ± {}",
        lib.price,
        lib.std_error,
        reference.price,
        reference.se
    );
}

#[test]
fn fsv_zero_strike_without_jumps_returns_spot() {
    let p = heston_point()
        .with_jumps(0.0, 0.0, 0.0)
        .with_hurst(0.7, 1.0 / 252.0);
    let req = PricingRequest {
        strike: 0.0,
        ..atm()
    };
    let r = price_fsv(&req, &p, &McConfig::default()).unwrap();
    assert!(
        (r.price - 100.0).abs() <= 3.0 * r.std_error + 1e-12,
        "{r:?}"
    );
}

fn bates_strategy() -> impl Strategy<Value = BatesParams> {
    (
        0.005..0.2f64,
        0.2..6.0f64,
        0.005..0.2f64,
        0.05..1.2f64,
        -0.95..0.5f64,
        0.0..3.0f64,
        -0.4..0.2f64,
        0.02..0.4f64,
    )
        .prop_map(|(v0, kappa, theta, sigma, rho, lambda, mu_j, sigma_j)| {
            HestonParams {
                v0,
                kappa,
                theta,
                sigma,
                rho,
            }
            .with_jumps(lambda, mu_j, sigma_j)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cf_prices_are_arbitrage_free_in_strike(p in bates_strategy(), t in 0.05..3.0f64, rate in -0.01..0.08f64) {
        let spot = 100.0;
        let strikes: Vec<f64> = (0..25).map(|i| 50.0 + 5.0 * i as f64).collect();
        let pricer = CfPricer::default();
        for prices in [
            pricer.calls(&p.diffusion(), spot, rate, t, &strikes).unwrap(),
            pricer.calls(&p, spot, rate, t, &strikes).unwrap(),
        ] {
            let tol = 1e-8 * spot;
            for (k, c) in strikes.iter().zip(&prices) {
                let lower = (spot - k * (-rate * t).exp()).max(0.0);
                prop_assert!(*c >= lower - tol && *c <= spot + tol, "K={k}: {c}");
            }
            for w in prices.windows(2) {
                prop_assert!(w[1] <= w[0] + tol, "not monotone: {w:?}");
            }
            for w in prices.windows(3) {
                // equal strike spacing: second difference is non-negative
                prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -tol, "not convex: {w:?}");
            }
        }
    }

    #[test]
    fn bates_without_jumps_is_heston(p in bates_strategy(), k in 60.0..150.0f64, t in 0.05..3.0f64) {
        let req = PricingRequest { spot: 100.0, strike: k, maturity: t, rate: 0.02 };
        let h = price_heston(&req, &p.diffusion()).unwrap();
        let b = price_bates(&req, &p.diffusion().with_jumps(0.0, p.mu_j, p.sigma_j)).unwrap();
        prop_assert!((h - b).abs() <= 1e-10 * h.abs());
    }
}
