//! Shared helpers for integration tests: an independent Monte-Carlo pricer
//! (Andersen QE scheme plus exact compound-Poisson jumps), parameter draws and
//! small synthetic surfaces.
#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use svrobust::market_data::OptionSurface;
use svrobust::models::{BatesParams, HestonParams};
use svrobust::synthetic::{generate_surface, SynthSpec};

/// Acklam's rational approximation of the standard normal quantile
/// (relative error below 1.2e-9).
pub fn inverse_normal(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.38357751867269e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    let low = 0.02425;
    if p < low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Complementary error function (Chebyshev fit, relative error below 1.2e-7).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.265_512_23
            + t * (1.000_023_68
                + t * (0.374_091_96
                    + t * (0.096_784_18
                        + t * (-0.186_288_06
                            + t * (0.278_868_07
                                + t * (-1.135_203_98
                                    + t * (1.488_515_87
                                        + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
            .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Black–Scholes call, written out independently of the library.
pub fn bs_call(spot: f64, strike: f64, t: f64, rate: f64, vol: f64) -> f64 {
    let sd = vol * t.sqrt();
    let d1 = ((spot / strike).ln() + rate * t) / sd + 0.5 * sd;
    let d2 = d1 - sd;
    let n = |x: f64| 0.5 * erfc(-x / std::f64::consts::SQRT_2);
    spot * n(d1) - strike * (-rate * t).exp() * n(d2)
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub price: f64,
    pub se: f64,
}

/// Prices on a maturity × strike grid; `heston[i][j]` for maturity i, strike j.
#[derive(Debug, Clone)]
pub struct OracleGrid {
    pub heston: Vec<Vec<Estimate>>,
    pub bates: Vec<Vec<Estimate>>,
}

struct Qe {
    kappa: f64,
    theta: f64,
    sigma: f64,
    ed: f64,
    k0: f64,
    k1: f64,
    k2: f64,
    k3: f64,
    k4: f64,
    a_mg: f64,
}

impl Qe {
    fn new(p: &HestonParams, dt: f64) -> Self {
        let (g1, g2) = (0.5, 0.5);
        let ed = (-p.kappa * dt).exp();
        let k1 = g1 * dt * (p.kappa * p.rho / p.sigma - 0.5) - p.rho / p.sigma;
        let k2 = g2 * dt * (p.kappa * p.rho / p.sigma - 0.5) + p.rho / p.sigma;
        let k3 = g1 * dt * (1.0 - p.rho * p.rho);
        let k4 = g2 * dt * (1.0 - p.rho * p.rho);
        Qe {
            kappa: p.kappa,
            theta: p.theta,
            sigma: p.sigma,
            ed,
            k0: -p.rho * p.kappa * p.theta * dt / p.sigma,
            k1,
            k2,
            k3,
            k4,
            a_mg: k2 + 0.5 * k4,
        }
    }

    /// One step: returns (v_next, log-increment) for uniform `u` and normal `z`.
    fn step(&self, v: f64, u: f64, z: f64) -> (f64, f64) {
        let m = self.theta + (v - self.theta) * self.ed;
        let s2 = v * self.sigma * self.sigma * self.ed * (1.0 - self.ed) / self.kappa
            + self.theta * self.sigma * self.sigma * (1.0 - self.ed).powi(2) / (2.0 * self.kappa);
        let psi = s2 / (m * m);
        let a = self.a_mg;
        let (v_next, ln_m) = if psi <= 1.5 {
            let b2 = 2.0 / psi - 1.0 + (2.0 / psi).sqrt() * (2.0 / psi - 1.0).sqrt();
            let aa = m / (1.0 + b2);
            let zv = inverse_normal(u);
            let vn = aa * (b2.sqrt() + zv).powi(2);
            let lm = if 2.0 * a * aa < 1.0 {
                a * b2 * aa / (1.0 - 2.0 * a * aa) - 0.5 * (1.0 - 2.0 * a * aa).ln()
            } else {
                f64::NAN
            };
            (vn, lm)
        } else {
            let p = (psi - 1.0) / (psi + 1.0);
            let beta = (1.0 - p) / m;
            let vn = if u <= p {
                0.0
            } else {
                ((1.0 - p) / (1.0 - u)).ln() / beta
            };
            let lm = if a < beta {
                (p + beta * (1.0 - p) / (beta - a)).ln()
            } else {
                f64::NAN
            };
            (vn, lm)
        };
        // martingale-corrected drift; falls back to the plain scheme when the
        // moment generating function does not exist
        let k0 = if ln_m.is_finite() {
            -ln_m - (self.k1 + 0.5 * self.k3) * v
        } else {
            self.k0
        };
        let dx = k0 + self.k1 * v + self.k2 * v_next + (self.k3 * v + self.k4 * v_next).sqrt() * z;
        (v_next, dx)
    }
}

/// Antithetic QE Monte-Carlo of the forward log-return with and without the
/// jump part of `p`. `pairs` antithetic pairs, `steps_per_year` grid; every
/// maturity must be a multiple of the step.
#[allow(clippy::too_many_arguments)]
pub fn qe_oracle(
    p: &BatesParams,
    spot: f64,
    rate: f64,
    maturities: &[f64],
    strikes: &[f64],
    pairs: usize,
    steps_per_year: usize,
    seed: u64,
) -> OracleGrid {
    let dt = 1.0 / steps_per_year as f64;
    let marks: Vec<usize> = maturities
        .iter()
        .map(|t| (t / dt).round() as usize)
        .collect();
    let n_steps = *marks.iter().max().expect("maturities");
    let qe = Qe::new(&p.diffusion(), dt);
    let kbar = (p.mu_j + 0.5 * p.sigma_j * p.sigma_j).exp() - 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let nm = maturities.len();
    let nk = strikes.len();
    let mut sums = vec![[0.0f64; 4]; nm * nk];
    for _ in 0..pairs {
        let (mut v1, mut v2) = (p.v0, p.v0);
        let (mut x1, mut x2) = (0.0, 0.0);
        let (mut j1, mut j2) = (0.0, 0.0);
        let mut last = 0usize;
        let mut mark = 0usize;
        for step in 1..=n_steps {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            let z: f64 = rng.sample(StandardNormal);
            let (nv1, dx1) = qe.step(v1, u, z);
            let (nv2, dx2) = qe.step(v2, 1.0 - u, -z);
            v1 = nv1;
            v2 = nv2;
            x1 += dx1;
            x2 += dx2;
            if step == marks[mark] {
                let h = (step - last) as f64 * dt;
                if p.lambda > 0.0 {
                    let n: f64 = Poisson::new(p.lambda * h)
                        .expect("intensity")
                        .sample(&mut rng);
                    let zj: f64 = rng.sample(StandardNormal);
                    let base = n * p.mu_j;
                    let spread = n.sqrt() * p.sigma_j * zj;
                    j1 += base + spread - p.lambda * kbar * h;
                    j2 += base - spread - p.lambda * kbar * h;
                }
                let fwd = spot * (rate * maturities[mark]).exp();
                for (kj, &k) in strikes.iter().enumerate() {
                    let cell = &mut sums[mark * nk + kj];
                    let hp = 0.5 * ((fwd * x1.exp() - k).max(0.0) + (fwd * x2.exp() - k).max(0.0));
                    let bp = 0.5
                        * ((fwd * (x1 + j1).exp() - k).max(0.0)
                            + (fwd * (x2 + j2).exp() - k).max(0.0));
                    cell[0] += hp;
                    cell[1] += hp * hp;
                    cell[2] += bp;
                    cell[3] += bp * bp;
                }
                last = step;
                mark += 1;
                if mark == nm {
                    break;
                }
            }
        }
    }
    let n = pairs as f64;
    let est = |sum: f64, sq: f64, t: f64| {
        let df = (-rate * t).exp();
        let mean = sum / n;
        let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0);
        Estimate {
            price: df * mean,
            se: df * (var / n).sqrt(),
        }
    };
    let grid = |offset: usize| {
        (0..nm)
            .map(|i| {
                (0..nk)
                    .map(|j| {
                        let c = sums[i * nk + j];
                        est(c[offset], c[offset + 1], maturities[i])
                    })
                    .collect()
            })
            .collect()
    };
    OracleGrid {
        heston: grid(0),
        bates: grid(2),
    }
}

/// Uniform draw from a realistic sub-box of the parameter space.
pub fn random_bates<R: Rng>(rng: &mut R) -> BatesParams {
    HestonParams {
        v0: rng.random_range(0.01..0.09),
        kappa: rng.random_range(0.5..4.0),
        theta: rng.random_range(0.01..0.09),
        sigma: rng.random_range(0.1..0.8),
        rho: rng.random_range(-0.9..0.2),
    }
    .with_jumps(
        rng.random_range(0.0..2.0),
        rng.random_range(-0.3..0.1),
        rng.random_range(0.05..0.3),
    )
}

pub fn toy_heston() -> HestonParams {
    HestonParams {
        v0: 0.04,
        kappa: 1.5,
        theta: 0.05,
        sigma: 0.4,
        rho: -0.6,
    }
}

/// Noise-free 5 × 4 Heston surface (20 quotes).
pub fn toy_spec() -> SynthSpec {
    SynthSpec::new(
        toy_heston().into(),
        100.0,
        0.02,
        vec![0.9, 0.95, 1.0, 1.05, 1.1],
        vec![0.25, 0.5, 1.0, 2.0],
    )
}

pub fn toy_surface() -> OptionSurface {
    generate_surface(&toy_spec()).expect("toy surface")
}

/// Validates a JSON document against a published schema by name.
pub fn check_json(path: &Path, schema_name: &str) -> Result<(), String> {
    let schema =
        svrobust::artifact::schema(schema_name).ok_or(format!("no schema {schema_name}"))?;
    let schema = serde_json::to_value(schema).map_err(|e| e.to_string())?;
    let compiled = jsonschema::JSONSchema::compile(&schema).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let result = compiled.validate(&doc);
    if let Err(errors) = result {
        let msgs: Vec<String> = errors
            .map(|e| format!("{} at {}", e, e.instance_path))
            .collect();
        return Err(format!("{}: {}", path.display(), msgs.join("; ")));
    }
    Ok(())
}

/// Validates every JSON and CSV file in `dir` that has a published layout.
/// Returns the number of files checked.
pub fn check_dir(dir: &Path, params: &[String]) -> Result<usize, String> {
    let mut checked = 0;
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for path in entries {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        if name.ends_with(".json") {
            let schema = svrobust::artifact::json_schema_for_file(&name)
                .ok_or(format!("{name}: no published schema"))?;
            check_json(&path, schema)?;
            checked += 1;
        } else if name.ends_with(".csv") {
            svrobust::artifact::validate_csv(&path, params).map_err(|e| e.to_string())?;
            checked += 1;
        }
    }
    Ok(checked)
}

/// Output of one invocation of the built binary.
pub struct CliRun {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the `svrobust` binary with captured output.
pub fn cli_output(args: &[&str]) -> CliRun {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_svrobust"))
        .args(args)
        .env("SVROBUST_LOG", "warn")
        .output()
        .expect("spawn svrobust");
    CliRun {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Exit code of the `svrobust` binary.
pub fn cli(args: &[&str]) -> i32 {
    let run = cli_output(args);
    if run.code != 0 {
        eprintln!("svrobust {}: {}", args.join(" "), run.stderr.trim());
    }
    run.code
}
