//! Parameter sets of the Heston, Bates and approximative fractional (FSV) models,
//! their calibration box and the reductions between nested models.
//!
//! Jump sizes follow the usual log-normal convention: the log of the jump
//! multiplier is `N(mu_j, sigma_j^2)`, so the compensator of the jump part is
//! `lambda * (exp(mu_j + sigma_j^2 / 2) - 1)`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Default approximation factor of the FSV kernel: one trading day.
pub const DEFAULT_EPSILON: f64 = 1.0 / 252.0;

/// Names of all calibrated parameters, in the canonical order used for vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParamName {
    #[serde(rename = "v0")]
    V0,
    #[serde(rename = "kappa")]
    Kappa,
    #[serde(rename = "theta")]
    Theta,
    #[serde(rename = "sigma")]
    Sigma,
    #[serde(rename = "rho")]
    Rho,
    #[serde(rename = "lambda")]
    Lambda,
    #[serde(rename = "muJ")]
    MuJ,
    #[serde(rename = "sigmaJ")]
    SigmaJ,
    #[serde(rename = "hurst")]
    Hurst,
}

impl ParamName {
    pub const ALL: [ParamName; 9] = [
        ParamName::V0,
        ParamName::Kappa,
        ParamName::Theta,
        ParamName::Sigma,
        ParamName::Rho,
        ParamName::Lambda,
        ParamName::MuJ,
        ParamName::SigmaJ,
        ParamName::Hurst,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::V0 => "v0",
            ParamName::Kappa => "kappa",
            ParamName::Theta => "theta",
            ParamName::Sigma => "sigma",
            ParamName::Rho => "rho",
            ParamName::Lambda => "lambda",
            ParamName::MuJ => "muJ",
            ParamName::SigmaJ => "sigmaJ",
            ParamName::Hurst => "hurst",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParamName::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownParameter(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Heston,
    Bates,
    Fsv,
}

impl ModelKind {
    /// Calibrated parameters of the model, in vector order.
    pub fn params(self) -> &'static [ParamName] {
        match self {
            ModelKind::Heston => &ParamName::ALL[..5],
            ModelKind::Bates => &ParamName::ALL[..8],
            ModelKind::Fsv => &ParamName::ALL[..],
        }
    }

    pub fn dim(self) -> usize {
        self.params().len()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Heston => "heston",
            ModelKind::Bates => "bates",
            ModelKind::Fsv => "fsv",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "heston" => Ok(ModelKind::Heston),
            "bates" => Ok(ModelKind::Bates),
            "fsv" => Ok(ModelKind::Fsv),
            other => Err(Error::Validation(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct HestonParams<T = f64> {
    pub v0: T,
    pub kappa: T,
    pub theta: T,
    pub sigma: T,
    pub rho: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BatesParams<T = f64> {
    pub v0: T,
    pub kappa: T,
    pub theta: T,
    pub sigma: T,
    pub rho: T,
    pub lambda: T,
    #[serde(rename = "muJ")]
    pub mu_j: T,
    #[serde(rename = "sigmaJ")]
    pub sigma_j: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FsvParams<T = f64> {
    pub v0: T,
    pub kappa: T,
    pub theta: T,
    pub sigma: T,
    pub rho: T,
    pub lambda: T,
    #[serde(rename = "muJ")]
    pub mu_j: T,
    #[serde(rename = "sigmaJ")]
    pub sigma_j: T,
    pub hurst: T,
    /// Kernel approximation factor (years). Configuration, not calibrated.
    pub epsilon: T,
}

impl<T: Scalar> HestonParams<T> {
    pub fn with_jumps(self, lambda: T, mu_j: T, sigma_j: T) -> BatesParams<T> {
        BatesParams {
            v0: self.v0,
            kappa: self.kappa,
            theta: self.theta,
            sigma: self.sigma,
            rho: self.rho,
            lambda,
            mu_j,
            sigma_j,
        }
    }
}

impl<T: Scalar> BatesParams<T> {
    /// Diffusion part, ignoring the jump fields.
    pub fn diffusion(&self) -> HestonParams<T> {
        HestonParams {
            v0: self.v0,
            kappa: self.kappa,
            theta: self.theta,
            sigma: self.sigma,
            rho: self.rho,
        }
    }

    /// Drops the jump fields of a jump-free parameter set.
    pub fn reduce_to_heston(&self) -> Result<HestonParams<T>> {
        if self.lambda != T::zero() {
            return Err(Error::InvalidReduction(format!(
                "Bates to Heston requires lambda = 0, got {}",
                self.lambda
            )));
        }
        Ok(self.diffusion())
    }

    pub fn with_hurst(self, hurst: T, epsilon: T) -> FsvParams<T> {
        FsvParams {
            v0: self.v0,
            kappa: self.kappa,
            theta: self.theta,
            sigma: self.sigma,
            rho: self.rho,
            lambda: self.lambda,
            mu_j: self.mu_j,
            sigma_j: self.sigma_j,
            hurst,
            epsilon,
        }
    }

    /// Mean relative jump size `E[J - 1] = exp(mu_j + sigma_j^2 / 2) - 1`.
    pub fn mean_jump(&self) -> T {
        let half = T::lit(0.5);
        (self.mu_j + half * self.sigma_j * self.sigma_j).exp_m1()
    }
}

impl<T: Scalar> FsvParams<T> {
    pub fn jump_diffusion(&self) -> BatesParams<T> {
        BatesParams {
            v0: self.v0,
            kappa: self.kappa,
            theta: self.theta,
            sigma: self.sigma,
            rho: self.rho,
            lambda: self.lambda,
            mu_j: self.mu_j,
            sigma_j: self.sigma_j,
        }
    }

    /// Drops `hurst` and `epsilon` when the fractional term vanishes (H = 1/2).
    pub fn reduce_to_bates(&self) -> Result<BatesParams<T>> {
        if self.hurst != T::lit(0.5) {
            return Err(Error::InvalidReduction(format!(
                "FSV to Bates requires hurst = 0.5, got {}",
                self.hurst
            )));
        }
        Ok(self.jump_diffusion())
    }
}

/// A point in the parameter space of one of the three models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelParams<T = f64> {
    Heston(HestonParams<T>),
    Bates(BatesParams<T>),
    Fsv(FsvParams<T>),
}

impl<T: Scalar> From<HestonParams<T>> for ModelParams<T> {
    fn from(p: HestonParams<T>) -> Self {
        ModelParams::Heston(p)
    }
}

impl<T: Scalar> From<BatesParams<T>> for ModelParams<T> {
    fn from(p: BatesParams<T>) -> Self {
        ModelParams::Bates(p)
    }
}

impl<T: Scalar> From<FsvParams<T>> for ModelParams<T> {
    fn from(p: FsvParams<T>) -> Self {
        ModelParams::Fsv(p)
    }
}

impl<T: Scalar> ModelParams<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Heston(_) => ModelKind::Heston,
            ModelParams::Bates(_) => ModelKind::Bates,
            ModelParams::Fsv(_) => ModelKind::Fsv,
        }
    }

    /// Value of a calibrated parameter, `None` if the model does not carry it.
    pub fn get(&self, name: ParamName) -> Option<T> {
        let v = self.to_vec();
        self.kind()
            .params()
            .iter()
            .position(|p| *p == name)
            .map(|i| v[i])
    }

    pub fn epsilon(&self) -> Option<T> {
        match self {
            ModelParams::Fsv(p) => Some(p.epsilon),
            _ => None,
        }
    }

    /// Calibrated coordinates in `kind().params()` order (epsilon excluded).
    pub fn to_vec(&self) -> Vec<T> {
        match *self {
            ModelParams::Heston(p) => vec![p.v0, p.kappa, p.theta, p.sigma, p.rho],
            ModelParams::Bates(p) => vec![
                p.v0, p.kappa, p.theta, p.sigma, p.rho, p.lambda, p.mu_j, p.sigma_j,
            ],
            ModelParams::Fsv(p) => vec![
                p.v0, p.kappa, p.theta, p.sigma, p.rho, p.lambda, p.mu_j, p.sigma_j, p.hurst,
            ],
        }
    }

    /// Inverse of [`to_vec`](Self::to_vec). `epsilon` is only used for FSV.
    pub fn from_vec(kind: ModelKind, values: &[T], epsilon: T) -> Result<Self> {
        if values.len() != kind.dim() {
            return Err(Error::Validation(format!(
                "{kind} expects {} parameters, got {}",
                kind.dim(),
                values.len()
            )));
        }
        let h = HestonParams {
            v0: values[0],
            kappa: values[1],
            theta: values[2],
            sigma: values[3],
            rho: values[4],
        };
        Ok(match kind {
            ModelKind::Heston => ModelParams::Heston(h),
            ModelKind::Bates => ModelParams::Bates(h.with_jumps(values[5], values[6], values[7])),
            ModelKind::Fsv => ModelParams::Fsv(
                h.with_jumps(values[5], values[6], values[7])
                    .with_hurst(values[8], epsilon),
            ),
        })
    }

    /// Every bound violation, empty when the point lies in the box.
    pub fn validate(&self, bounds: &ParamBounds<T>) -> Vec<BoundViolation> {
        let mut out: Vec<BoundViolation> = self
            .kind()
            .params()
            .iter()
            .zip(self.to_vec())
            .filter_map(|(&name, value)| bounds.check(name, value))
            .collect();
        if let Some(eps) = self.epsilon() {
            if !(eps > T::zero()) || !eps.is_finite() {
                out.push(BoundViolation {
                    param: "epsilon".to_string(),
                    value: eps.to_f64_lossy(),
                    bound: 0.0,
                    side: BoundSide::Lower,
                });
            }
        }
        out
    }

    /// Converts into another scalar precision.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let v: Vec<U> = self
            .to_vec()
            .into_iter()
            .map(|x| U::lit(x.to_f64_lossy()))
            .collect();
        let eps = U::lit(self.epsilon().map_or(DEFAULT_EPSILON, |e| e.to_f64_lossy()));
        ModelParams::from_vec(self.kind(), &v, eps).expect("same dimension")
    }
}

impl ModelParams<f64> {
    /// Parses an untagged parameter object for a known model.
    pub fn from_json(kind: ModelKind, value: serde_json::Value) -> Result<Self> {
        let mut value = value;
        if let Some(obj) = value.as_object_mut() {
            obj.remove("model");
        }
        Ok(match kind {
            ModelKind::Heston => ModelParams::Heston(serde_json::from_value(value)?),
            ModelKind::Bates => ModelParams::Bates(serde_json::from_value(value)?),
            ModelKind::Fsv => {
                if let Some(obj) = value.as_object_mut() {
                    obj.entry("epsilon")
                        .or_insert_with(|| serde_json::json!(DEFAULT_EPSILON));
                }
                ModelParams::Fsv(serde_json::from_value(value)?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum BoundSide {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BoundViolation {
    pub param: String,
    pub value: f64,
    pub bound: f64,
    pub side: BoundSide,
}

impl fmt::Display for BoundViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.side {
            BoundSide::Lower => "below lower bound",
            BoundSide::Upper => "above upper bound",
        };
        write!(f, "{} = {} {rel} {}", self.param, self.value, self.bound)
    }
}

/// Inclusive calibration box, one `[lower, upper]` interval per parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "BTreeMap<String, [f64; 2]>",
    try_from = "BTreeMap<String, [f64; 2]>"
)]
pub struct ParamBounds<T: Scalar = f64> {
    intervals: [(T, T); 9],
}

/// Reference box: `(name, lower, upper)`.
pub const DEFAULT_BOUNDS: [(ParamName, f64, f64); 9] = [
    (ParamName::V0, 0.0, 1.0),
    (ParamName::Kappa, 0.0, 100.0),
    (ParamName::Theta, 0.0, 1.0),
    (ParamName::Sigma, 0.0, 4.0),
    (ParamName::Rho, -1.0, 1.0),
    (ParamName::Lambda, 0.0, 100.0),
    (ParamName::MuJ, -10.0, 5.0),
    (ParamName::SigmaJ, 0.0, 4.0),
    (ParamName::Hurst, 0.5, 1.0),
];

impl<T: Scalar> Default for ParamBounds<T> {
    fn default() -> Self {
        let mut intervals = [(T::zero(), T::one()); 9];
        for (name, lo, hi) in DEFAULT_BOUNDS {
            intervals[name.index()] = (T::lit(lo), T::lit(hi));
        }
        ParamBounds { intervals }
    }
}

impl<T: Scalar> ParamBounds<T> {
    pub fn get(&self, name: ParamName) -> (T, T) {
        self.intervals[name.index()]
    }

    pub fn set(&mut self, name: ParamName, lower: T, upper: T) -> Result<()> {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::Validation(format!(
                "bound for {name} must satisfy lower < upper, got [{lower}, {upper}]"
            )));
        }
        self.intervals[name.index()] = (lower, upper);
        Ok(())
    }

    pub fn check(&self, name: ParamName, value: T) -> Option<BoundViolation> {
        let (lo, hi) = self.get(name);
        let violation = |bound: T, side| BoundViolation {
            param: name.as_str().to_string(),
            value: value.to_f64_lossy(),
            bound: bound.to_f64_lossy(),
            side,
        };
        if value < lo || value.is_nan() {
            Some(violation(lo, BoundSide::Lower))
        } else if value > hi {
            Some(violation(hi, BoundSide::Upper))
        } else {
            None
        }
    }

    /// Lower and upper corners restricted to a model's coordinates.
    pub fn corners(&self, kind: ModelKind) -> (Vec<T>, Vec<T>) {
        kind.params().iter().map(|&p| self.get(p)).unzip()
    }

    /// Clamps a point into the box.
    pub fn clamp(&self, params: &ModelParams<T>) -> ModelParams<T> {
        let kind = params.kind();
        let v: Vec<T> = kind
            .params()
            .iter()
            .zip(params.to_vec())
            .map(|(&p, x)| {
                let (lo, hi) = self.get(p);
                x.max(lo).min(hi)
            })
            .collect();
        let eps = params.epsilon().unwrap_or_else(|| T::lit(DEFAULT_EPSILON));
        ModelParams::from_vec(kind, &v, eps).expect("same dimension")
    }
}

impl ParamBounds<f64> {
    /// Applies a partial override object such as `{"kappa": [0, 20]}` to the defaults.
    pub fn from_override_json(value: &serde_json::Value) -> Result<Self> {
        let map: BTreeMap<String, [f64; 2]> = serde_json::from_value(value.clone())?;
        Self::try_from(map)
    }
}

impl<T: Scalar> From<ParamBounds<T>> for BTreeMap<String, [f64; 2]> {
    fn from(b: ParamBounds<T>) -> Self {
        ParamName::ALL
            .iter()
            .map(|&p| {
                let (lo, hi) = b.get(p);
                (
                    p.as_str().to_string(),
                    [lo.to_f64_lossy(), hi.to_f64_lossy()],
                )
            })
            .collect()
    }
}

impl<T: Scalar> TryFrom<BTreeMap<String, [f64; 2]>> for ParamBounds<T> {
    type Error = Error;

    fn try_from(map: BTreeMap<String, [f64; 2]>) -> Result<Self> {
        let mut b = ParamBounds::default();
        for (name, [lo, hi]) in map {
            b.set(name.parse()?, T::lit(lo), T::lit(hi))?;
        }
        Ok(b)
    }
}

impl<T: Scalar> JsonSchema for ParamBounds<T> {
    fn schema_name() -> String {
        "ParamBounds".to_string()
    }

    fn json_schema(gen: &mut schemars::gen::SchemaGenerator) -> schemars::schema::Schema {
        <BTreeMap<String, [f64; 2]>>::json_schema(gen)
    }
}
