//! Monte-Carlo filtering: split replications by fit quality and compare a
//! parameter's distribution across the best and worst groups with the
//! two-sample Kolmogorov–Smirnov test.

use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::bootstrap::BootstrapRun;
use crate::error::{Error, Result};
use crate::models::ParamName;
use crate::robustness::{csv_writer, finish, write_json};

pub const SIGNIFICANCE: f64 = 0.05;
pub const MIN_TRIALS: usize = 8;

/// Trial indices of the behavioural, grey and non-behavioural groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct GroupIndices {
    pub behavioural: Vec<usize>,
    pub grey: Vec<usize>,
    pub non_behavioural: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FilterSplit {
    pub behavioural: Vec<f64>,
    pub non_behavioural: Vec<f64>,
    pub grey: Vec<f64>,
    pub groups: GroupIndices,
}

/// Size of the behavioural and non-behavioural groups, `round(3M/8)`.
pub fn group_size(m: usize) -> usize {
    (3 * m + 4) / 8
}

/// Orders positions by AARE ascending (ties by position) and cuts the lower
/// and upper `round(3M/8)`.
pub fn split_indices(aare: &[f64]) -> Result<GroupIndices> {
    let m = aare.len();
    if m < MIN_TRIALS {
        return Err(Error::Validation(format!(
            "filtering needs at least {MIN_TRIALS} trials, got {m}"
        )));
    }
    if let Some(i) = aare.iter().position(|a| a.is_nan()) {
        return Err(Error::Validation(format!("AARE of trial {i} is NaN")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| aare[a].total_cmp(&aare[b]).then(a.cmp(&b)));
    let g = group_size(m);
    Ok(GroupIndices {
        behavioural: order[..g].to_vec(),
        grey: order[g..m - g].to_vec(),
        non_behavioural: order[m - g..].to_vec(),
    })
}

/// Splits paired `(aare, value)` observations.
pub fn split_values(aare: &[f64], values: &[f64]) -> Result<FilterSplit> {
    if aare.len() != values.len() {
        return Err(Error::Validation(format!(
            "{} AARE values for {} parameter values",
            aare.len(),
            values.len()
        )));
    }
    let groups = split_indices(aare)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| values[i]).collect();
    Ok(FilterSplit {
        behavioural: pick(&groups.behavioural),
        non_behavioural: pick(&groups.non_behavioural),
        grey: pick(&groups.grey),
        groups,
    })
}

/// Full-surface AARE and parameter value of every successful trial, with the
/// trial numbers they belong to.
fn run_columns(run: &BootstrapRun, param: ParamName) -> Result<(Vec<usize>, Vec<f64>, Vec<f64>)> {
    if !run.config.model.params().contains(&param) {
        return Err(Error::UnknownParameter(format!(
            "{param} (not a {} parameter)",
            run.config.model
        )));
    }
    let mut trials = Vec::new();
    let mut aare = Vec::new();
    let mut values = Vec::new();
    for t in run.successful() {
        let (Some(a), Some(theta)) = (t.full_aare, t.theta()) else {
            continue;
        };
        trials.push(t.index);
        aare.push(a);
        values.push(theta.get(param).expect("parameter belongs to model"));
    }
    Ok((trials, aare, values))
}

/// Split of a run by full-surface AARE; group indices refer to trial numbers.
pub fn split_by_aare(run: &BootstrapRun, param: &str) -> Result<FilterSplit> {
    let param: ParamName = param.parse()?;
    let (trials, aare, values) = run_columns(run, param)?;
    let mut split = split_values(&aare, &values)?;
    for group in [
        &mut split.groups.behavioural,
        &mut split.groups.grey,
        &mut split.groups.non_behavioural,
    ] {
        for i in group.iter_mut() {
            *i = trials[*i];
        }
    }
    Ok(split)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample KS statistic `sup |F_a - F_b|`, exact by a merged sweep.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Validation(
            "KS test needs two non-empty samples".into(),
        ));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::Validation("KS test input contains NaN".into()));
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic Kolmogorov survival function `Q(lambda) = P(K > lambda)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    let value = if lambda < 1.0 {
        // Jacobi-transformed series, fast for small arguments:
        // 1 - Q = sqrt(2 pi)/lambda sum_k exp(-(2k-1)^2 pi^2 / (8 lambda^2))
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..=100 {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * c).exp();
            sum += term;
            if term < 1e-12 {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-12 {
                break;
            }
        }
        2.0 * sum
    };
    value.clamp(0.0, 1.0)
}

/// KS statistic and asymptotic p-value with effective size `nm/(n+m)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let d = ks_statistic(a, b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let ne = n * m / (n + m);
    Ok((d, kolmogorov_survival(ne.sqrt() * d)))
}

/// Step-function breakpoints `(x, F(x))` of an empirical CDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EcdfPoint {
    pub x: f64,
    pub f: f64,
}

pub fn ecdf(values: &[f64]) -> Vec<EcdfPoint> {
    let v = sorted(values);
    let n = v.len() as f64;
    let mut out: Vec<EcdfPoint> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(p) if p.x == x => p.f = f,
            _ => out.push(EcdfPoint { x, f }),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FilterReport {
    pub param: String,
    pub ks_statistic: f64,
    pub p_value: f64,
    pub reject_at_5pct: bool,
    pub split: FilterSplit,
    pub ecdf_behavioural: Vec<EcdfPoint>,
    pub ecdf_non_behavioural: Vec<EcdfPoint>,
}

/// KS test of a parameter between behavioural and non-behavioural groups.
pub fn filter_split(param: &str, split: FilterSplit) -> Result<FilterReport> {
    let (d, p) = ks_two_sample(&split.behavioural, &split.non_behavioural)?;
    Ok(FilterReport {
        param: param.to_string(),
        ks_statistic: d,
        p_value: p,
        reject_at_5pct: p < SIGNIFICANCE,
        ecdf_behavioural: ecdf(&split.behavioural),
        ecdf_non_behavioural: ecdf(&split.non_behavioural),
        split,
    })
}

pub fn filter_test(run: &BootstrapRun, param: &str) -> Result<FilterReport> {
    let split = split_by_aare(run, param)?;
    filter_split(param, split)
}

/// Writes `filter_<param>.json` and `ecdf_<param>.csv` (columns group, x, F).
pub fn write_filter_report(report: &FilterReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join(format!("filter_{}.json", report.param));
    write_json(&json, report)?;
    let path = dir.join(format!("ecdf_{}.csv", report.param));
    let mut w = csv_writer(&path)?;
    w.write_record(["group", "x", "F"])?;
    for (group, points) in [
        ("behavioural", &report.ecdf_behavioural),
        ("non_behavioural", &report.ecdf_non_behavioural),
    ] {
        for p in points {
            w.write_record([group.to_string(), p.x.to_string(), p.f.to_string()])?;
        }
    }
    finish(w, &path)?;
    Ok(vec![json, path])
}
