//! Robustness measures over a bootstrap run: per-option price dispersion,
//! scatterplot-matrix data, parameter correlations, normal Q-Q data and
//! strike-maturity bubble data.

use std::fs;
use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::bootstrap::BootstrapRun;
use crate::error::{Error, Result};
use crate::market_data::{mid_prices, OptionSurface};
use crate::stats::{freedman_diaconis, mean, normal_quantile, pearson, sample_variance, Histogram};

/// Per-option dispersion of the bootstrap-predicted prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct OptionDispersion {
    pub j: usize,
    pub strike: f64,
    pub maturity: f64,
    pub mid: f64,
    /// Mean model price over replications.
    pub cbar: f64,
    /// `|cbar - mid| / mid`.
    pub bre: f64,
    /// Unbiased sample variance of `|C_i - mid| / mid` over replications.
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PriceDispersion {
    pub options: Vec<OptionDispersion>,
}

/// `(cbar, bre, variance)` per option from one full-surface price vector per
/// replication.
pub fn dispersion_measures(prices: &[Vec<f64>], mids: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    if prices.len() < 2 {
        return Err(Error::UndefinedMeasure(format!(
            "dispersion needs at least 2 replications, got {}",
            prices.len()
        )));
    }
    if let Some(i) = prices.iter().position(|p| p.len() != mids.len()) {
        return Err(Error::Validation(format!(
            "replication {i} priced {} options, surface has {}",
            prices[i].len(),
            mids.len()
        )));
    }
    mids.iter()
        .enumerate()
        .map(|(j, &mid)| {
            if !(mid > 0.0) {
                return Err(Error::UndefinedMeasure(format!(
                    "market price of option {j} is {mid}"
                )));
            }
            let column: Vec<f64> = prices.iter().map(|p| p[j]).collect();
            let errors: Vec<f64> = column.iter().map(|c| (c - mid).abs() / mid).collect();
            let cbar = mean(&column);
            Ok((cbar, (cbar - mid).abs() / mid, sample_variance(&errors)))
        })
        .collect()
}

/// BRE and variance measure for every option of `surface`, using the cached
/// full-surface prices of every successful replication.
pub fn price_dispersion(run: &BootstrapRun, surface: &OptionSurface) -> Result<PriceDispersion> {
    let prices: Vec<Vec<f64>> = run
        .successful()
        .filter_map(|t| t.full_prices.clone())
        .collect();
    let mids = mid_prices(surface);
    let measures = dispersion_measures(&prices, &mids)?;
    let options = surface
        .quotes()
        .iter()
        .zip(measures)
        .enumerate()
        .map(|(j, (q, (cbar, bre, variance)))| OptionDispersion {
            j,
            strike: q.strike,
            maturity: q.maturity,
            mid: q.mid(),
            cbar,
            bre,
            variance,
        })
        .collect();
    Ok(PriceDispersion { options })
}

/// Calibrated parameter columns of the successful replications, in the
/// model's parameter order.
pub fn parameter_columns(run: &BootstrapRun) -> Vec<Vec<f64>> {
    let dim = run.config.model.dim();
    let mut cols = vec![Vec::new(); dim];
    for t in run.successful() {
        if let Some(theta) = t.theta() {
            for (c, v) in cols.iter_mut().zip(theta.to_vec()) {
                c.push(v);
            }
        }
    }
    cols
}

fn param_names(run: &BootstrapRun) -> Vec<String> {
    run.config
        .model
        .params()
        .iter()
        .map(|p| p.as_str().to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PairCloud {
    pub x: String,
    pub y: String,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ScatterData {
    pub params: Vec<String>,
    /// One histogram per parameter (matrix diagonal).
    pub histograms: Vec<Histogram>,
    /// One cloud per unordered parameter pair (off-diagonal cells).
    pub clouds: Vec<PairCloud>,
    /// Full-surface calibration.
    pub reference: Vec<f64>,
    /// Bootstrap mean.
    pub theta_bar: Vec<f64>,
}

pub fn scatter_data(run: &BootstrapRun) -> Result<ScatterData> {
    let cols = parameter_columns(run);
    let m = cols.first().map_or(0, Vec::len);
    if m < 2 {
        return Err(Error::UndefinedMeasure(format!(
            "scatter data needs at least 2 replications, got {m}"
        )));
    }
    let names = param_names(run);
    let mut clouds = Vec::new();
    for a in 0..cols.len() {
        for b in a + 1..cols.len() {
            clouds.push(PairCloud {
                x: names[a].clone(),
                y: names[b].clone(),
                points: cols[a]
                    .iter()
                    .zip(&cols[b])
                    .map(|(&x, &y)| [x, y])
                    .collect(),
            });
        }
    }
    Ok(ScatterData {
        histograms: cols.iter().map(|c| freedman_diaconis(c)).collect(),
        clouds,
        reference: run.reference.theta_hat.to_vec(),
        theta_bar: run.theta_bar.to_vec(),
        params: names,
    })
}

/// Symmetric correlation matrix; `None` marks an undefined entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CorrelationMatrix {
    pub params: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

/// Pearson correlations between columns. Entries involving a constant column,
/// or computed from fewer than 3 observations, are undefined.
pub fn correlation_matrix(names: Vec<String>, cols: &[Vec<f64>]) -> CorrelationMatrix {
    let n = cols.len();
    let mut values = vec![vec![None; n]; n];
    let enough = cols.iter().all(|c| c.len() >= 3);
    for a in 0..n {
        for b in a..n {
            let r = if !enough {
                None
            } else if a == b {
                pearson(&cols[a], &cols[a]).map(|_| 1.0)
            } else {
                pearson(&cols[a], &cols[b])
            };
            values[a][b] = r;
            values[b][a] = r;
        }
    }
    CorrelationMatrix {
        params: names,
        values,
    }
}

pub fn pairwise_correlations(run: &BootstrapRun) -> CorrelationMatrix {
    correlation_matrix(param_names(run), &parameter_columns(run))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct QnPoint {
    /// `Phi^{-1}((k - 0.5) / M)`.
    pub normal: f64,
    /// k-th smallest sample value.
    pub sample: f64,
}

/// Normal quantile-quantile pairs of a sample.
pub fn qn_plot_data(values: &[f64]) -> Result<Vec<QnPoint>> {
    if values.len() < 3 {
        return Err(Error::Validation(format!(
            "Q-N data needs at least 3 values, got {}",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(k, x)| QnPoint {
            normal: normal_quantile((k as f64 + 0.5) / m),
            sample: x,
        })
        .collect())
}

/// Least-squares slope of sample quantiles on normal quantiles.
pub fn qn_slope(points: &[QnPoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.normal).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.sample).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Bubble {
    pub strike: f64,
    pub maturity: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BubbleData {
    pub spot: f64,
    pub bre: Vec<Bubble>,
    pub variance: Vec<Bubble>,
}

pub fn kxt_bubble_data(dispersion: &PriceDispersion, surface: &OptionSurface) -> BubbleData {
    let bubble = |o: &OptionDispersion, value: f64| Bubble {
        strike: o.strike,
        maturity: o.maturity,
        value,
    };
    BubbleData {
        spot: surface.spot,
        bre: dispersion
            .options
            .iter()
            .map(|o| bubble(o, o.bre))
            .collect(),
        variance: dispersion
            .options
            .iter()
            .map(|o| bubble(o, o.variance))
            .collect(),
    }
}

/// Marker written to CSV for undefined correlations.
pub const UNDEFINED: &str = "--";

/// Writes `dispersion.csv`, `scatter.json`, `correlations.csv`,
/// `qn_<param>.csv` and `bubbles.csv` into `dir`; returns the written paths.
pub fn write_report(run: &BootstrapRun, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let surface = &run.surface;
    let dispersion = price_dispersion(run, surface)?;

    let path = dir.join("dispersion.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["j", "K", "T", "mid", "Cbar", "BRE", "V"])?;
    for o in &dispersion.options {
        w.write_record([
            o.j.to_string(),
            o.strike.to_string(),
            o.maturity.to_string(),
            o.mid.to_string(),
            o.cbar.to_string(),
            o.bre.to_string(),
            o.variance.to_string(),
        ])?;
    }
    finish(w, &path)?;
    written.push(path);

    let path = dir.join("scatter.json");
    write_json(&path, &scatter_data(run)?)?;
    written.push(path);

    let corr = pairwise_correlations(run);
    let path = dir.join("correlations.csv");
    let mut w = csv_writer(&path)?;
    let mut header = vec!["param".to_string()];
    header.extend(corr.params.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in corr.params.iter().zip(&corr.values) {
        let mut rec = vec![name.clone()];
        rec.extend(
            row.iter()
                .map(|v| v.map_or(UNDEFINED.to_string(), |x| x.to_string())),
        );
        w.write_record(&rec)?;
    }
    finish(w, &path)?;
    written.push(path);

    for (name, col) in param_names(run).iter().zip(parameter_columns(run)) {
        let path = dir.join(format!("qn_{name}.csv"));
        let mut w = csv_writer(&path)?;
        w.write_record(["normal", "sample"])?;
        for p in qn_plot_data(&col)? {
            w.write_record([p.normal.to_string(), p.sample.to_string()])?;
        }
        finish(w, &path)?;
        written.push(path);
    }

    let bubbles = kxt_bubble_data(&dispersion, surface);
    let path = dir.join("bubbles.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["measure", "K", "T", "value", "spot"])?;
    for (measure, set) in [("BRE", &bubbles.bre), ("V", &bubbles.variance)] {
        for b in set {
            w.write_record([
                measure.to_string(),
                b.strike.to_string(),
                b.maturity.to_string(),
                b.value.to_string(),
                bubbles.spot.to_string(),
            ])?;
        }
    }
    finish(w, &path)?;
    written.push(path);
    Ok(written)
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub(crate) fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
