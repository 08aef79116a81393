//! Option quotes, surfaces and calibration weights.
//!
//! Quote files are UTF-8 CSV with the header `strike,maturity,bid,ask`;
//! maturities are year fractions. Spot, rate and valuation date come from
//! the caller or from a JSON sidecar (`SurfaceMeta`).

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 4] = ["strike", "maturity", "bid", "ask"];

/// One traded European call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct OptionQuote {
    pub strike: f64,
    /// Time to maturity in years.
    pub maturity: f64,
    pub bid: f64,
    pub ask: f64,
}

impl OptionQuote {
    pub fn new(strike: f64, maturity: f64, bid: f64, ask: f64) -> Self {
        OptionQuote {
            strike,
            maturity,
            bid,
            ask,
        }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }

    pub fn spread(&self) -> f64 {
        self.ask - self.bid
    }

    fn check(&self) -> std::result::Result<(), String> {
        let all_finite = [self.strike, self.maturity, self.bid, self.ask]
            .iter()
            .all(|x| x.is_finite());
        if !all_finite {
            return Err("non-finite field".into());
        }
        if !(self.strike > 0.0) {
            return Err(format!("strike must be positive, got {}", self.strike));
        }
        if !(self.maturity > 0.0) {
            return Err(format!("maturity must be positive, got {}", self.maturity));
        }
        if self.bid < 0.0 {
            return Err(format!("bid must be non-negative, got {}", self.bid));
        }
        if self.bid > self.ask {
            return Err(format!("bid exceeds ask ({} > {})", self.bid, self.ask));
        }
        if !(self.ask > 0.0) {
            return Err(format!("ask must be positive, got {}", self.ask));
        }
        Ok(())
    }
}

/// Surface-level metadata, as stored in the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SurfaceMeta {
    pub spot: f64,
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valuation_date: Option<NaiveDate>,
}

impl SurfaceMeta {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// A dated collection of quotes on one underlying. The position of a quote
/// identifies the option throughout the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct OptionSurface {
    pub spot: f64,
    /// Continuously compounded risk-free rate.
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valuation_date: Option<NaiveDate>,
    quotes: Vec<OptionQuote>,
}

impl OptionSurface {
    /// Builds a surface, keeping the given quote order.
    pub fn new(spot: f64, rate: f64, quotes: Vec<OptionQuote>) -> Result<Self> {
        if quotes.is_empty() {
            return Err(Error::Validation("no quotes".into()));
        }
        if !(spot > 0.0) || !spot.is_finite() {
            return Err(Error::Validation(format!(
                "spot must be positive, got {spot}"
            )));
        }
        if !rate.is_finite() {
            return Err(Error::Validation(format!(
                "rate must be finite, got {rate}"
            )));
        }
        for (j, q) in quotes.iter().enumerate() {
            q.check().map_err(|m| {
                Error::Validation(format!("quote {j} (K={}, T={}): {m}", q.strike, q.maturity))
            })?;
        }
        Ok(OptionSurface {
            spot,
            rate,
            valuation_date: None,
            quotes,
        })
    }

    pub fn with_valuation_date(mut self, date: Option<NaiveDate>) -> Self {
        self.valuation_date = date;
        self
    }

    pub fn quotes(&self) -> &[OptionQuote] {
        &self.quotes
    }

    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }

    pub fn meta(&self) -> SurfaceMeta {
        SurfaceMeta {
            spot: self.spot,
            rate: self.rate,
            valuation_date: self.valuation_date,
        }
    }

    /// Sub-surface made of the quotes at `indices`; repeats are kept.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let quotes = indices
            .iter()
            .map(|&i| {
                self.quotes.get(i).copied().ok_or_else(|| {
                    Error::Validation(format!("quote index {i} out of range {}", self.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OptionSurface::new(self.spot, self.rate, quotes)?
            .with_valuation_date(self.valuation_date))
    }

    /// Sorts quotes by `(maturity, strike)`; ties keep their relative order.
    pub fn sort(&mut self) {
        self.quotes.sort_by(|a, b| {
            a.maturity
                .total_cmp(&b.maturity)
                .then(a.strike.total_cmp(&b.strike))
        });
    }

    /// Distinct maturities in ascending order.
    pub fn maturities(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.quotes.iter().map(|q| q.maturity).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

/// Per-quote calibration weights, `w_j = 1 / (ask_j - bid_j)^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(transparent)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn compute_weights(surface: &OptionSurface) -> Result<WeightVector> {
    surface
        .quotes()
        .iter()
        .enumerate()
        .map(|(j, q)| {
            let spread = q.spread();
            if spread > 0.0 {
                Ok(1.0 / (spread * spread))
            } else {
                Err(Error::ZeroSpread {
                    index: j,
                    price: q.ask,
                })
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(WeightVector)
}

/// Quoted prices used as calibration targets (bid-ask midpoints).
pub fn mid_prices(surface: &OptionSurface) -> Vec<f64> {
    surface.quotes().iter().map(OptionQuote::mid).collect()
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    strike: f64,
    maturity: f64,
    bid: f64,
    ask: f64,
}

/// Reads a quote CSV and returns the surface sorted by `(maturity, strike)`.
pub fn load_surface(path: impl AsRef<Path>, spot: f64, rate: f64) -> Result<OptionSurface> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_surface(&text, &path.display().to_string(), spot, rate)
}

/// Parses quote CSV text; `source` names the input in error messages.
pub fn parse_surface(text: &str, source: &str, spot: f64, rate: f64) -> Result<OptionSurface> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };

    if !text.trim().is_empty() {
        let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(parse_err(
                1,
                format!("expected header `{}`", CSV_HEADER.join(",")),
            ));
        }
    }

    let mut quotes = Vec::new();
    for record in reader.deserialize::<CsvRow>() {
        let line = |e: &csv::Error| e.position().map_or(0, |p| p.line() as usize);
        let row = record.map_err(|e| parse_err(line(&e), e.to_string()))?;
        let q = OptionQuote::new(row.strike, row.maturity, row.bid, row.ask);
        let line_no = quotes.len() + 2;
        q.check().map_err(|m| {
            Error::Validation(format!(
                "{source}: line {line_no} (K={}, T={}): {m}",
                q.strike, q.maturity
            ))
        })?;
        if q.spread() == 0.0 {
            return Err(Error::Validation(format!(
                "{source}: line {line_no} (K={}, T={}): zero bid-ask spread",
                q.strike, q.maturity
            )));
        }
        quotes.push(q);
    }
    if quotes.is_empty() {
        return Err(Error::Validation(format!("{source}: no quotes")));
    }
    let mut surface = OptionSurface::new(spot, rate, quotes)?;
    surface.sort();
    Ok(surface)
}

/// Writes quotes as CSV with shortest round-trip float formatting.
pub fn write_surface(surface: &OptionSurface, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, surface_to_csv(surface)).map_err(|e| Error::io(path, e))
}

pub fn surface_to_csv(surface: &OptionSurface) -> String {
    let mut out = CSV_HEADER.join(",");
    out.push('\n');
    for q in surface.quotes() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            q.strike, q.maturity, q.bid, q.ask
        ));
    }
    out
}

pub fn write_meta(meta: &SurfaceMeta, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(meta)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<OptionSurface> {
        parse_surface(text, "test.csv", 100.0, 0.01)
    }

    #[test]
    fn single_row_mid() {
        let s = parse("strike,maturity,bid,ask\n100,0.25,4.90,5.10\n").unwrap();
        assert_eq!(s.len(), 1);
        assert!((mid_prices(&s)[0] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn empty_file_is_rejected() {
        let err = parse("").unwrap_err();
        assert!(err.to_string().contains("no quotes"), "{err}");
        let err = parse("strike,maturity,bid,ask\n").unwrap_err();
        assert!(err.to_string().contains("no quotes"), "{err}");
    }

    #[test]
    fn crossed_quote_is_rejected() {
        let err = parse("strike,maturity,bid,ask\n100,0.25,5.10,4.90\n").unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("bid exceeds ask"), "{err}");
    }

    #[test]
    fn malformed_row_names_line() {
        let err = parse("strike,maturity,bid,ask\n100,0.25,4.9,5.1\n110,abc,1,2\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_header_is_parse_error() {
        assert!(matches!(
            parse("k,t,b,a\n100,0.25,4.9,5.1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn zero_spread_rejected_at_load() {
        let err = parse("strike,maturity,bid,ask\n100,0.25,2.0,2.0\n").unwrap_err();
        assert!(err.to_string().contains("zero bid-ask spread"));
    }

    #[test]
    fn quotes_sorted_by_maturity_then_strike() {
        let s = parse("strike,maturity,bid,ask\n110,0.5,1,1.1\n90,0.5,11,11.2\n100,0.25,4.9,5.1\n")
            .unwrap();
        let keys: Vec<_> = s.quotes().iter().map(|q| (q.maturity, q.strike)).collect();
        assert_eq!(keys, [(0.25, 100.0), (0.5, 90.0), (0.5, 110.0)]);
    }

    #[test]
    fn weights_from_spread() {
        let s = OptionSurface::new(
            100.0,
            0.0,
            vec![
                OptionQuote::new(100.0, 0.25, 1.00, 1.10),
                OptionQuote::new(100.0, 0.25, 4.90, 5.10),
            ],
        )
        .unwrap();
        let w = compute_weights(&s).unwrap();
        assert!((w.0[0] - 100.0).abs() < 1e-9);
        assert!((w.0[1] - 25.0).abs() < 1e-9);
    }

    #[test]
    fn zero_spread_weight_error_names_option() {
        let s = OptionSurface::new(
            100.0,
            0.0,
            vec![
                OptionQuote::new(100.0, 0.25, 1.0, 1.1),
                OptionQuote::new(100.0, 0.25, 2.0, 2.0),
            ],
        )
        .unwrap();
        assert!(matches!(
            compute_weights(&s),
            Err(Error::ZeroSpread { index: 1, .. })
        ));
    }

    #[test]
    fn mid_examples() {
        let s = OptionSurface::new(
            100.0,
            0.0,
            vec![
                OptionQuote::new(100.0, 0.25, 4.90, 5.10),
                OptionQuote::new(150.0, 0.25, 0.00, 0.10),
            ],
        )
        .unwrap();
        let m = mid_prices(&s);
        assert_eq!(m.len(), 2);
        assert!((m[0] - 5.0).abs() < 1e-15);
        assert!((m[1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn sidecar_round_trip() {
        let meta: SurfaceMeta = serde_json::from_str(
            r#"{"spot": 127.1, "rate": 0.002, "valuation_date": "2015-05-15"}"#,
        )
        .unwrap();
        assert_eq!(meta.valuation_date, NaiveDate::from_ymd_opt(2015, 5, 15));
        let back: SurfaceMeta =
            serde_json::from_str(&serde_json::to_string(&meta).unwrap()).unwrap();
        assert_eq!(back, meta);
    }

    fn quote_strategy() -> impl Strategy<Value = OptionQuote> {
        (1.0..500.0f64, 0.01..5.0f64, 0.0..50.0f64, 1e-6..5.0f64)
            .prop_map(|(k, t, bid, spread)| OptionQuote::new(k, t, bid, bid + spread))
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(quotes in prop::collection::vec(quote_strategy(), 1..30)) {
            let mut s = OptionSurface::new(100.0, 0.01, quotes).unwrap();
            s.sort();
            let text = surface_to_csv(&s);
            let back = parse(&text).unwrap();
            prop_assert_eq!(back.quotes(), s.quotes());
        }

        #[test]
        fn weights_permutation_equivariant(
            quotes in prop::collection::vec(quote_strategy(), 2..20),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let s = OptionSurface::new(100.0, 0.0, quotes).unwrap();
            let mut perm: Vec<usize> = (0..s.len()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let w = compute_weights(&s).unwrap();
            let wp = compute_weights(&s.select(&perm).unwrap()).unwrap();
            for (k, &j) in perm.iter().enumerate() {
                prop_assert_eq!(wp.0[k], w.0[j]);
            }
        }
    }
}
