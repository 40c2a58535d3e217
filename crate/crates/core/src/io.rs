//! Daily-bar CSV files and seeded synthetic data.
//!
//! Files follow the common daily-bar export layout: a header row with at
//! least `trade_date,open,high,low,close,vol,amount`, dates as `YYYYMMDD`.
//! Extra columns are ignored and rows may come in any date order.

use crate::ts::{align_and_validate, OhlcvBar, OhlcvFrame, TsError};
use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const REQUIRED_COLUMNS: [&str; 7] = ["trade_date", "open", "high", "low", "close", "vol", "amount"];
pub const DATE_FORMAT: &str = "%Y%m%d";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}, column `{column}`: cannot parse {value:?}")]
    ParseError { line: u64, column: String, value: String },
    #[error(transparent)]
    Ts(#[from] TsError),
    #[error("bad generator parameters: {0}")]
    BadParams(String),
}

/// Reads and validates a daily-bar CSV file.
pub fn load_ohlcv_csv(path: impl AsRef<Path>) -> Result<OhlcvFrame, IoError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })?;
    read_ohlcv(file)
}

pub fn read_ohlcv<R: std::io::Read>(reader: R) -> Result<OhlcvFrame, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 7];
    for (slot, name) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::MissingColumn(name.to_string()))?;
    }
    let mut bars = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |k: usize| rec.get(idx[k]).unwrap_or("");
        let err = |k: usize| IoError::ParseError { line, column: REQUIRED_COLUMNS[k].into(), value: field(k).into() };
        let date = NaiveDate::parse_from_str(field(0), DATE_FORMAT).map_err(|_| err(0))?;
        let mut v = [0.0; 6];
        for (k, out) in v.iter_mut().enumerate() {
            *out = field(k + 1).parse::<f64>().map_err(|_| err(k + 1))?;
        }
        bars.push(OhlcvBar { date, open: v[0], high: v[1], low: v[2], close: v[3], volume: v[4], amount: v[5] });
    }
    Ok(align_and_validate(bars)?)
}

/// Writes `frame` in the layout [`load_ohlcv_csv`] reads. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn save_ohlcv_csv(frame: &OhlcvFrame, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })?;
    write_ohlcv(frame, file)
}

pub fn write_ohlcv<W: std::io::Write>(frame: &OhlcvFrame, writer: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REQUIRED_COLUMNS)?;
    for b in frame.bars() {
        w.write_record([
            b.date.format(DATE_FORMAT).to_string(),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
            b.volume.to_string(),
            b.amount.to_string(),
        ])?;
    }
    w.flush().map_err(|source| IoError::Io { path: "<output>".into(), source })?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyntheticKind {
    /// `close_t = close_{t-1} + sigma·ε_t`
    RandomWalk,
    /// Differences follow `Δ_t = a1·Δ_{t-1} + a2·Δ_{t-2} + sigma·ε_t`.
    Ar2,
    /// `level + amplitude·sin(2πt/period) + u_t` with AR(1) noise
    /// `u_t = noise_ar·u_{t-1} + sigma·ε_t`.
    SinePlusNoise,
}

impl std::str::FromStr for SyntheticKind {
    type Err = IoError;
    fn from_str(s: &str) -> Result<Self, IoError> {
        match s {
            "random_walk" => Ok(SyntheticKind::RandomWalk),
            "ar2" => Ok(SyntheticKind::Ar2),
            "sine_plus_noise" => Ok(SyntheticKind::SinePlusNoise),
            _ => Err(IoError::BadParams(format!("unknown kind `{s}` (random_walk, ar2, sine_plus_noise)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    /// Starting (or mean) close level.
    pub level: f64,
    pub sigma: f64,
    pub a1: f64,
    pub a2: f64,
    pub amplitude: f64,
    /// Sine period in observations.
    pub period: usize,
    pub noise_ar: f64,
    /// Relative size of the open/high/low offsets around close.
    pub jitter: f64,
    pub start: NaiveDate,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            level: 100.0,
            sigma: 0.5,
            a1: 0.5,
            a2: -0.3,
            amplitude: 10.0,
            period: 50,
            noise_ar: 0.5,
            jitter: 0.01,
            start: NaiveDate::from_ymd_opt(2007, 1, 4).expect("valid date"),
        }
    }
}

fn next_weekday(d: NaiveDate) -> NaiveDate {
    let mut d = d + Days::new(1);
    while matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
        d = d + Days::new(1);
    }
    d
}

/// Generates `n` seeded bars. Close follows `kind`; open, high and low are
/// close-relative offsets of at most `jitter`, volume and amount are
/// positive draws. Dates step over weekends from `params.start`.
pub fn gen_synthetic(kind: SyntheticKind, n: usize, seed: u64, params: &SyntheticParams) -> Result<OhlcvFrame, IoError> {
    let p = params;
    if n < 50 {
        return Err(IoError::BadParams(format!("need n >= 50, got {n}")));
    }
    let finite = [p.level, p.sigma, p.a1, p.a2, p.amplitude, p.noise_ar, p.jitter].iter().all(|v| v.is_finite());
    if !finite || p.level <= 0.0 || p.sigma < 0.0 || !(0.0..0.5).contains(&p.jitter) || p.period == 0 {
        return Err(IoError::BadParams(
            "level must be positive, sigma >= 0, jitter in [0, 0.5), period >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eps = || -> f64 { rng.sample(StandardNormal) };
    let mut close = Vec::with_capacity(n);
    match kind {
        SyntheticKind::RandomWalk => {
            let mut c = p.level;
            for _ in 0..n {
                close.push(c);
                c += p.sigma * eps();
            }
        }
        SyntheticKind::Ar2 => {
            let (mut d1, mut d2) = (0.0, 0.0);
            let mut c = p.level;
            for _ in 0..n {
                close.push(c);
                let d = p.a1 * d1 + p.a2 * d2 + p.sigma * eps();
                d2 = d1;
                d1 = d;
                c += d;
            }
        }
        SyntheticKind::SinePlusNoise => {
            let mut u = 0.0;
            for t in 0..n {
                // Reduce the phase first so the zero-noise series repeats exactly.
                let phase = (t % p.period) as f64 / p.period as f64;
                let noise = if p.sigma == 0.0 { 0.0 } else { eps() };
                u = p.noise_ar * u + p.sigma * noise;
                close.push(p.level + p.amplitude * (2.0 * std::f64::consts::PI * phase).sin() + u);
            }
        }
    }
    if let Some(i) = close.iter().position(|&c| c <= 0.0) {
        return Err(IoError::BadParams(format!("close went non-positive at {i}; raise level or lower sigma")));
    }
    let mut date = p.start;
    while matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
        date = next_weekday(date);
    }
    let mut bars = Vec::with_capacity(n);
    for &c in &close {
        let open = c * (1.0 + p.jitter * rng.random_range(-1.0..=1.0));
        let high = open.max(c) * (1.0 + p.jitter * rng.random::<f64>());
        let low = open.min(c) * (1.0 - p.jitter * rng.random::<f64>());
        let volume: f64 = rng.random_range(1e5..1e6_f64).round();
        let amount = volume * c;
        bars.push(OhlcvBar { date, open, high, low, close: c, volume, amount });
        date = next_weekday(date);
    }
    Ok(align_and_validate(bars)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arima::{fit, ArimaSpec};
    use proptest::prelude::*;

    const SAMPLE: &str = "ts_code,trade_date,open,high,low,close,pre_close,change,pct_chg,vol,amount
601988.SH,20220331,3.05,3.07,3.03,3.05,3.05,0.0,0.0,1530000.5,466000.25
601988.SH,20220330,3.04,3.06,3.02,3.05,3.03,0.02,0.66,1450000,441000
601988.SH,20220329,3.02,3.05,3.01,3.03,3.02,0.01,0.33,1380000,418000
";

    #[test]
    fn reads_sample_in_ascending_order() {
        let f = read_ohlcv(SAMPLE.as_bytes()).unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f.bars()[0].date, NaiveDate::from_ymd_opt(2022, 3, 29).unwrap());
        assert_eq!(f.bars()[2].volume, 1530000.5);
        let mut lines: Vec<&str> = SAMPLE.lines().collect();
        lines[1..].reverse();
        assert_eq!(read_ohlcv(lines.join("\n").as_bytes()).unwrap(), f);
    }

    #[test]
    fn missing_column_and_bad_values() {
        let no_close = "trade_date,open,high,low,vol,amount\n20220101,1,1,1,1,1\n";
        assert!(matches!(read_ohlcv(no_close.as_bytes()), Err(IoError::MissingColumn(c)) if c == "close"));
        let bad = "trade_date,open,high,low,close,vol,amount\n20220101,1,1,1,1,1,1\n2022-01-02,1,1,1,1,1,1\n";
        match read_ohlcv(bad.as_bytes()) {
            Err(IoError::ParseError { line: 3, column, .. }) => assert_eq!(column, "trade_date"),
            other => panic!("{other:?}"),
        }
        let bad = "trade_date,open,high,low,close,vol,amount\n20220101,1,1,1,x,1,1\n";
        assert!(matches!(read_ohlcv(bad.as_bytes()), Err(IoError::ParseError { line: 2, .. })));
        let invalid = "trade_date,open,high,low,close,vol,amount\n20220101,1,0.5,1,1,1,1\n";
        assert!(matches!(read_ohlcv(invalid.as_bytes()), Err(IoError::Ts(TsError::InvalidBar { .. }))));
    }

    #[test]
    fn generator_is_deterministic() {
        for kind in [SyntheticKind::RandomWalk, SyntheticKind::Ar2, SyntheticKind::SinePlusNoise] {
            let a = gen_synthetic(kind, 300, 9, &SyntheticParams::default()).unwrap();
            assert_eq!(a, gen_synthetic(kind, 300, 9, &SyntheticParams::default()).unwrap());
            assert_ne!(a, gen_synthetic(kind, 300, 10, &SyntheticParams::default()).unwrap());
        }
    }

    #[test]
    fn ar2_generator_matches_estimator() {
        let f = gen_synthetic(SyntheticKind::Ar2, 5000, 3, &SyntheticParams::default()).unwrap();
        let m = fit(&f.close(), ArimaSpec::default()).unwrap();
        assert!((m.coefficients[0] - 0.5).abs() < 0.05, "{:?}", m.coefficients);
        assert!((m.coefficients[1] + 0.3).abs() < 0.05, "{:?}", m.coefficients);
    }

    #[test]
    fn zero_noise_sine_is_periodic() {
        let p = SyntheticParams { sigma: 0.0, period: 25, ..SyntheticParams::default() };
        let c = gen_synthetic(SyntheticKind::SinePlusNoise, 200, 1, &p).unwrap().close().into_values();
        for t in 25..200 {
            assert_eq!(c[t], c[t - 25]);
        }
    }

    #[test]
    fn rejects_bad_params() {
        let p = SyntheticParams::default();
        assert!(matches!(gen_synthetic(SyntheticKind::Ar2, 49, 1, &p), Err(IoError::BadParams(_))));
        let neg = SyntheticParams { level: -1.0, ..p.clone() };
        assert!(matches!(gen_synthetic(SyntheticKind::Ar2, 100, 1, &neg), Err(IoError::BadParams(_))));
        assert!("brownian".parse::<SyntheticKind>().is_err());
    }

    #[test]
    fn dates_skip_weekends() {
        let f = gen_synthetic(SyntheticKind::RandomWalk, 60, 1, &SyntheticParams::default()).unwrap();
        assert!(f.dates().iter().all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn save_load_round_trip_is_exact(seed in 0u64..100_000, k in 0usize..3) {
            let kind = [SyntheticKind::RandomWalk, SyntheticKind::Ar2, SyntheticKind::SinePlusNoise][k];
            // Generation already validates every bar.
            let f = gen_synthetic(kind, 60, seed, &SyntheticParams::default()).unwrap();
            let mut buf = Vec::new();
            write_ohlcv(&f, &mut buf).unwrap();
            prop_assert_eq!(read_ohlcv(buf.as_slice()).unwrap(), f);
        }
    }
}
