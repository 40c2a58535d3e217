//! `stockseq` command-line tool.

use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use stockseq::arima::{self, ArimaSpec};
use stockseq::io::{gen_synthetic, load_ohlcv_csv, save_ohlcv_csv, SyntheticKind, SyntheticParams};
use stockseq::metrics::evaluate;
use stockseq::pipeline::{self, ablation_table, checkpoint, predictions_csv, PipelineConfig, Variant};
use stockseq::stats::{acf, adf_test, difference, pacf};
use stockseq::ts::{OhlcvFrame, Series};

#[derive(Parser)]
#[command(name = "stockseq", version, about = "ARIMA + attention/CNN-BiLSTM + boosted-tree stock forecaster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Augmented Dickey-Fuller unit-root test on one column.
    Adf(AdfArgs),
    /// Sample autocorrelations as `lag,value` CSV.
    Acf(CorrArgs),
    /// Partial autocorrelations as `lag,value` CSV.
    Pacf(CorrArgs),
    /// Fit ARIMA(p,d,0) or forecast with it.
    #[command(subcommand)]
    Arima(ArimaCommand),
    /// Train one variant; writes a checkpoint and the loss history.
    Train(TrainArgs),
    /// One-step predictions from a checkpoint as `date,truth,prediction` CSV.
    Predict(PredictArgs),
    /// Error metrics between a prediction file and a truth file.
    Evaluate(EvaluateArgs),
    /// Train and score all eight variants; prints the comparison table.
    Ablate(AblateArgs),
    /// Write a seeded synthetic daily-bar CSV.
    Gen(GenArgs),
}

#[derive(Args)]
struct SeriesArgs {
    /// Daily-bar CSV (trade_date,open,high,low,close,vol,amount).
    csv: PathBuf,
    /// Column to analyse: open, high, low, close, vol, amount.
    #[arg(long, default_value = "close")]
    column: String,
    /// Differencing order applied first.
    #[arg(long, default_value_t = 0)]
    diff: usize,
}

#[derive(Args)]
struct AdfArgs {
    #[command(flatten)]
    series: SeriesArgs,
    /// Largest lag considered (default: floor(12·(n/100)^0.25)).
    #[arg(long)]
    max_lag: Option<usize>,
}

#[derive(Args)]
struct CorrArgs {
    #[command(flatten)]
    series: SeriesArgs,
    /// Highest lag reported.
    #[arg(long)]
    lags: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ArimaOrder {
    /// Daily-bar CSV.
    csv: PathBuf,
    /// Autoregressive order.
    #[arg(long, default_value_t = 2)]
    p: usize,
    /// Differencing order.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Column to model.
    #[arg(long, default_value = "close")]
    column: String,
}

#[derive(Subcommand)]
enum ArimaCommand {
    /// Print fitted coefficients as key=value lines.
    Fit(ArimaOrder),
    /// Forecast past the end of the series as `step,forecast` CSV.
    Forecast {
        #[command(flatten)]
        order: ArimaOrder,
        /// Number of steps ahead.
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Daily-bar CSV.
    csv: PathBuf,
    /// Config file of key=value lines (e.g. train.epochs=50).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set gbt.n_rounds=200 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Random seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Model variant: arima_only, xgb_only, sl_lstm, ml_lstm, bilstm,
    /// bilstm_xgb, cnn_bilstm_xgb, acnn_bilstm_xgb.
    #[arg(long)]
    variant: Option<Variant>,
    /// Checkpoint output path.
    #[arg(long, default_value = "checkpoint.json")]
    checkpoint: PathBuf,
    /// Loss-history CSV output path.
    #[arg(long, default_value = "loss.csv")]
    loss_out: PathBuf,
    /// Test-span `date,truth,prediction` CSV output path.
    #[arg(long)]
    predictions_out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Daily-bar CSV to predict on.
    csv: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// CSV holding predictions (column `prediction`, else the last column).
    #[arg(long)]
    pred: PathBuf,
    /// CSV holding true values (column `truth`, else `close`, else the last column).
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct GenArgs {
    /// Generator: random_walk, ar2 or sine_plus_noise.
    #[arg(long)]
    kind: SyntheticKind,
    /// Number of bars (at least 50).
    #[arg(long)]
    n: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Starting or mean close level.
    #[arg(long)]
    level: Option<f64>,
    /// Innovation standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// First AR coefficient of the differences (ar2).
    #[arg(long)]
    a1: Option<f64>,
    /// Second AR coefficient of the differences (ar2).
    #[arg(long)]
    a2: Option<f64>,
    /// Sine amplitude (sine_plus_noise).
    #[arg(long)]
    amplitude: Option<f64>,
    /// Sine period in bars (sine_plus_noise).
    #[arg(long)]
    period: Option<usize>,
    /// AR(1) coefficient of the noise (sine_plus_noise).
    #[arg(long)]
    noise_ar: Option<f64>,
}

enum Failure {
    /// Bad arguments; exit code 2.
    Usage(String),
    /// Anything failing on the data; exit code 1.
    Data(String),
}

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

type Result<T> = std::result::Result<T, Failure>;

fn load(path: &Path) -> Result<OhlcvFrame> {
    load_ohlcv_csv(path).map_err(data)
}

fn load_series(a: &SeriesArgs) -> Result<Series> {
    let frame = load(&a.csv)?;
    let s = frame
        .column(&a.column)
        .ok_or_else(|| Failure::Usage(format!("unknown column `{}`", a.column)))?;
    if a.diff == 0 {
        Ok(s)
    } else {
        difference(&s, a.diff).map_err(data)
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| data(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn lag_csv(values: &[f64]) -> String {
    let mut s = String::from("lag,value\n");
    for (k, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

fn pipeline_config(a: &RunArgs, variant: Option<Variant>) -> Result<PipelineConfig> {
    let mut c = PipelineConfig::default();
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
        c.apply_text(&text).map_err(|e| data(format!("{}: {e}", path.display())))?;
    }
    for kv in &a.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        c.set(k, v).map_err(|e| Failure::Usage(format!("--set {e}")))?;
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(v) = variant {
        c.variant = v;
    }
    c.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(c)
}

/// Values of the first matching column in `preferred`, else the last one.
fn read_column(path: &Path, preferred: &[&str]) -> Result<Vec<f64>> {
    let ctx = |e: &dyn std::fmt::Display| data(format!("{}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| ctx(&e))?;
    let headers = rdr.headers().map_err(|e| ctx(&e))?.clone();
    if headers.is_empty() {
        return Err(ctx(&"no columns"));
    }
    let col = preferred
        .iter()
        .find_map(|name| headers.iter().position(|h| h == *name))
        .unwrap_or(headers.len() - 1);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ctx(&e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let v = rec.get(col).unwrap_or("");
        out.push(v.parse::<f64>().map_err(|_| ctx(&format!("line {line}: cannot parse {v:?}")))?);
    }
    Ok(out)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Adf(a) => {
            let s = load_series(&a.series)?;
            let r = adf_test(&s, a.max_lag).map_err(data)?;
            emit(&r.to_key_value(), None)
        }
        Command::Acf(a) => {
            let s = load_series(&a.series)?;
            emit(&lag_csv(&acf(&s, a.lags).map_err(data)?), a.out.as_deref())
        }
        Command::Pacf(a) => {
            let s = load_series(&a.series)?;
            emit(&lag_csv(&pacf(&s, a.lags).map_err(data)?), a.out.as_deref())
        }
        Command::Arima(cmd) => {
            let order = match &cmd {
                ArimaCommand::Fit(o) => o,
                ArimaCommand::Forecast { order, .. } => order,
            };
            let spec = ArimaSpec::new(order.p, order.d, 0).map_err(|e| Failure::Usage(e.to_string()))?;
            let series = load_series(&SeriesArgs { csv: order.csv.clone(), column: order.column.clone(), diff: 0 })?;
            let model = arima::fit(&series, spec).map_err(data)?;
            match cmd {
                ArimaCommand::Fit(_) => {
                    let mut s = format!("p={}\nd={}\nq=0\nintercept={}\n", spec.p, spec.d, model.intercept);
                    for (i, a) in model.coefficients.iter().enumerate() {
                        let _ = writeln!(s, "a{}={a}", i + 1);
                    }
                    let _ = writeln!(s, "residual_variance={}", model.residual_variance);
                    emit(&s, None)
                }
                ArimaCommand::Forecast { horizon, out, .. } => {
                    let f = model.forecast(&series, horizon).map_err(|e| Failure::Usage(e.to_string()))?;
                    let mut s = String::from("step,forecast\n");
                    for (k, v) in f.values().iter().enumerate() {
                        let _ = writeln!(s, "{},{v}", k + 1);
                    }
                    emit(&s, out.as_deref())
                }
            }
        }
        Command::Train(a) => {
            let config = pipeline_config(&a.run, a.variant)?;
            let frame = load(&a.run.csv)?;
            let out = pipeline::run_with(&config, &frame, |e, l| eprintln!("epoch {} loss {l}", e + 1)).map_err(data)?;
            checkpoint::save(&out.trained, &a.checkpoint).map_err(data)?;
            std::fs::write(&a.loss_out, out.report.loss_csv()).map_err(|e| data(format!("{}: {e}", a.loss_out.display())))?;
            if let Some(p) = &a.predictions_out {
                emit(&out.report.predictions_csv(), Some(p))?;
            }
            eprintln!("started={}\nfinished={}", out.report.started, out.report.finished);
            emit(&out.report.to_key_value(false), None)
        }
        Command::Predict(a) => {
            let trained = checkpoint::load(&a.checkpoint).map_err(data)?;
            let frame = load(&a.csv)?;
            let preds = trained.predict(&frame).map_err(data)?;
            emit(&predictions_csv(&preds), a.out.as_deref())
        }
        Command::Evaluate(a) => {
            let pred = read_column(&a.pred, &["prediction"])?;
            let truth = read_column(&a.truth, &["truth", "close"])?;
            let m = evaluate(&pred, &truth).map_err(data)?;
            emit(&m.to_key_value(), None)
        }
        Command::Ablate(a) => {
            let config = pipeline_config(&a.run, None)?;
            let frame = load(&a.run.csv)?;
            let reports = pipeline::ablate(&config, &frame).map_err(data)?;
            emit(&ablation_table(&reports), None)
        }
        Command::Gen(a) => {
            let d = SyntheticParams::default();
            let p = SyntheticParams {
                level: a.level.unwrap_or(d.level),
                sigma: a.sigma.unwrap_or(d.sigma),
                a1: a.a1.unwrap_or(d.a1),
                a2: a.a2.unwrap_or(d.a2),
                amplitude: a.amplitude.unwrap_or(d.amplitude),
                period: a.period.unwrap_or(d.period),
                noise_ar: a.noise_ar.unwrap_or(d.noise_ar),
                ..d
            };
            let frame = gen_synthetic(a.kind, a.n, a.seed, &p).map_err(|e| Failure::Usage(e.to_string()))?;
            save_ohlcv_csv(&frame, &a.out).map_err(data)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
