mod dp;
mod table;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use esn2::{
    density_esn2, det_scan, expected_info, fit_mle, loglik, moments_esn2, observed_info, run_validation_suite, score,
    standard_errors, Dataset, DpParams, Esn2Error, FitControls, InfoKind, InfoMatrix, RngSeed, SuiteConfig, SuiteLevel,
    SweepParam, SweepSpec,
};
use serde_json::{json, Value};

use dp::{CubatureArgs, DpArgs};
use table::{csv_rows, fmt_num, read_dataset};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_FIT_FAILED: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }
}

/// Bivariate extended skew-normal likelihood, information matrices and diagnostics.
#[derive(Debug, Parser)]
#[command(name = "esn2", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one quantity at a parameter point
    Eval(EvalArgs),
    /// Determinant and smallest eigenvalue of the expected information along a grid
    DetScan(DetScanArgs),
    /// Maximum likelihood fit with expected-information standard errors
    Fit(FitArgs),
    /// Run the validation suite
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Quantity {
    Density,
    Loglik,
    Score,
    Oinfo,
    Einfo,
    Moments,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, clap::Args)]
struct EvalArgs {
    #[arg(value_enum)]
    quantity: Quantity,
    #[command(flatten)]
    dp: DpArgs,
    /// Two-column CSV of (y1, y2) observations
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    cubature: CubatureArgs,
}

#[derive(Debug, clap::Args)]
struct DetScanArgs {
    #[arg(long)]
    sweep: String,
    #[arg(long, allow_hyphen_values = true)]
    from: f64,
    #[arg(long, allow_hyphen_values = true)]
    to: f64,
    #[arg(long)]
    points: usize,
    #[command(flatten)]
    dp: DpArgs,
    /// Output file; standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    cubature: CubatureArgs,
}

#[derive(Debug, clap::Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Starting point; components left out start from sample moments
    #[command(flatten)]
    init: DpArgs,
    #[arg(long, default_value_t = FitControls::default().grad_tol)]
    grad_tol: f64,
    #[arg(long, default_value_t = FitControls::default().max_iter)]
    max_iter: usize,
    #[command(flatten)]
    cubature: CubatureArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Level {
    Fast,
    Full,
}

#[derive(Debug, clap::Args)]
struct CheckArgs {
    #[arg(long, value_enum, default_value_t = Level::Fast)]
    level: Level,
    #[arg(long)]
    seed: Option<u64>,
    /// Append a JSON summary after the text report
    #[arg(long)]
    json: bool,
    /// Adds this amount to the (alpha1, alpha2) expected-information entry
    #[arg(long, hide = true, allow_hyphen_values = true)]
    perturb_i67: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Eval(args) => cmd_eval(args),
        Command::DetScan(args) => cmd_det_scan(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Check(args) => cmd_check(args),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ESN2_THREADS") else { return Ok(()) };
    let threads: usize =
        raw.trim().parse().map_err(|_| CliError::usage(format!("ESN2_THREADS must be a count, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot configure threads: {e}")))
}

fn library(e: Esn2Error) -> CliError {
    CliError::usage(e.to_string())
}

fn print(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|()| out.flush())
        .map_err(|e| CliError { code: 1, message: format!("cannot write output: {e}") })
}

fn print_json(value: &Value) -> Result<(), CliError> {
    print(&format!("{}\n", serde_json::to_string_pretty(value).expect("json values serialize")))
}

fn require_data(quantity: Quantity, path: &Option<PathBuf>) -> Result<Dataset, CliError> {
    let path = path.as_ref().ok_or_else(|| {
        CliError::usage(format!("--data is required for eval {}", quantity.to_possible_value().unwrap().get_name()))
    })?;
    read_dataset(path)
}

fn matrix_rows(m: &InfoMatrix) -> Vec<&[f64]> {
    m.data.iter().map(|r| r.as_slice()).collect()
}

fn cmd_eval(args: EvalArgs) -> Result<u8, CliError> {
    let dp = args.dp.resolve()?;
    let name = args.quantity.to_possible_value().unwrap().get_name().to_string();
    let mut code = 0;
    let (payload, csv) = match args.quantity {
        Quantity::Density => {
            let data = require_data(args.quantity, &args.data)?;
            let values = data.iter().map(|(y1, y2)| density_esn2(y1, y2, dp)).collect::<Result<Vec<_>, _>>();
            let values = values.map_err(library)?;
            let csv = values.iter().map(|&v| format!("{}\n", fmt_num(v))).collect();
            (json!({ "value": values }), csv)
        }
        Quantity::Loglik => {
            let data = require_data(args.quantity, &args.data)?;
            let v = loglik(dp, &data).map_err(library)?;
            (json!({ "n": data.len(), "value": v }), format!("{}\n", fmt_num(v)))
        }
        Quantity::Score => {
            let data = require_data(args.quantity, &args.data)?;
            let s = score(dp, &data).map_err(library)?.as_array();
            (json!({ "n": data.len(), "value": s }), csv_rows([s.as_slice()]))
        }
        Quantity::Oinfo => {
            let data = require_data(args.quantity, &args.data)?;
            let m = observed_info(dp, &data).map_err(library)?;
            (json!({ "n": data.len(), "value": m.data }), csv_rows(matrix_rows(&m)))
        }
        Quantity::Einfo => {
            let info = expected_info(dp, args.cubature.controls()?).map_err(library)?;
            if !info.converged {
                eprintln!("warning: expected information did not converge within the evaluation budget");
                code = EXIT_NOT_CONVERGED;
            }
            (json!({ "converged": info.converged, "value": info.matrix.data }), csv_rows(matrix_rows(&info.matrix)))
        }
        Quantity::Moments => {
            let m = moments_esn2(dp).map_err(library)?;
            let csv = csv_rows([m.mean.as_slice(), m.cov[0].as_slice(), m.cov[1].as_slice()]);
            (json!({ "mean": m.mean, "cov": m.cov }), csv)
        }
    };
    match args.format {
        Format::Json => {
            let mut obj = json!({ "quantity": name, "dp": dp.to_array() });
            obj.as_object_mut().unwrap().extend(payload.as_object().unwrap().clone());
            print_json(&obj)?;
        }
        Format::Csv => print(&csv)?,
    }
    Ok(code)
}

fn cmd_det_scan(args: DetScanArgs) -> Result<u8, CliError> {
    let param: SweepParam = args.sweep.parse().map_err(library)?;
    if !args.from.is_finite() || !args.to.is_finite() {
        return Err(CliError::usage("--from and --to must be finite"));
    }
    // the swept component need not be given; it is overwritten by the grid
    let base = args.dp.resolve_with(|k| (k == param.index()).then_some(args.from))?;
    let spec = SweepSpec::linspace(param, args.from, args.to, args.points, base).map_err(library)?;
    let rows = det_scan(&spec, args.cubature.controls()?).map_err(library)?;

    let mut out = String::from("param,value,det,min_eig,converged\n");
    for r in &rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            param.name(),
            fmt_num(r.param_value),
            fmt_num(r.det),
            fmt_num(r.min_eigenvalue),
            r.converged
        ));
    }
    match &args.out {
        Some(path) => write_file(path, &out)?,
        None => print(&out)?,
    }
    Ok(0)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError { code: 1, message: format!("cannot write {}: {e}", path.display()) })
}

/// Moment-based start: sample mean and ML covariance, with a mild shape in the direction of any
/// significant sample skewness. Without one the start is the normal fit (α = 0, τ = 0), which is
/// a stationary point of the likelihood.
fn moment_start(data: &Dataset) -> [f64; 8] {
    let n = data.len() as f64;
    let mean = |y: &[f64]| y.iter().sum::<f64>() / n;
    let (m1, m2) = (mean(data.y1()), mean(data.y2()));
    let central = |f: &dyn Fn(f64, f64) -> f64| data.iter().map(|(a, b)| f(a - m1, b - m2)).sum::<f64>() / n;
    let v1 = central(&|a, _| a * a).max(1e-12);
    let v2 = central(&|_, b| b * b).max(1e-12);
    let c12 = central(&|a, b| a * b).clamp(-0.9 * (v1 * v2).sqrt(), 0.9 * (v1 * v2).sqrt());
    let skew1 = central(&|a, _| a * a * a) / v1.powf(1.5);
    let skew2 = central(&|_, b| b * b * b) / v2.powf(1.5);
    // two standard errors of the sample skewness under normality
    let noise = 2.0 * (6.0 / n).sqrt();
    let shape = |s: f64| if s.is_finite() && s.abs() > noise { 0.5 * s.signum() } else { 0.0 };
    [m1, m2, v1, c12, v2, shape(skew1), shape(skew2), 0.0]
}

fn cmd_fit(args: FitArgs) -> Result<u8, CliError> {
    let data = read_dataset(&args.data)?;
    let start = moment_start(&data);
    let init = args.init.resolve_with(|k| Some(start[k]))?;
    let controls = FitControls { grad_tol: args.grad_tol, max_iter: args.max_iter };
    let tol = args.cubature.controls()?;
    let fit = fit_mle(&data, init, controls).map_err(library)?;

    let mut warnings = Vec::new();
    let std_errors = match expected_info(fit.dp_hat, tol) {
        Ok(info) => {
            if !info.converged {
                warnings.push("expected information did not converge; standard errors may be inaccurate".to_string());
            }
            let se = standard_errors(&info.matrix, data.len());
            if se.is_none() {
                warnings.push("expected information is singular at the estimate; standard errors unavailable".into());
            }
            se
        }
        Err(e) => {
            warnings.push(format!("expected information unavailable: {e}"));
            None
        }
    };
    if !fit.converged {
        warnings.push(format!("optimizer did not converge after {} iterations", fit.iterations));
    }
    let mut obj = json!({
        "dp_hat": fit.dp_hat.to_array(),
        "std_errors": std_errors,
        "loglik": fit.loglik,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "score_norm": fit.final_score_norm,
        "n": data.len(),
    });
    if !warnings.is_empty() {
        obj["warning"] = json!(warnings.join("; "));
    }
    print_json(&obj)?;
    Ok(if fit.converged { 0 } else { EXIT_FIT_FAILED })
}

fn cmd_check(args: CheckArgs) -> Result<u8, CliError> {
    let level = match args.level {
        Level::Fast => SuiteLevel::Fast,
        Level::Full => SuiteLevel::Full,
    };
    let mut config = SuiteConfig::new(level);
    if let Some(seed) = args.seed {
        config.seed = RngSeed(seed);
    }
    if let Some(delta) = args.perturb_i67 {
        if !delta.is_finite() {
            return Err(CliError::usage("--perturb-i67 must be finite"));
        }
        config.expected_info = Arc::new(move |dp: DpParams, tol| {
            let mut info = expected_info(dp, tol)?;
            let mut rows = info.matrix.data;
            rows[5][6] += delta;
            info.matrix = InfoMatrix::from_upper(InfoKind::Expected, rows);
            Ok(info)
        });
    }
    let report = run_validation_suite(&config);
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    let mut text = report.render();
    text.push_str(&format!("{} checks, {} failed\n", report.checks.len(), failed));
    print(&text)?;
    if args.json {
        print_json(&serde_json::to_value(&report).expect("report serializes"))?;
    }
    Ok(if report.all_passed() { 0 } else { EXIT_CHECK_FAILED })
}
