//! Command-line front end for extreme-value regression.
//!
//! Subcommands:
//! - `fit`: maximum-likelihood estimates with standard errors;
//! - `test`: the five test statistics for a point null hypothesis;
//! - `ci`: a confidence interval from inverting one of the statistics;
//! - `simulate`: a Monte Carlo study driven by a JSON configuration.
//!
//! Exit codes: 0 success, 1 usage error, 2 model or data problem (bad
//! formula, unreadable file, malformed CSV cell, unknown parameter),
//! 3 numerical failure (singular information, fit non-convergence, aborted
//! simulation).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use evreg::estimate::Hypothesis;
use evreg::inference::{
    confidence_interval, fit_report, run_tests, ConfidenceInterval, FitSummary, StatKind,
    TestReport,
};
use evreg::model::ObservationSet;
use evreg::montecarlo::StudyOutput;
use evreg::{Error as CoreError, Family, Link, ModelConfig, ModelSpec, SimulationConfig};

#[derive(Parser)]
#[command(
    name = "evreg",
    version,
    about = "Extreme-value (Gumbel) regression: fitting, hypothesis tests, \
             confidence intervals, and Monte Carlo studies"
)]
struct Cli {
    /// Worker threads for simulation studies (0 = one per CPU). Results do
    /// not depend on this setting.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Emit machine-readable JSON instead of a plain-text report.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

/// Arguments shared by every subcommand that reads a dataset.
#[derive(Args)]
struct DataArgs {
    /// Model description (JSON).
    #[arg(long)]
    model: PathBuf,

    /// Dataset (CSV with a header row; every cell numeric).
    #[arg(long)]
    data: PathBuf,

    /// Name of the response column; all other columns become covariates.
    #[arg(long, default_value = "y")]
    response: String,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model by maximum likelihood.
    Fit {
        #[command(flatten)]
        data: DataArgs,
    },

    /// Test a point null hypothesis with all five statistics.
    Test {
        #[command(flatten)]
        data: DataArgs,

        /// Null restriction `name=value`; repeat for a joint hypothesis.
        #[arg(long = "null", value_name = "NAME=VALUE", required = true, value_parser = parse_pin)]
        null: Vec<(String, f64)>,

        /// Report max(w*, 0) when the adjustment overshoots below zero.
        #[arg(long)]
        clamp_wstar: bool,
    },

    /// Invert a statistic into a confidence interval for one parameter.
    Ci {
        #[command(flatten)]
        data: DataArgs,

        /// Parameter of interest.
        #[arg(long)]
        param: String,

        /// Statistic to invert: w, W, S_R, S_T, or w*
        /// (aliases: lr, wald, score, gradient, adjusted).
        #[arg(long, default_value = "w", value_parser = parse_kind)]
        kind: StatKind,

        /// Coverage level in (0, 1).
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },

    /// Run the Monte Carlo study described by a JSON configuration.
    Simulate {
        /// Study configuration (JSON).
        #[arg(long)]
        config: PathBuf,

        /// Override the configured replication count.
        #[arg(long)]
        reps: Option<usize>,

        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,

        /// Override the configured test levels (comma-separated).
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,

        /// Write `study.json` and `study.csv` into this directory instead
        /// of printing to stdout.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn parse_pin(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let name = name.trim();
    if name.is_empty() {
        return Err(format!("empty parameter name in `{s}`"));
    }
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("`{}` is not a number in `{s}`", value.trim()))?;
    Ok((name.to_string(), value))
}

fn parse_kind(s: &str) -> Result<StatKind, String> {
    StatKind::from_str(s).map_err(|e| e.to_string())
}

enum CliError {
    Core(CoreError),
    Io { path: PathBuf, source: std::io::Error },
    Json { path: PathBuf, source: serde_json::Error },
    Data(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Json { path, source } => {
                write!(f, "{}: invalid JSON: {source}", path.display())
            }
            CliError::Data(msg) => write!(f, "{msg}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Json { .. } | CliError::Data(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Parse { .. }
                | CoreError::UnknownIdentifier { .. }
                | CoreError::InvalidArgument(_)
                | CoreError::Dimension(_)
                | CoreError::Data(_)
                | CoreError::Degenerate(_) => 2,
                CoreError::Domain { .. }
                | CoreError::Singular(_)
                | CoreError::FitFailed { .. }
                | CoreError::Simulation(_) => 3,
            },
        }
    }
}

fn main() -> ExitCode {
    // Die quietly when a downstream reader closes the pipe (`evreg ... |
    // head`). Rust ignores SIGPIPE by default, which would turn the EPIPE
    // into a panic inside println!.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not failures.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let threads = cli.threads;
    let run = || dispatch(cli);
    let outcome = if threads > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(CliError::Data(format!("cannot build thread pool: {e}"))),
        }
    } else {
        run()
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit { data } => {
            let (model, obs) = load_model_and_data(&data)?;
            let (summary, warnings) = fit_report(&model, &obs)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            if cli.json {
                println!("{}", to_json(&summary)?);
            } else {
                print_model(&model, &obs);
                print_fit(&summary, true);
            }
            Ok(())
        }
        Command::Test {
            data,
            null,
            clamp_wstar,
        } => {
            let (model, obs) = load_model_and_data(&data)?;
            let pins: Vec<(&str, f64)> = null.iter().map(|(n, v)| (n.as_str(), *v)).collect();
            let hyp = Hypothesis::by_name(&model, &pins)?;
            let mut report = run_tests(&model, &obs, &hyp)?;
            if clamp_wstar {
                report.clamp_wstar();
            }
            if cli.json {
                println!("{}", to_json(&report)?);
            } else {
                print_model(&model, &obs);
                print_test(&report);
            }
            Ok(())
        }
        Command::Ci {
            data,
            param,
            kind,
            level,
        } => {
            let (model, obs) = load_model_and_data(&data)?;
            let ci = confidence_interval(&model, &obs, &param, kind, level)?;
            if cli.json {
                println!("{}", to_json(&ci)?);
            } else {
                print_ci(&ci);
            }
            Ok(())
        }
        Command::Simulate {
            config,
            reps,
            seed,
            levels,
            out_dir,
        } => {
            let mut cfg: SimulationConfig = read_json(&config)?;
            if let Some(r) = reps {
                cfg.replications = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(l) = levels {
                cfg.levels = l;
            }
            let output = evreg::montecarlo::run(&cfg)?;
            report_flags(&output);
            match out_dir {
                Some(dir) => {
                    fs::create_dir_all(&dir).map_err(|source| CliError::Io {
                        path: dir.clone(),
                        source,
                    })?;
                    let json_path = dir.join("study.json");
                    let csv_path = dir.join("study.csv");
                    write_file(&json_path, &to_json(&output)?)?;
                    write_file(&csv_path, &output.csv())?;
                    eprintln!("wrote {} and {}", json_path.display(), csv_path.display());
                }
                None if cli.json => println!("{}", to_json(&output)?),
                None => print!("{}", output.csv()),
            }
            Ok(())
        }
    }
}

// --- input handling ---

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("cannot serialize output: {e}")))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a strictly numeric CSV with a header row and splits off the
/// response column.
fn read_dataset(path: &Path, response: &str) -> Result<ObservationSet, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no header row",
            path.display()
        )));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = i + 1;
        let mut values = Vec::with_capacity(headers.len());
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: row {row}, column `{}`: cannot parse `{cell}` as a number",
                    path.display(),
                    headers.get(j).map(String::as_str).unwrap_or("?")
                ))
            })?;
            values.push(v);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no data rows",
            path.display()
        )));
    }

    let resp_idx = headers.iter().position(|h| h == response).ok_or_else(|| {
        CliError::Data(format!(
            "{}: response column `{response}` not found; available columns: {}",
            path.display(),
            headers.join(", ")
        ))
    })?;

    let y: Vec<f64> = rows.iter().map(|r| r[resp_idx]).collect();
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for (j, name) in headers.iter().enumerate() {
        if j == resp_idx {
            continue;
        }
        names.push(name.clone());
        columns.push(rows.iter().map(|r| r[j]).collect());
    }
    Ok(ObservationSet::new(y, names, columns)?)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn load_model_and_data(args: &DataArgs) -> Result<(ModelSpec, ObservationSet), CliError> {
    let config: ModelConfig = read_json(&args.model)?;
    let obs = read_dataset(&args.data, &args.response)?;
    let model = config.build(obs.names())?;
    Ok((model, obs))
}

// --- plain-text reports ---

fn link_name(link: Link) -> &'static str {
    match link {
        Link::Identity => "identity",
        Link::Log => "log",
    }
}

fn print_model(model: &ModelSpec, obs: &ObservationSet) {
    let family = match model.family {
        Family::EvMax => "maximum extreme value",
        Family::EvMin => "minimum extreme value",
    };
    println!("family:     {family}");
    println!(
        "location:   {}  [{} link]",
        model.location.print(),
        link_name(model.loc_link)
    );
    println!(
        "dispersion: {}  [{} link]",
        model.dispersion.print(),
        link_name(model.disp_link)
    );
    println!("data:       {} observations, {} parameters", obs.n(), model.p());
    println!();
}

fn print_fit(summary: &FitSummary, with_se: bool) {
    println!(
        "log-likelihood {:.6} ({} iterations)",
        summary.loglik, summary.iterations
    );
    let name_w = summary
        .parameters
        .iter()
        .map(|p| p.name.len())
        .max()
        .unwrap_or(4)
        .max(9);
    if with_se {
        println!("{:<name_w$}  {:>14}  {:>14}", "parameter", "estimate", "std. error");
        for p in &summary.parameters {
            match p.se {
                Some(se) => println!("{:<name_w$}  {:>14.6}  {:>14.6}", p.name, p.estimate, se),
                None => println!("{:<name_w$}  {:>14.6}  {:>14}", p.name, p.estimate, "-"),
            }
        }
    } else {
        println!("{:<name_w$}  {:>14}", "parameter", "estimate");
        for p in &summary.parameters {
            println!("{:<name_w$}  {:>14.6}", p.name, p.estimate);
        }
    }
}

fn print_test(report: &TestReport) {
    let null: Vec<String> = report
        .null
        .iter()
        .map(|p| format!("{} = {}", p.name, p.value))
        .collect();
    println!("null hypothesis: {}  (df = {})", null.join(", "), report.df);
    println!(
        "log-likelihood: unrestricted {:.6}, restricted {:.6}",
        report.unrestricted.loglik, report.restricted.loglik
    );
    println!();
    println!("{:<10}  {:>12}  {:>10}", "statistic", "value", "p-value");
    for s in &report.statistics {
        println!(
            "{:<10}  {:>12.4}  {:>10.4}",
            s.kind.label(),
            s.value,
            s.p_value
        );
    }
    let f = &report.flags;
    if f.near_zero_w {
        println!("note: likelihood ratio is numerically zero; w* reported as w");
    }
    if f.zeta_degenerate {
        println!("note: adjustment term was degenerate; w* reported as w");
    }
    if f.ill_conditioned {
        println!("note: ill-conditioned information matrix; treat w* with caution");
    }
    if f.clamped_wstar {
        println!("note: negative w* truncated at zero");
    }
    println!();
    println!("unrestricted fit:");
    print_fit(&report.unrestricted, true);
    println!();
    println!("restricted fit:");
    print_fit(&report.restricted, false);
}

fn print_ci(ci: &ConfidenceInterval) {
    println!(
        "{:.1}% interval for {} from inverting {}:",
        ci.level * 100.0,
        ci.parameter,
        ci.kind.label()
    );
    println!(
        "  estimate {:.6} (se {:.6})",
        ci.estimate, ci.se
    );
    let lo = if ci.lower_open {
        format!("({:.6}", ci.lower)
    } else {
        format!("[{:.6}", ci.lower)
    };
    let hi = if ci.upper_open {
        format!("{:.6})", ci.upper)
    } else {
        format!("{:.6}]", ci.upper)
    };
    println!("  interval {lo}, {hi}");
    if ci.lower_open || ci.upper_open {
        println!("  note: open endpoint(s): the statistic never crossed its critical value");
    }
    if ci.fit_failures > 0 {
        println!(
            "  note: {} restricted refit(s) failed during the search",
            ci.fit_failures
        );
    }
}

fn report_flags(output: &StudyOutput) {
    let f = output.flag_counts;
    if f.near_zero_w + f.zeta_degenerate + f.ill_conditioned > 0 {
        eprintln!(
            "numerical flags across replications: near-zero w {}, degenerate adjustment {}, \
             ill-conditioned {}",
            f.near_zero_w, f.zeta_degenerate, f.ill_conditioned
        );
    }
}
