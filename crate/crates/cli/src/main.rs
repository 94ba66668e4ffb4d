//! `srx` — build structured receiver chains, derive transmit patterns, run
//! exhaustive verifications and Monte Carlo link sweeps.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 verification
//! failure.

mod config;
mod report;

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use srx_core::{
    compare_par, derive_pattern, run_trials, ActiveChain, ActiveError, PassiveChain, Pol,
};

use config::{ExperimentConfig, SCHEMA_VERSION};
use report::{
    par_csv_row, results_csv_row, ChainVerification, SimulationJson, VerifyReport,
    PAR_CSV_HEADER, RESULTS_CSV_HEADER,
};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io { path: PathBuf, source: std::io::Error },
    Verification(String),
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Verification(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Verification(msg) => write!(f, "{msg}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "srx", version, about = "Structured optical receiver simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustively verify chain synthesis and pattern round trips
    Verify {
        /// Order or inclusive range of orders, e.g. `4` or `1..8`
        #[arg(long, value_parser = parse_m_range)]
        m: MRange,
        /// Maximum tolerated fraction of energy outside the predicted bin
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derive a transmit pattern and emit its interchange JSON
    Pattern {
        #[arg(long)]
        m: u32,
        /// Output-pulse polarization, H or V
        #[arg(long)]
        pol: Pol,
        /// Total pattern energy in photons
        #[arg(long, default_value_t = 1.0)]
        energy: f64,
        /// Write the pattern here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run Monte Carlo link sweeps from a config file
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's master seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's trials per point
        #[arg(long)]
        trials: Option<u64>,
        /// Write results CSV here (JSON mirror lands next to it)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Peak-to-average power table for the configured schemes
    ParTable {
        #[arg(long)]
        config: PathBuf,
        /// Evaluate all schemes over one common frame length
        #[arg(long)]
        frame_len: Option<u64>,
        /// Write the table here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy)]
struct MRange {
    lo: u32,
    hi: u32,
}

fn parse_m_range(s: &str) -> Result<MRange, String> {
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (
            a.parse::<u32>().map_err(|e| format!("bad range start {a:?}: {e}"))?,
            b.parse::<u32>().map_err(|e| format!("bad range end {b:?}: {e}"))?,
        ),
        None => {
            let m = s.parse::<u32>().map_err(|e| format!("bad order {s:?}: {e}"))?;
            (m, m)
        }
    };
    if lo == 0 || hi > 16 || lo > hi {
        return Err(format!("order range {lo}..{hi} outside 1..16"));
    }
    Ok(MRange { lo, hi })
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Verify { m, tolerance, out } => cmd_verify(m, tolerance, out.as_deref()),
        Command::Pattern { m, pol, energy, out } => cmd_pattern(m, pol, energy, out.as_deref()),
        Command::Simulate { config, seed, trials, out } => {
            cmd_simulate(&config, seed, trials, out.as_deref())
        }
        Command::ParTable { config, frame_len, out } => {
            cmd_par_table(&config, frame_len, out.as_deref())
        }
    }
}

fn write_artifact(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(path) => fs::write(path, contents).map_err(|e| CliError::io(path, e)),
        None => {
            println!("{contents}");
            Ok(())
        }
    }
}

fn cmd_verify(range: MRange, tolerance: f64, out: Option<&Path>) -> Result<(), CliError> {
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(CliError::config(format!("tolerance {tolerance} must be nonnegative")));
    }
    let mut chains = Vec::new();
    for m in range.lo..=range.hi {
        chains.push(verify_one_order(m, tolerance));
    }
    let passed = chains.iter().all(|c| c.passed);
    let report = VerifyReport { schema_version: SCHEMA_VERSION, tolerance, chains, passed };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    report::validate_verify_json(&json)
        .map_err(|e| CliError::config(format!("emitted report failed validation: {e}")))?;
    write_artifact(out, &json)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "verification failed for {} of {} chains",
            report.chains.iter().filter(|c| !c.passed).count(),
            report.chains.len()
        )))
    }
}

fn verify_one_order(m: u32, tolerance: f64) -> ChainVerification {
    let chain = match ActiveChain::synthesize(m) {
        Ok(chain) => chain,
        Err(err) => {
            return ChainVerification {
                m,
                modules: 0,
                position_offset: 0,
                active_max_leakage: None,
                passive_max_leakage: None,
                passed: false,
                error: Some(err.to_string()),
            }
        }
    };
    let modules = chain.modules().len();
    let position_offset = chain.position_offset();

    let (active_max_leakage, active_ok, mut error) = match chain.verify_concentration(tolerance) {
        Ok(report) => (Some(report.max_leakage), true, None),
        Err(ActiveError::ConcentrationFailure { max_leakage, .. }) => {
            (Some(max_leakage), false, Some("concentration failure".to_owned()))
        }
        Err(err) => (None, false, Some(err.to_string())),
    };

    let (passive_max_leakage, passive_ok) = match passive_roundtrip_leakage(m) {
        Ok(leak) => (Some(leak), leak <= tolerance),
        Err(err) => {
            error.get_or_insert(err);
            (None, false)
        }
    };

    ChainVerification {
        m,
        modules,
        position_offset,
        active_max_leakage,
        passive_max_leakage,
        passed: active_ok && passive_ok,
        error,
    }
}

/// Worst round-trip leakage of the derived patterns over both output
/// polarizations, including the equal-power check on the patterns.
fn passive_roundtrip_leakage(m: u32) -> Result<f64, String> {
    let chain = PassiveChain::new(m).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for pol in [Pol::H, Pol::V] {
        let sym = derive_pattern(m, pol, Complex64::ONE).map_err(|e| e.to_string())?;
        let per_bin = 1.0 / (1u64 << m) as f64;
        for (t, _) in sym.pattern.bins() {
            if (sym.pattern.bin_power(t) - per_bin).abs() > 1e-12 {
                return Err(format!("pattern bin {t} power deviates from {per_bin}"));
            }
        }
        let out = chain.propagate(&sym.pattern);
        let fraction = out.amp(sym.predicted_output_bin, pol).norm_sqr() / out.total_energy();
        worst = worst.max(1.0 - fraction);
    }
    Ok(worst)
}

fn cmd_pattern(m: u32, pol: Pol, energy: f64, out: Option<&Path>) -> Result<(), CliError> {
    if !(energy.is_finite() && energy > 0.0) {
        return Err(CliError::config(format!("energy {energy} must be positive")));
    }
    let sym = derive_pattern(m, pol, Complex64::new(energy.sqrt(), 0.0))
        .map_err(|e| CliError::config(e.to_string()))?;
    let json = sym.to_export_json();
    report::validate_pattern_json(&json)
        .map_err(|e| CliError::config(format!("emitted pattern failed validation: {e}")))?;
    write_artifact(out, &json)
}

fn cmd_simulate(
    config_path: &Path,
    seed: Option<u64>,
    trials: Option<u64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let config = ExperimentConfig::load(config_path)?;
    let master_seed = seed.unwrap_or(config.master_seed);
    let n_trials = trials.unwrap_or(config.n_trials);
    if n_trials == 0 {
        return Err(CliError::config("n_trials must be positive"));
    }
    let points = config.expand()?;

    let out_csv: Option<PathBuf> = out.map(Path::to_path_buf).or(config.out_csv);
    let out_json: Option<PathBuf> = match (out, config.out_json) {
        (Some(path), _) => Some(path.with_extension("json")),
        (None, from_config) => from_config,
    };

    // Stream rows so partial results survive an interrupted sweep.
    let mut csv_file = match &out_csv {
        Some(path) => {
            let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
            writeln!(f, "{RESULTS_CSV_HEADER}").map_err(|e| CliError::io(path, e))?;
            Some(f)
        }
        None => {
            println!("{RESULTS_CSV_HEADER}");
            None
        }
    };

    let mut rows = Vec::with_capacity(points.len());
    for point in &points {
        let report = run_trials(&point.cfg, n_trials, master_seed)
            .map_err(|e| CliError::config(e.to_string()))?;
        let row = results_csv_row(&report);
        match (&mut csv_file, &out_csv) {
            (Some(f), Some(path)) => {
                writeln!(f, "{row}").map_err(|e| CliError::io(path, e))?;
                f.flush().map_err(|e| CliError::io(path, e))?;
            }
            _ => println!("{row}"),
        }
        eprintln!(
            "{} m={} M={} N_s={} trials={}: erasure {:.5} ser {:.5} mi {:.4} bits",
            report.scheme,
            report.m.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
            report.ppm_order,
            report.n_s,
            report.n_trials,
            report.erasure_rate,
            report.symbol_error_rate,
            report.mi_bits_per_symbol,
        );
        rows.push(report);
    }
    drop(csv_file);

    if let Some(path) = &out_csv {
        let written = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        report::validate_results_csv(&written)
            .map_err(|e| CliError::config(format!("emitted CSV failed validation: {e}")))?;
    }

    if let Some(path) = &out_json {
        let doc = SimulationJson { schema_version: SCHEMA_VERSION, rows };
        let json = serde_json::to_string_pretty(&doc).expect("rows serialize");
        report::validate_simulation_json(&json)
            .map_err(|e| CliError::config(format!("emitted JSON failed validation: {e}")))?;
        fs::write(path, json).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

fn cmd_par_table(
    config_path: &Path,
    frame_len: Option<u64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if frame_len == Some(0) {
        return Err(CliError::config("frame length must be positive"));
    }
    let config = ExperimentConfig::load(config_path)?;
    let cfgs: Vec<_> = config
        .schemes
        .iter()
        .map(|block| block.resolve(None, None, None))
        .collect::<Result<_, _>>()?;
    let entries = compare_par(&cfgs, frame_len).map_err(|e| CliError::config(e.to_string()))?;
    let mut table = String::from(PAR_CSV_HEADER);
    for entry in &entries {
        table.push('\n');
        table.push_str(&par_csv_row(entry));
    }
    table.push('\n');
    report::validate_par_csv(&table)
        .map_err(|e| CliError::config(format!("emitted table failed validation: {e}")))?;
    match out {
        Some(path) => fs::write(path, &table).map_err(|e| CliError::io(path, e)),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}
