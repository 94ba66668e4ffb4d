//! Output artifacts and their schema validators.
//!
//! Results CSV: `scheme,m,M,N_s,n_trials,ser,erasure,invalid,mi_bits,pie,par,seed`,
//! one row per sweep point. Floats are serialized with 17 significant
//! digits so parsing the file back reproduces the bits. A JSON mirror holds
//! the same rows with standard errors included. Every artifact this tool
//! emits can be fed back through the matching `validate_*` function, and
//! the commands do exactly that after writing.

use serde::{Deserialize, Serialize};
use srx_core::{LinkReport, ParEntry};

pub const RESULTS_CSV_HEADER: &str =
    "scheme,m,M,N_s,n_trials,ser,erasure,invalid,mi_bits,pie,par,seed";

pub const PAR_CSV_HEADER: &str = "scheme,m,M,par,frame_len";

const SCHEME_LABELS: [&str; 3] = ["active_hadamard", "passive_pattern", "reference_ppm"];

/// 17 significant digits, enough to round-trip any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt_m(m: Option<u32>) -> String {
    m.map(|v| v.to_string()).unwrap_or_default()
}

pub fn results_csv_row(report: &LinkReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        report.scheme,
        fmt_opt_m(report.m),
        report.ppm_order,
        fmt_f64(report.n_s),
        report.n_trials,
        fmt_f64(report.symbol_error_rate),
        fmt_f64(report.erasure_rate),
        fmt_f64(report.invalid_rate),
        fmt_f64(report.mi_bits_per_symbol),
        fmt_f64(report.pie_bits_per_photon),
        fmt_f64(report.par),
        report.master_seed,
    )
}

pub fn par_csv_row(entry: &ParEntry) -> String {
    format!(
        "{},{},{},{},{}",
        entry.scheme,
        fmt_opt_m(entry.m),
        entry.ppm_order,
        fmt_f64(entry.par),
        entry.frame_len,
    )
}

/// JSON mirror of the results CSV, with standard errors.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationJson {
    pub schema_version: u32,
    pub rows: Vec<LinkReport>,
}

/// Per-chain outcome of `srx verify`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainVerification {
    pub m: u32,
    /// Number of receiver modules in the synthesized chain.
    pub modules: usize,
    pub position_offset: i64,
    /// Worst energy fraction outside the predicted bin over all codewords;
    /// absent when verification aborted before measuring it.
    pub active_max_leakage: Option<f64>,
    /// Worst round-trip leakage of the derived patterns, both output
    /// polarizations.
    pub passive_max_leakage: Option<f64>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub tolerance: f64,
    pub chains: Vec<ChainVerification>,
    pub passed: bool,
}

/// Mirror of the pattern interchange format, used to validate emitted
/// pattern files.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternFile {
    pub m: u32,
    pub output_pol: String,
    pub bins: Vec<PatternFileBin>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternFileBin {
    pub t: i64,
    pub pol: String,
    pub re: f64,
    pub im: f64,
}

pub fn validate_results_csv(text: &str) -> Result<usize, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty results file")?;
    if header != RESULTS_CSV_HEADER {
        return Err(format!("bad header: {header}"));
    }
    let mut rows = 0;
    for (idx, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(format!("row {idx}: expected 12 fields, got {}", fields.len()));
        }
        if !SCHEME_LABELS.contains(&fields[0]) {
            return Err(format!("row {idx}: unknown scheme {}", fields[0]));
        }
        if !fields[1].is_empty() {
            fields[1].parse::<u32>().map_err(|e| format!("row {idx} m: {e}"))?;
        }
        fields[2].parse::<u32>().map_err(|e| format!("row {idx} M: {e}"))?;
        fields[4].parse::<u64>().map_err(|e| format!("row {idx} n_trials: {e}"))?;
        fields[11].parse::<u64>().map_err(|e| format!("row {idx} seed: {e}"))?;
        for (name, value) in [
            ("N_s", fields[3]),
            ("ser", fields[5]),
            ("erasure", fields[6]),
            ("invalid", fields[7]),
            ("mi_bits", fields[8]),
            ("pie", fields[9]),
            ("par", fields[10]),
        ] {
            let parsed: f64 = value.parse().map_err(|e| format!("row {idx} {name}: {e}"))?;
            if !parsed.is_finite() {
                return Err(format!("row {idx} {name}: not finite"));
            }
        }
        for (name, value) in [("ser", fields[5]), ("erasure", fields[6]), ("invalid", fields[7])] {
            let rate: f64 = value.parse().unwrap();
            if !(0.0..=1.0).contains(&rate) {
                return Err(format!("row {idx} {name}: rate {rate} outside [0, 1]"));
            }
        }
        rows += 1;
    }
    Ok(rows)
}

pub fn validate_par_csv(text: &str) -> Result<usize, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty table")?;
    if header != PAR_CSV_HEADER {
        return Err(format!("bad header: {header}"));
    }
    let mut rows = 0;
    for (idx, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(format!("row {idx}: expected 5 fields, got {}", fields.len()));
        }
        if !SCHEME_LABELS.contains(&fields[0]) {
            return Err(format!("row {idx}: unknown scheme {}", fields[0]));
        }
        if !fields[1].is_empty() {
            fields[1].parse::<u32>().map_err(|e| format!("row {idx} m: {e}"))?;
        }
        fields[2].parse::<u32>().map_err(|e| format!("row {idx} M: {e}"))?;
        let par: f64 = fields[3].parse().map_err(|e| format!("row {idx} par: {e}"))?;
        if !par.is_finite() || par < 0.0 {
            return Err(format!("row {idx} par: bad value {par}"));
        }
        fields[4].parse::<u64>().map_err(|e| format!("row {idx} frame_len: {e}"))?;
        rows += 1;
    }
    Ok(rows)
}

pub fn validate_simulation_json(text: &str) -> Result<usize, String> {
    let doc: SimulationJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if doc.schema_version != crate::config::SCHEMA_VERSION {
        return Err(format!("unsupported schema_version {}", doc.schema_version));
    }
    Ok(doc.rows.len())
}

pub fn validate_verify_json(text: &str) -> Result<usize, String> {
    let doc: VerifyReport = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if doc.schema_version != crate::config::SCHEMA_VERSION {
        return Err(format!("unsupported schema_version {}", doc.schema_version));
    }
    Ok(doc.chains.len())
}

pub fn validate_pattern_json(text: &str) -> Result<usize, String> {
    let doc: PatternFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if doc.bins.len() as u64 != 1u64 << doc.m {
        return Err(format!("expected {} bins for m={}, got {}", 1u64 << doc.m, doc.m, doc.bins.len()));
    }
    let mut last_t = i64::MIN;
    for (idx, bin) in doc.bins.iter().enumerate() {
        if bin.pol != "H" && bin.pol != "V" {
            return Err(format!("bin {idx}: bad polarization {}", bin.pol));
        }
        if !bin.re.is_finite() || !bin.im.is_finite() {
            return Err(format!("bin {idx}: non-finite amplitude"));
        }
        if bin.t <= last_t {
            return Err(format!("bin {idx}: bins not sorted by t"));
        }
        last_t = bin.t;
    }
    if doc.output_pol != "H" && doc.output_pol != "V" {
        return Err(format!("bad output_pol {}", doc.output_pol));
    }
    Ok(doc.bins.len())
}
