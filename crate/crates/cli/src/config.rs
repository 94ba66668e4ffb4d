//! Experiment configuration file: schema, validation and sweep expansion.
//!
//! Configs are JSON with an explicit `schema_version`; unknown keys are
//! rejected so stale field names fail loudly. Command-line flags override
//! file values. A sweep expands into the cartesian product of its axes, in
//! the fixed order schemes, then m, then N_s, then sigma, so output rows
//! are reproducible.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use srx_core::{ChannelParams, DetectorMode, FrameConfig, SchemeConfig, SchemeSpec};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub master_seed: u64,
    pub n_trials: u64,
    pub schemes: Vec<SchemeBlock>,
    #[serde(default)]
    pub sweep: Option<SweepAxes>,
    #[serde(default)]
    pub out_csv: Option<PathBuf>,
    #[serde(default)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeBlock {
    pub scheme: SchemeKind,
    #[serde(default)]
    pub m: Option<u32>,
    #[serde(default)]
    pub ppm_order: Option<u32>,
    pub n_s: f64,
    #[serde(default)]
    pub frame: Option<FrameConfig>,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default = "default_detector")]
    pub detector: DetectorMode,
}

fn default_detector() -> DetectorMode {
    DetectorMode::PerBin
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    ActiveHadamard,
    PassivePattern,
    ReferencePpm,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default)]
    pub n_s: Option<Vec<f64>>,
    #[serde(default)]
    pub m: Option<Vec<u32>>,
    #[serde(default)]
    pub sigma: Option<Vec<f64>>,
}

/// One resolved simulation point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub cfg: SchemeConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(path, e))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "{}: unsupported schema_version {} (expected {SCHEMA_VERSION})",
                path.display(),
                config.schema_version
            )));
        }
        if config.schemes.is_empty() {
            return Err(CliError::config(format!(
                "{}: at least one scheme block is required",
                path.display()
            )));
        }
        Ok(config)
    }

    /// Expand the sweep into concrete scheme configurations. Every point is
    /// validated before any trial runs.
    pub fn expand(&self) -> Result<Vec<SweepPoint>, CliError> {
        let sweep = self.sweep.clone().unwrap_or_default();
        let m_axis: Vec<Option<u32>> = match &sweep.m {
            Some(values) if !values.is_empty() => values.iter().map(|&m| Some(m)).collect(),
            _ => vec![None],
        };
        let n_s_axis: Vec<Option<f64>> = match &sweep.n_s {
            Some(values) if !values.is_empty() => values.iter().map(|&v| Some(v)).collect(),
            _ => vec![None],
        };
        let sigma_axis: Vec<Option<f64>> = match &sweep.sigma {
            Some(values) if !values.is_empty() => values.iter().map(|&v| Some(v)).collect(),
            _ => vec![None],
        };

        let mut points = Vec::new();
        for block in &self.schemes {
            for &m in &m_axis {
                for &n_s in &n_s_axis {
                    for &sigma in &sigma_axis {
                        points.push(SweepPoint { cfg: block.resolve(m, n_s, sigma)? });
                    }
                }
            }
        }
        Ok(points)
    }
}

impl SchemeBlock {
    /// Resolve one sweep point, applying axis overrides. An `m` override
    /// retargets reference PPM to order `2^m` so the baseline stays
    /// comparable with the structured schemes.
    pub fn resolve(
        &self,
        m_override: Option<u32>,
        n_s_override: Option<f64>,
        sigma_override: Option<f64>,
    ) -> Result<SchemeConfig, CliError> {
        let m = m_override.or(self.m);
        let spec = match self.scheme {
            SchemeKind::ActiveHadamard => {
                let m = m.ok_or_else(|| CliError::config("active_hadamard requires m"))?;
                if let Some(order) = self.ppm_order {
                    if u64::from(order) != 1u64 << m {
                        return Err(CliError::config(format!(
                            "active_hadamard with m={m} implies ppm_order {}, config says {order}",
                            1u64 << m
                        )));
                    }
                }
                SchemeSpec::ActiveHadamard { m }
            }
            SchemeKind::PassivePattern => {
                let m = m.ok_or_else(|| CliError::config("passive_pattern requires m"))?;
                let frame = match (&self.frame, self.ppm_order) {
                    (Some(frame), order) => {
                        if let Some(order) = order {
                            if order != frame.ppm_order {
                                return Err(CliError::config(format!(
                                    "frame.ppm_order {} conflicts with ppm_order {order}",
                                    frame.ppm_order
                                )));
                            }
                        }
                        *frame
                    }
                    (None, Some(order)) => FrameConfig::default_for(m, order),
                    (None, None) => {
                        return Err(CliError::config(
                            "passive_pattern requires frame or ppm_order",
                        ))
                    }
                };
                SchemeSpec::PassivePattern { m, frame }
            }
            SchemeKind::ReferencePpm => {
                let order = match m_override {
                    Some(m) => 1u32 << m,
                    None => self
                        .ppm_order
                        .ok_or_else(|| CliError::config("reference_ppm requires ppm_order"))?,
                };
                SchemeSpec::ReferencePpm { order }
            }
        };

        let mut channel = self.channel.clone();
        if let Some(sigma) = sigma_override {
            channel.phase_noise_sigma = sigma;
        }
        let cfg = SchemeConfig {
            spec,
            n_s: n_s_override.unwrap_or(self.n_s),
            channel,
            detector: self.detector,
        };
        // Fail chain construction problems (guard too short, phase error
        // counts) here rather than inside trial 0.
        srx_core::validate_scheme(&cfg).map_err(|e| CliError::config(e.to_string()))?;
        Ok(cfg)
    }
}
