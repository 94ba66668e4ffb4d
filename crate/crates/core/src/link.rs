//! End-to-end link simulation and analytic baselines.
//!
//! A trial draws a uniform input symbol, builds the transmitted field,
//! passes it through the channel and the configured receiver, detects
//! photocounts and decodes a PPM outcome. Trials use counter-based random
//! streams derived from `(master_seed, trial_index)`, so results are
//! identical under any parallel schedule. Reports carry the empirical
//! rates, the plug-in mutual information over the output alphabet
//! `{symbols} + {erasure, invalid}`, the photon information efficiency and
//! the transmitted peak-to-average ratio.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::active::{ActiveChain, ActiveError};
use crate::channel::{
    apply_channel, decode, detect, BinWindow, ChannelError, ChannelParams, DecodeOutcome, DetCell,
    DetectorMode, PositionMap,
};
use crate::field::{FieldState, Pol};
use crate::hadamard::{encode_bpsk, BpskAmplitude, Codeword, CodecError};
use crate::passive::{build_symbol_alphabet, peak_to_average, FrameConfig, PassiveChain, PassiveError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinkError {
    #[error(transparent)]
    Active(#[from] ActiveError),
    #[error(transparent)]
    Passive(#[from] PassiveError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("at least one trial is required")]
    ZeroTrials,
    #[error("mean photon number {0} must be finite and nonnegative")]
    BadPhotonNumber(f64),
    #[error("cannot deliver {n_s} photons per symbol through a channel with zero transmissivity")]
    EnergyInfeasible { n_s: f64 },
    #[error("polarization doubling requires the polarization-resolving detector mode")]
    DoublingNeedsPolarizationDetector,
    #[error("PPM order must be at least 2, got {0}")]
    PpmOrderTooSmall(u32),
    #[error("joint count tables have different shapes")]
    ShapeMismatch,
}

/// Which transmitter/receiver pair the link runs.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeSpec {
    /// BPSK Hadamard codewords of length `2^m` through the active chain.
    ActiveHadamard { m: u32 },
    /// Phase-polarization patterns through the passive chain, framed as an
    /// M-ary (optionally polarization-doubled) PPM alphabet.
    PassivePattern { m: u32, frame: FrameConfig },
    /// Ideal M-ary PPM with direct detection; the baseline the structured
    /// schemes are measured against.
    ReferencePpm { order: u32 },
}

impl SchemeSpec {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeSpec::ActiveHadamard { .. } => "active_hadamard",
            SchemeSpec::PassivePattern { .. } => "passive_pattern",
            SchemeSpec::ReferencePpm { .. } => "reference_ppm",
        }
    }

    pub fn m(&self) -> Option<u32> {
        match self {
            SchemeSpec::ActiveHadamard { m } | SchemeSpec::PassivePattern { m, .. } => Some(*m),
            SchemeSpec::ReferencePpm { .. } => None,
        }
    }

    /// The PPM order M of the equivalent format.
    pub fn ppm_order(&self) -> u32 {
        match self {
            SchemeSpec::ActiveHadamard { m } => 1u32 << m,
            SchemeSpec::PassivePattern { frame, .. } => frame.ppm_order,
            SchemeSpec::ReferencePpm { order } => *order,
        }
    }
}

/// Full configuration of one simulated link.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub spec: SchemeSpec,
    /// Mean detected photons per symbol: `transmissivity * transmitted
    /// energy per symbol`.
    pub n_s: f64,
    pub channel: ChannelParams,
    pub detector: DetectorMode,
}

impl SchemeConfig {
    pub fn ideal(spec: SchemeSpec, n_s: f64) -> Self {
        SchemeConfig { spec, n_s, channel: ChannelParams::ideal(), detector: DetectorMode::PerBin }
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        self.channel.validate()?;
        if !self.n_s.is_finite() || self.n_s < 0.0 {
            return Err(LinkError::BadPhotonNumber(self.n_s));
        }
        if self.n_s > 0.0 && self.channel.transmissivity == 0.0 {
            return Err(LinkError::EnergyInfeasible { n_s: self.n_s });
        }
        Ok(())
    }

    /// Frame length used for this scheme's own peak-to-average figure.
    pub fn natural_frame_len(&self) -> u64 {
        match &self.spec {
            SchemeSpec::ActiveHadamard { m } => 1u64 << m,
            SchemeSpec::PassivePattern { frame, .. } => frame.frame_len(),
            SchemeSpec::ReferencePpm { order } => *order as u64,
        }
    }
}

/// Empirical joint counts of (input symbol, output letter). Output letters
/// are the symbol indices followed by erasure and invalid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JointCounts {
    n_inputs: usize,
    counts: Vec<u64>,
}

impl JointCounts {
    fn new(n_inputs: usize) -> Self {
        JointCounts { n_inputs, counts: vec![0; n_inputs * (n_inputs + 2)] }
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_letters(&self) -> usize {
        self.n_inputs + 2
    }

    pub fn count(&self, input: usize, letter: usize) -> u64 {
        self.counts[input * self.n_letters() + letter]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }

    fn add(&mut self, input: usize, letter: usize) {
        let letters = self.n_letters();
        self.counts[input * letters + letter] += 1;
    }

    fn merge(mut self, other: JointCounts) -> JointCounts {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self
    }

    /// Plug-in (maximum likelihood) mutual information in bits.
    pub fn plugin_mi_bits(&self) -> f64 {
        let n = self.total() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let letters = self.n_letters();
        let mut row = vec![0u64; self.n_inputs];
        let mut col = vec![0u64; letters];
        for (x, r) in row.iter_mut().enumerate() {
            for (y, c) in col.iter_mut().enumerate() {
                let count = self.count(x, y);
                *r += count;
                *c += count;
            }
        }
        let mut mi = 0.0;
        for (x, &row_total) in row.iter().enumerate() {
            for (y, &col_total) in col.iter().enumerate() {
                let count = self.count(x, y);
                if count > 0 {
                    let p_xy = count as f64 / n;
                    let p_x = row_total as f64 / n;
                    let p_y = col_total as f64 / n;
                    mi += p_xy * (p_xy / (p_x * p_y)).log2();
                }
            }
        }
        mi
    }
}

/// Monte Carlo link estimates for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub scheme: String,
    pub m: Option<u32>,
    pub ppm_order: u32,
    pub n_s: f64,
    pub n_trials: u64,
    pub symbol_error_rate: f64,
    pub erasure_rate: f64,
    pub invalid_rate: f64,
    pub correct_rate: f64,
    pub mi_bits_per_symbol: f64,
    pub pie_bits_per_photon: f64,
    pub par: f64,
    pub se_symbol_error: f64,
    pub se_erasure: f64,
    pub se_invalid: f64,
    pub master_seed: u64,
    #[serde(skip)]
    pub joint_counts: JointCounts,
}

enum ReceiverKind {
    Active(ActiveChain),
    Passive(PassiveChain),
    Direct,
}

impl ReceiverKind {
    fn apply(&self, state: &FieldState) -> FieldState {
        match self {
            ReceiverKind::Active(chain) => chain.apply(state),
            ReceiverKind::Passive(chain) => chain.propagate(state),
            ReceiverKind::Direct => state.clone(),
        }
    }
}

struct TrialEngine {
    tx_fields: Vec<FieldState>,
    receiver: ReceiverKind,
    window: BinWindow,
    position_map: PositionMap,
    n_symbols: usize,
}

impl TrialEngine {
    fn build(cfg: &SchemeConfig) -> Result<Self, LinkError> {
        let eta = cfg.channel.transmissivity;
        let tx_energy = if cfg.n_s == 0.0 { 0.0 } else { cfg.n_s / eta };
        match &cfg.spec {
            SchemeSpec::ActiveHadamard { m } => {
                let mut chain = ActiveChain::synthesize(*m)?;
                if !cfg.channel.delay_phase_errors.is_empty() {
                    chain.set_delay_phase_errors(&cfg.channel.delay_phase_errors)?;
                }
                let k = 1usize << m;
                let alpha = BpskAmplitude::from_mean_photons(tx_energy / k as f64);
                let mut tx_fields = Vec::with_capacity(k);
                for bits in 0..k as u32 {
                    tx_fields.push(encode_bpsk(&Codeword::new(*m, bits)?, alpha));
                }
                let offset = chain.position_offset();
                let window = BinWindow::new(offset, 1u64 << m);
                let position_map = match cfg.detector {
                    DetectorMode::PerBin => PositionMap::new(
                        (0..k).map(|j| (DetCell::bin(offset + j as i64), j)),
                    )?,
                    DetectorMode::PerBinPol => {
                        // The output pulse polarization per codeword is an
                        // emergent property of the chain; read it off an
                        // ideal propagation.
                        let ideal = ActiveChain::synthesize(*m)?;
                        let mut entries = Vec::with_capacity(k);
                        for bits in 0..k as u32 {
                            let out = ideal
                                .propagate(&Codeword::new(*m, bits)?, BpskAmplitude::from_mean_photons(1.0))?;
                            let bin = ideal.predicted_bin(bits);
                            let pol = if out.amp(bin, Pol::H).norm_sqr()
                                >= out.amp(bin, Pol::V).norm_sqr()
                            {
                                Pol::H
                            } else {
                                Pol::V
                            };
                            entries.push((DetCell::bin_pol(bin, pol), bits as usize));
                        }
                        PositionMap::new(entries)?
                    }
                };
                Ok(TrialEngine {
                    tx_fields,
                    receiver: ReceiverKind::Active(chain),
                    window,
                    position_map,
                    n_symbols: k,
                })
            }
            SchemeSpec::PassivePattern { m, frame } => {
                if frame.polarization_doubling && cfg.detector == DetectorMode::PerBin {
                    return Err(LinkError::DoublingNeedsPolarizationDetector);
                }
                let mut chain = PassiveChain::new(*m)?;
                if !cfg.channel.delay_phase_errors.is_empty() {
                    chain.set_delay_phase_errors(&cfg.channel.delay_phase_errors)?;
                }
                let alpha_total = Complex64::new(tx_energy.sqrt(), 0.0);
                let alphabet = build_symbol_alphabet(*m, frame, alpha_total)?;
                let base_bin = alphabet[0].predicted_output_bin;
                let window = BinWindow::new(base_bin, frame.ppm_order as u64);
                let entries = alphabet.iter().enumerate().map(|(idx, sym)| {
                    let cell = match cfg.detector {
                        DetectorMode::PerBin => DetCell::bin(sym.predicted_output_bin),
                        DetectorMode::PerBinPol => {
                            DetCell::bin_pol(sym.predicted_output_bin, sym.output_pol)
                        }
                    };
                    (cell, idx)
                });
                let position_map = PositionMap::new(entries)?;
                let n_symbols = alphabet.len();
                Ok(TrialEngine {
                    tx_fields: alphabet.into_iter().map(|s| s.pattern).collect(),
                    receiver: ReceiverKind::Passive(chain),
                    window,
                    position_map,
                    n_symbols,
                })
            }
            SchemeSpec::ReferencePpm { order } => {
                if *order < 2 {
                    return Err(LinkError::PpmOrderTooSmall(*order));
                }
                let k = *order as usize;
                let amp = Complex64::new(tx_energy.sqrt(), 0.0);
                let tx_fields = (0..k)
                    .map(|j| FieldState::single_pulse(j as i64, Pol::V, amp))
                    .collect();
                let window = BinWindow::new(0, *order as u64);
                let position_map = match cfg.detector {
                    DetectorMode::PerBin => {
                        PositionMap::new((0..k).map(|j| (DetCell::bin(j as i64), j)))?
                    }
                    DetectorMode::PerBinPol => PositionMap::new(
                        (0..k).map(|j| (DetCell::bin_pol(j as i64, Pol::V), j)),
                    )?,
                };
                Ok(TrialEngine {
                    tx_fields,
                    receiver: ReceiverKind::Direct,
                    window,
                    position_map,
                    n_symbols: k,
                })
            }
        }
    }

    /// One full trial on its own counter-derived stream. Returns the input
    /// symbol and the output letter index.
    fn run_trial(&self, cfg: &SchemeConfig, master_seed: u64, trial: u64) -> (usize, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(trial);
        let x = rng.random_range(0..self.n_symbols);
        let received = apply_channel(&self.tx_fields[x], &cfg.channel, &mut rng);
        let output = self.receiver.apply(&received);
        let record = detect(&output, &cfg.channel, cfg.detector, self.window, &mut rng);
        let letter = match decode(&record, &self.position_map, &mut rng) {
            DecodeOutcome::Symbol(s) => s,
            DecodeOutcome::Erasure => self.n_symbols,
            DecodeOutcome::Invalid => self.n_symbols + 1,
        };
        (x, letter)
    }
}

/// Check a configuration end to end, including receiver-chain construction,
/// without running any trials.
pub fn validate_scheme(cfg: &SchemeConfig) -> Result<(), LinkError> {
    cfg.validate()?;
    TrialEngine::build(cfg).map(|_| ())
}

/// Run `n_trials` Monte Carlo trials of the configured link. Deterministic
/// for a given `(cfg, n_trials, master_seed)`, independent of thread count.
pub fn run_trials(
    cfg: &SchemeConfig,
    n_trials: u64,
    master_seed: u64,
) -> Result<LinkReport, LinkError> {
    if n_trials == 0 {
        return Err(LinkError::ZeroTrials);
    }
    cfg.validate()?;
    let engine = TrialEngine::build(cfg)?;
    let k = engine.n_symbols;

    let joint = (0..n_trials)
        .into_par_iter()
        .fold(
            || JointCounts::new(k),
            |mut acc, trial| {
                let (x, letter) = engine.run_trial(cfg, master_seed, trial);
                acc.add(x, letter);
                acc
            },
        )
        .reduce(|| JointCounts::new(k), JointCounts::merge);

    let n = n_trials as f64;
    let mut correct = 0u64;
    let mut wrong = 0u64;
    for x in 0..k {
        for y in 0..k {
            let c = joint.count(x, y);
            if x == y {
                correct += c;
            } else {
                wrong += c;
            }
        }
    }
    let erased: u64 = (0..k).map(|x| joint.count(x, k)).sum();
    let invalid: u64 = (0..k).map(|x| joint.count(x, k + 1)).sum();

    let rate = |c: u64| c as f64 / n;
    let se = |r: f64| (r * (1.0 - r) / n).sqrt();
    let symbol_error_rate = rate(wrong);
    let erasure_rate = rate(erased);
    let invalid_rate = rate(invalid);
    let correct_rate = rate(correct);
    let mi = joint.plugin_mi_bits();
    let pie = if cfg.n_s > 0.0 { mi / cfg.n_s } else { 0.0 };
    let par = if engine.tx_fields[0].total_energy() > 0.0 {
        peak_to_average(&engine.tx_fields[0], cfg.natural_frame_len())?
    } else {
        0.0
    };

    Ok(LinkReport {
        scheme: cfg.spec.label().to_owned(),
        m: cfg.spec.m(),
        ppm_order: cfg.spec.ppm_order(),
        n_s: cfg.n_s,
        n_trials,
        symbol_error_rate,
        erasure_rate,
        invalid_rate,
        correct_rate,
        mi_bits_per_symbol: mi,
        pie_bits_per_photon: pie,
        par,
        se_symbol_error: se(symbol_error_rate),
        se_erasure: se(erasure_rate),
        se_invalid: se(invalid_rate),
        master_seed,
        joint_counts: joint,
    })
}

/// Mutual information of ideal direct-detection M-ary PPM with uniform
/// inputs: an erasure channel, `(1 - e^{-N_s}) log2(M)` bits per symbol.
pub fn analytic_ppm_mi(order: u32, n_s: f64) -> f64 {
    (1.0 - (-n_s).exp()) * (order as f64).log2()
}

/// One row of a peak-to-average comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParEntry {
    pub scheme: String,
    pub m: Option<u32>,
    pub ppm_order: u32,
    pub par: f64,
    pub frame_len: u64,
}

/// Peak-to-average ratios of the transmitted (pre-channel) fields, either
/// over each scheme's natural frame or over one common frame length.
pub fn compare_par(
    cfgs: &[SchemeConfig],
    common_frame_len: Option<u64>,
) -> Result<Vec<ParEntry>, LinkError> {
    cfgs.iter()
        .map(|cfg| {
            cfg.validate()?;
            let engine = TrialEngine::build(cfg)?;
            let frame_len = common_frame_len.unwrap_or_else(|| cfg.natural_frame_len());
            let par = peak_to_average(&engine.tx_fields[0], frame_len)?;
            Ok(ParEntry {
                scheme: cfg.spec.label().to_owned(),
                m: cfg.spec.m(),
                ppm_order: cfg.spec.ppm_order(),
                par,
                frame_len,
            })
        })
        .collect()
}

/// Two-sample chi-square homogeneity test over the populated cells of two
/// joint count tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    /// Normal approximation `(chi2 - dof) / sqrt(2 dof)`; compare against
    /// the desired sigma level.
    pub z_score: f64,
}

pub fn chi_square_homogeneity(a: &JointCounts, b: &JointCounts) -> Result<ChiSquareTest, LinkError> {
    if a.n_inputs() != b.n_inputs() {
        return Err(LinkError::ShapeMismatch);
    }
    let n1 = a.total() as f64;
    let n2 = b.total() as f64;
    let mut statistic = 0.0;
    let mut populated = 0usize;
    for (&ca, &cb) in a.as_slice().iter().zip(b.as_slice()) {
        let pooled = ca + cb;
        if pooled == 0 {
            continue;
        }
        populated += 1;
        let e1 = pooled as f64 * n1 / (n1 + n2);
        let e2 = pooled as f64 * n2 / (n1 + n2);
        statistic += (ca as f64 - e1).powi(2) / e1 + (cb as f64 - e2).powi(2) / e2;
    }
    let dof = populated.saturating_sub(1);
    let z_score = if dof > 0 {
        (statistic - dof as f64) / (2.0 * dof as f64).sqrt()
    } else {
        0.0
    };
    Ok(ChiSquareTest { statistic, dof, z_score })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn active_cfg(m: u32, n_s: f64) -> SchemeConfig {
        SchemeConfig::ideal(SchemeSpec::ActiveHadamard { m }, n_s)
    }

    #[test]
    fn analytic_mi_limits() {
        assert!((analytic_ppm_mi(16, 1e9) - 4.0).abs() < 1e-12);
        assert_eq!(analytic_ppm_mi(16, 0.0), 0.0);
        // Frozen from direct evaluation of (1 - e^{-1}) * 4.
        assert!((analytic_ppm_mi(16, 1.0) - 2.5284822353142307).abs() < 1e-12);
        assert!((analytic_ppm_mi(16, 1.0) - 2.5285).abs() < 1e-4);
    }

    #[test]
    fn zero_photons_always_erase() {
        let report = run_trials(&active_cfg(3, 0.0), 2_000, 11).unwrap();
        assert_eq!(report.erasure_rate, 1.0);
        assert_eq!(report.symbol_error_rate, 0.0);
        assert_eq!(report.mi_bits_per_symbol, 0.0);
        assert_eq!(report.pie_bits_per_photon, 0.0);
    }

    #[test]
    fn rates_sum_to_one_and_mi_is_bounded() {
        let cfg = SchemeConfig {
            channel: ChannelParams { dark_mean: 0.02, ..ChannelParams::ideal() },
            ..active_cfg(3, 1.0)
        };
        let report = run_trials(&cfg, 5_000, 17).unwrap();
        let sum = report.symbol_error_rate
            + report.erasure_rate
            + report.invalid_rate
            + report.correct_rate;
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(report.mi_bits_per_symbol <= 3.0 + 1e-12);
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = active_cfg(4, 1.0);
        let a = run_trials(&cfg, 3_000, 99).unwrap();
        let b = run_trials(&cfg, 3_000, 99).unwrap();
        assert_eq!(a, b);
        let c = run_trials(&cfg, 3_000, 100).unwrap();
        assert_ne!(a.joint_counts, c.joint_counts);
    }

    #[test]
    fn erasure_rate_decreases_with_photon_number() {
        let mut last = f64::INFINITY;
        for n_s in [0.5, 1.0, 2.0, 4.0] {
            let report = run_trials(&active_cfg(4, n_s), 20_000, 7).unwrap();
            assert!(
                report.erasure_rate < last,
                "erasure {} not below {last} at N_s={n_s}",
                report.erasure_rate
            );
            assert_eq!(report.symbol_error_rate, 0.0);
            last = report.erasure_rate;
        }
    }

    #[test]
    fn ideal_active_link_matches_poisson_erasure() {
        let n_s = 1.0;
        let report = run_trials(&active_cfg(4, n_s), 20_000, 21).unwrap();
        let p = (-n_s).exp();
        let se = (p * (1.0 - p) / 20_000f64).sqrt();
        assert!((report.erasure_rate - p).abs() < 3.5 * se);
        assert_eq!(report.invalid_rate, 0.0);
    }

    #[test]
    fn passive_link_with_doubling_needs_pol_detector() {
        let frame = FrameConfig { ppm_order: 8, guard_bins: 8, polarization_doubling: true };
        let cfg = SchemeConfig::ideal(SchemeSpec::PassivePattern { m: 2, frame }, 1.0);
        assert!(matches!(
            run_trials(&cfg, 10, 1),
            Err(LinkError::DoublingNeedsPolarizationDetector)
        ));
        let cfg = SchemeConfig { detector: DetectorMode::PerBinPol, ..cfg };
        let report = run_trials(&cfg, 2_000, 1).unwrap();
        assert_eq!(report.joint_counts.n_inputs(), 16);
        assert_eq!(report.symbol_error_rate, 0.0);
    }

    #[test]
    fn passive_and_reference_have_zero_error_when_ideal() {
        let frame = FrameConfig::default_for(3, 16);
        for cfg in [
            SchemeConfig::ideal(SchemeSpec::PassivePattern { m: 3, frame }, 1.5),
            SchemeConfig::ideal(SchemeSpec::ReferencePpm { order: 16 }, 1.5),
        ] {
            let report = run_trials(&cfg, 5_000, 5).unwrap();
            assert_eq!(report.symbol_error_rate, 0.0);
            assert_eq!(report.invalid_rate, 0.0);
        }
    }

    #[test]
    fn config_validation_errors() {
        assert!(matches!(run_trials(&active_cfg(3, 1.0), 0, 1), Err(LinkError::ZeroTrials)));
        assert!(matches!(
            run_trials(&active_cfg(3, f64::NAN), 10, 1),
            Err(LinkError::BadPhotonNumber(_))
        ));
        let cfg = SchemeConfig {
            channel: ChannelParams { transmissivity: 0.0, ..ChannelParams::ideal() },
            ..active_cfg(3, 1.0)
        };
        assert!(matches!(run_trials(&cfg, 10, 1), Err(LinkError::EnergyInfeasible { .. })));
        let cfg = SchemeConfig::ideal(SchemeSpec::ReferencePpm { order: 1 }, 1.0);
        assert!(matches!(run_trials(&cfg, 10, 1), Err(LinkError::PpmOrderTooSmall(1))));
        let cfg = SchemeConfig {
            channel: ChannelParams { delay_phase_errors: vec![0.1], ..ChannelParams::ideal() },
            ..active_cfg(3, 1.0)
        };
        assert!(matches!(
            run_trials(&cfg, 10, 1),
            Err(LinkError::Active(ActiveError::PhaseErrorCount { expected: 6, got: 1 }))
        ));
    }

    #[test]
    fn losses_are_compensated_at_the_transmitter() {
        // n_s is the detected mean photon number, so the erasure rate should
        // not depend on transmissivity for an ideal receiver.
        let lossy = SchemeConfig {
            channel: ChannelParams { transmissivity: 0.25, ..ChannelParams::ideal() },
            ..active_cfg(3, 1.0)
        };
        let report = run_trials(&lossy, 20_000, 31).unwrap();
        let p = (-1.0f64).exp();
        let se = (p * (1.0 - p) / 20_000f64).sqrt();
        assert!((report.erasure_rate - p).abs() < 3.5 * se);
    }

    #[test]
    fn compare_par_reference_values() {
        let cfgs = [
            SchemeConfig::ideal(SchemeSpec::ReferencePpm { order: 16 }, 1.0),
            active_cfg(4, 1.0),
        ];
        let table = compare_par(&cfgs, None).unwrap();
        assert!((table[0].par - 16.0).abs() < 1e-12);
        assert!((table[1].par - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compare_par_common_frame_shows_eightfold_reduction() {
        let frame = FrameConfig::default_for(3, 16);
        let cfgs = [
            SchemeConfig::ideal(SchemeSpec::ReferencePpm { order: 16 }, 1.0),
            SchemeConfig::ideal(SchemeSpec::PassivePattern { m: 3, frame }, 1.0),
        ];
        let table = compare_par(&cfgs, Some(16)).unwrap();
        assert!((table[0].par / table[1].par - 8.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_accepts_identical_and_rejects_disjoint() {
        let mut a = JointCounts::new(2);
        let mut b = JointCounts::new(2);
        for _ in 0..500 {
            a.add(0, 0);
            b.add(0, 0);
            a.add(1, 2);
            b.add(1, 2);
        }
        let same = chi_square_homogeneity(&a, &b).unwrap();
        assert!(same.statistic < 1e-9);

        let mut c = JointCounts::new(2);
        for _ in 0..500 {
            c.add(0, 1);
            c.add(1, 3);
        }
        let diff = chi_square_homogeneity(&a, &c).unwrap();
        assert!(diff.z_score > 10.0);

        let other = JointCounts::new(3);
        assert!(matches!(
            chi_square_homogeneity(&a, &other),
            Err(LinkError::ShapeMismatch)
        ));
    }

    #[test]
    fn plugin_mi_of_noiseless_channel_is_log2_k() {
        let mut j = JointCounts::new(4);
        for x in 0..4 {
            for _ in 0..250 {
                j.add(x, x);
            }
        }
        assert!((j.plugin_mi_bits() - 2.0).abs() < 1e-12);
    }
}
