//! Passive receiver chain and the phase-polarization pulse patterns it
//! concentrates into single pulses.
//!
//! Each module is a polarization-selective delay followed by the
//! diagonal-to-rectilinear waveplate; a chain for patterns spanning `2^m`
//! bins uses delays `2^{m-1}, ..., 2, 1`. Transmit patterns are derived by
//! running the chain in reverse from a hypothetical single output pulse:
//! the result spans `2^m` bins, every occupied bin holding one rectilinear
//! component of energy `1/2^m` of the total. Shifting a pattern's arrival
//! time shifts the output pulse by the same amount, which yields a
//! PPM-equivalent symbol alphabet once frames are separated by a guard
//! longer than the pattern.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::field::{FieldState, Pol, PolTransform};
use crate::hadamard::MAX_ORDER_EXP;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PassiveError {
    #[error("chain order m = {m} outside 1..={MAX_ORDER_EXP}")]
    OrderOutOfRange { m: u32 },
    #[error("expected {expected} delay phase errors (one per module), got {got}")]
    PhaseErrorCount { expected: usize, got: usize },
    #[error("PPM order must be at least 2, got {order}")]
    PpmOrderTooSmall { order: u32 },
    #[error("guard of {guard_bins} bins is shorter than the {pattern_bins}-bin pattern")]
    GuardTooShort { guard_bins: u64, pattern_bins: u64 },
    #[error("peak-to-average ratio of a zero-energy field is undefined")]
    ZeroEnergy,
    #[error("frame length must be positive")]
    ZeroFrame,
}

/// One passive module: delay `T` on the horizontal component, then the
/// waveplate.
#[derive(Debug, Clone, PartialEq)]
pub struct PassiveModuleSpec {
    delay_t: u64,
    wave_transform: PolTransform,
    delay_phase_error: f64,
}

impl PassiveModuleSpec {
    pub fn delay_t(&self) -> u64 {
        self.delay_t
    }

    pub fn delay_phase_error(&self) -> f64 {
        self.delay_phase_error
    }

    pub fn apply(&self, state: &FieldState) -> FieldState {
        state
            .apply_pol_delay(self.delay_t, self.delay_phase_error)
            .expect("delay validated at construction")
            .apply_uniform(&self.wave_transform)
    }

    /// Ideal inverse: waveplate inverse, then an H-advance of `T` bins.
    fn apply_ideal_inverse(&self, state: &FieldState) -> FieldState {
        state
            .apply_uniform(&self.wave_transform.inverse())
            .apply_pol_advance(self.delay_t, 0.0)
            .expect("delay validated at construction")
    }
}

/// All-passive receiver for patterns spanning `2^m` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct PassiveChain {
    m: u32,
    modules: Vec<PassiveModuleSpec>,
}

impl PassiveChain {
    pub fn new(m: u32) -> Result<Self, PassiveError> {
        if m == 0 || m > MAX_ORDER_EXP {
            return Err(PassiveError::OrderOutOfRange { m });
        }
        let modules = (0..m)
            .rev()
            .map(|k| PassiveModuleSpec {
                delay_t: 1u64 << k,
                wave_transform: PolTransform::diag_to_rect(),
                delay_phase_error: 0.0,
            })
            .collect();
        Ok(PassiveChain { m, modules })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn modules(&self) -> &[PassiveModuleSpec] {
        &self.modules
    }

    /// Pattern span `2^m` in bins.
    pub fn pattern_bins(&self) -> u64 {
        1u64 << self.m
    }

    /// Attach one phase error per delay line, in propagation order.
    pub fn set_delay_phase_errors(&mut self, errors: &[f64]) -> Result<(), PassiveError> {
        if errors.len() != self.modules.len() {
            return Err(PassiveError::PhaseErrorCount {
                expected: self.modules.len(),
                got: errors.len(),
            });
        }
        for (module, &e) in self.modules.iter_mut().zip(errors) {
            module.delay_phase_error = e;
        }
        Ok(())
    }

    /// Propagate a field through all modules in order.
    pub fn propagate(&self, state: &FieldState) -> FieldState {
        self.modules.iter().fold(state.clone(), |s, module| module.apply(&s))
    }

    /// Output bin for a pattern whose first bin arrives at `arrival`: the
    /// chain's accumulated delay is `2^m - 1` bins.
    pub fn output_bin_for_arrival(&self, arrival: i64) -> i64 {
        arrival + (1i64 << self.m) - 1
    }
}

/// A transmit pattern together with its framing metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSymbol {
    pub m: u32,
    /// The phase-polarization pattern, spanning `2^m` bins.
    pub pattern: FieldState,
    /// Arrival-time offset of this symbol within the frame, in bins.
    pub arrival_offset: i64,
    /// Polarization of the reconstructed output pulse.
    pub output_pol: Pol,
    /// Bin in which the ideal chain reproduces the single pulse.
    pub predicted_output_bin: i64,
}

impl PatternSymbol {
    /// The same symbol arriving `delta` bins later.
    pub fn shifted(&self, delta: i64) -> Self {
        PatternSymbol {
            m: self.m,
            pattern: self.pattern.shift(delta),
            arrival_offset: self.arrival_offset + delta,
            output_pol: self.output_pol,
            predicted_output_bin: self.predicted_output_bin + delta,
        }
    }

    /// Pattern interchange format: `{m, output_pol, bins: [{t, pol, re, im}]}`
    /// sorted by bin. Derived patterns hold exactly one rectilinear
    /// component per occupied bin, so each bin maps to one entry.
    pub fn to_export_json(&self) -> String {
        let mut bins = Vec::new();
        for (t, a) in self.pattern.bins() {
            for pol in [Pol::H, Pol::V] {
                let amp = a[pol.index()];
                if amp.norm_sqr() > 0.0 {
                    bins.push(PatternBinJson { t, pol: pol.label(), re: amp.re, im: amp.im });
                }
            }
        }
        let doc = PatternJson { m: self.m, output_pol: self.output_pol.label(), bins };
        serde_json::to_string(&doc).expect("pattern serialization cannot fail")
    }
}

#[derive(Serialize)]
struct PatternJson {
    m: u32,
    output_pol: &'static str,
    bins: Vec<PatternBinJson>,
}

#[derive(Serialize)]
struct PatternBinJson {
    t: i64,
    pol: &'static str,
    re: f64,
    im: f64,
}

/// Derive the transmit pattern that the ideal `m`-module chain converts
/// into a single pulse of polarization `output_pol` and total amplitude
/// `alpha_total`: inject that pulse at the output and apply the module
/// inverses in reverse order. The pattern occupies bins `0..2^m`.
pub fn derive_pattern(
    m: u32,
    output_pol: Pol,
    alpha_total: Complex64,
) -> Result<PatternSymbol, PassiveError> {
    let chain = PassiveChain::new(m)?;
    let output_bin = chain.output_bin_for_arrival(0);
    let mut state = FieldState::single_pulse(output_bin, output_pol, alpha_total);
    for module in chain.modules().iter().rev() {
        state = module.apply_ideal_inverse(&state);
    }
    let pattern = state.normalize_window();
    Ok(PatternSymbol {
        m,
        pattern,
        arrival_offset: 0,
        output_pol,
        predicted_output_bin: output_bin,
    })
}

/// PPM framing for the pattern alphabet.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    /// Number of arrival-time offsets, the PPM order M.
    pub ppm_order: u32,
    /// Idle bins between consecutive symbol frames.
    pub guard_bins: u64,
    /// Add a second set of symbols with the orthogonal output polarization.
    #[serde(default)]
    pub polarization_doubling: bool,
}

impl FrameConfig {
    /// Default framing for patterns of span `2^m`: `guard = max(M, 2^m)`,
    /// no polarization doubling. With `M >= 2^m` this is the 50%-duty
    /// layout where guard time equals the symbol frame.
    pub fn default_for(m: u32, ppm_order: u32) -> Self {
        FrameConfig {
            ppm_order,
            guard_bins: (ppm_order as u64).max(1u64 << m),
            polarization_doubling: false,
        }
    }

    pub fn validate(&self, m: u32) -> Result<(), PassiveError> {
        if self.ppm_order < 2 {
            return Err(PassiveError::PpmOrderTooSmall { order: self.ppm_order });
        }
        let pattern_bins = 1u64 << m;
        if self.guard_bins < pattern_bins {
            return Err(PassiveError::GuardTooShort { guard_bins: self.guard_bins, pattern_bins });
        }
        Ok(())
    }

    /// Total frame length in bins: `M + guard`.
    pub fn frame_len(&self) -> u64 {
        self.ppm_order as u64 + self.guard_bins
    }

    /// Fraction of the frame available to carry optical power.
    pub fn duty_cycle(&self) -> f64 {
        self.ppm_order as f64 / self.frame_len() as f64
    }

    pub fn n_symbols(&self) -> usize {
        let base = self.ppm_order as usize;
        if self.polarization_doubling {
            2 * base
        } else {
            base
        }
    }
}

/// Build the symbol alphabet: symbol `k < M` is the base pattern arriving
/// `k` bins late; with polarization doubling, symbols `M..2M` repeat the
/// offsets with the orthogonal output polarization. The base output
/// polarization is H.
pub fn build_symbol_alphabet(
    m: u32,
    frame: &FrameConfig,
    alpha_total: Complex64,
) -> Result<Vec<PatternSymbol>, PassiveError> {
    frame.validate(m)?;
    let base = derive_pattern(m, Pol::H, alpha_total)?;
    let mut symbols = Vec::with_capacity(frame.n_symbols());
    for k in 0..frame.ppm_order as i64 {
        symbols.push(base.shifted(k));
    }
    if frame.polarization_doubling {
        let crossed = derive_pattern(m, Pol::V, alpha_total)?;
        for k in 0..frame.ppm_order as i64 {
            symbols.push(crossed.shifted(k));
        }
    }
    Ok(symbols)
}

/// Peak-to-average power ratio: highest per-bin power divided by the energy
/// averaged over `frame_len_bins` bins.
pub fn peak_to_average(state: &FieldState, frame_len_bins: u64) -> Result<f64, PassiveError> {
    if frame_len_bins == 0 {
        return Err(PassiveError::ZeroFrame);
    }
    let total = state.total_energy();
    if total <= 0.0 {
        return Err(PassiveError::ZeroEnergy);
    }
    let (_, peak) = state.peak_bin().expect("nonzero energy implies a stored bin");
    Ok(peak / (total / frame_len_bins as f64))
}
