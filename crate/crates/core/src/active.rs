//! Active receiver chain: converts BPSK Hadamard codewords into single-pulse
//! PPM outputs using per-bin polarization switching.
//!
//! Each module applies, in order: the synthesized switch schedule, a
//! polarization-selective delay of `T` bins, the diagonal-to-rectilinear
//! waveplate, and a second delay of `T` bins. A chain for codewords of
//! length `2^m` uses m modules with delays `2^{m-1}, ..., 2, 1`; the ideal
//! chain concentrates every codeword's energy in the single output bin
//! `position_offset + bits`.
//!
//! Schedules are synthesized by region tracking. Before the module with
//! delay `T`, the codewords sharing any given prefix of already-consumed
//! bits occupy one contiguous region of `2T` bins with a single uniform
//! polarization. The schedule swaps exactly the bins where that polarization
//! differs from the target layout: earlier half horizontal, later half
//! vertical. The delay then overlaps the halves, whose fixed Hadamard sign
//! relation puts every bin on one of the two diagonals; the waveplate sorts
//! the diagonals back onto H and V, and the second delay separates them by
//! `T` bins. The region for prefix-bit 0 continues at `[start+T, start+2T)`
//! with polarization V, the one for bit 1 at `[start+2T, start+3T)` with H.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::{FieldState, Pol, PolTransform, SwitchSchedule};
use crate::hadamard::{encode_bpsk, BpskAmplitude, Codeword, MAX_ORDER_EXP};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActiveError {
    #[error("chain order m = {m} outside 1..={MAX_ORDER_EXP}")]
    OrderOutOfRange { m: u32 },
    #[error("module delay must be a power of two, got {delay}")]
    DelayNotPowerOfTwo { delay: u64 },
    /// Tracked regions for two distinct codeword prefixes intersect. This
    /// cannot happen for chains built by [`ActiveChain::synthesize`]; seeing
    /// it indicates a broken polarization convention, not bad user input.
    #[error("tracked regions overlap at bin {bin} during synthesis")]
    RegionOverlap { bin: i64 },
    #[error("expected {expected} delay phase errors (two per module), got {got}")]
    PhaseErrorCount { expected: usize, got: usize },
    #[error("codeword order {codeword_m} does not match chain order {chain_m}")]
    OrderMismatch { chain_m: u32, codeword_m: u32 },
    #[error("energy leaks outside predicted bins: max fraction {max_leakage:.3e} exceeds {tolerance:.3e}")]
    ConcentrationFailure { max_leakage: f64, tolerance: f64 },
    #[error("output position for bits {bits} is {found}, expected {expected}")]
    PositionMapBroken { bits: u32, expected: i64, found: i64 },
}

/// One receiver module: switch schedule, delay `T`, waveplate, delay `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveModuleSpec {
    delay_t: u64,
    schedule: SwitchSchedule,
    wave_transform: PolTransform,
    delay_phase_error_1: f64,
    delay_phase_error_2: f64,
}

impl ActiveModuleSpec {
    /// A module with the standard waveplate and zero phase errors.
    pub fn new(delay_t: u64, schedule: SwitchSchedule) -> Result<Self, ActiveError> {
        if delay_t == 0 || !delay_t.is_power_of_two() {
            return Err(ActiveError::DelayNotPowerOfTwo { delay: delay_t });
        }
        Ok(ActiveModuleSpec {
            delay_t,
            schedule,
            wave_transform: PolTransform::diag_to_rect(),
            delay_phase_error_1: 0.0,
            delay_phase_error_2: 0.0,
        })
    }

    pub fn with_phase_errors(mut self, first: f64, second: f64) -> Self {
        self.delay_phase_error_1 = first;
        self.delay_phase_error_2 = second;
        self
    }

    pub fn delay_t(&self) -> u64 {
        self.delay_t
    }

    pub fn schedule(&self) -> &SwitchSchedule {
        &self.schedule
    }

    pub fn phase_errors(&self) -> (f64, f64) {
        (self.delay_phase_error_1, self.delay_phase_error_2)
    }

    /// Propagate a state through the module. Phases never change energy, so
    /// this preserves total energy for arbitrary phase errors.
    pub fn apply(&self, state: &FieldState) -> FieldState {
        state
            .apply_schedule(&self.schedule)
            .apply_pol_delay(self.delay_t, self.delay_phase_error_1)
            .expect("delay validated at construction")
            .apply_uniform(&self.wave_transform)
            .apply_pol_delay(self.delay_t, self.delay_phase_error_2)
            .expect("delay validated at construction")
    }
}

/// Tracked occupied region during synthesis: `len` bins of one polarization
/// starting at `start`, shared by all codewords with one bit prefix.
#[derive(Debug, Clone, Copy)]
struct Region {
    start: i64,
    pol: Pol,
}

fn check_disjoint(regions: &[Region], len: u64) -> Result<(), ActiveError> {
    let mut starts: Vec<i64> = regions.iter().map(|r| r.start).collect();
    starts.sort_unstable();
    for pair in starts.windows(2) {
        if pair[1] < pair[0] + len as i64 {
            return Err(ActiveError::RegionOverlap { bin: pair[1] });
        }
    }
    Ok(())
}

/// The full m-module receiver with its synthesized schedules.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveChain {
    m: u32,
    modules: Vec<ActiveModuleSpec>,
    position_offset: i64,
}

impl ActiveChain {
    /// Synthesize the switch schedules for codewords of length `2^m` by
    /// region tracking. The schedules depend only on `m`, never on the
    /// transmitted codeword.
    pub fn synthesize(m: u32) -> Result<Self, ActiveError> {
        if m == 0 || m > MAX_ORDER_EXP {
            return Err(ActiveError::OrderOutOfRange { m });
        }
        // Codewords enter as a V-polarized pulse train over [0, 2^m).
        let mut regions = vec![Region { start: 0, pol: Pol::V }];
        let mut modules = Vec::with_capacity(m as usize);
        for k in (0..m).rev() {
            let t = 1i64 << k;
            check_disjoint(&regions, 2 * t as u64)?;
            let mut schedule = SwitchSchedule::empty();
            for r in &regions {
                let (swap_from, swap_to) = match r.pol {
                    Pol::V => (r.start, r.start + t),
                    Pol::H => (r.start + t, r.start + 2 * t),
                };
                for bin in swap_from..swap_to {
                    schedule.mark_swap(bin);
                }
            }
            modules.push(ActiveModuleSpec::new(t as u64, schedule)?);
            regions = regions
                .iter()
                .flat_map(|r| {
                    [
                        Region { start: r.start + t, pol: Pol::V },
                        Region { start: r.start + 2 * t, pol: Pol::H },
                    ]
                })
                .collect();
        }
        // Regions are now single bins, listed in codeword order; the map
        // bits -> output bin is affine with unit slope by construction.
        let position_offset = regions[0].start;
        debug_assert!(regions
            .iter()
            .enumerate()
            .all(|(bits, r)| r.start == position_offset + bits as i64));
        Ok(ActiveChain { m, modules, position_offset })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn modules(&self) -> &[ActiveModuleSpec] {
        &self.modules
    }

    /// Fixed latency of the chain: the output bin for codeword bits `b` is
    /// `position_offset + b`.
    pub fn position_offset(&self) -> i64 {
        self.position_offset
    }

    pub fn predicted_bin(&self, bits: u32) -> i64 {
        self.position_offset + bits as i64
    }

    /// Attach per-delay-line phase errors, two per module in propagation
    /// order: `[m0_first, m0_second, m1_first, ...]`.
    pub fn set_delay_phase_errors(&mut self, errors: &[f64]) -> Result<(), ActiveError> {
        let expected = 2 * self.modules.len();
        if errors.len() != expected {
            return Err(ActiveError::PhaseErrorCount { expected, got: errors.len() });
        }
        for (module, pair) in self.modules.iter_mut().zip(errors.chunks(2)) {
            module.delay_phase_error_1 = pair[0];
            module.delay_phase_error_2 = pair[1];
        }
        Ok(())
    }

    /// Propagate an arbitrary field through all modules.
    pub fn apply(&self, state: &FieldState) -> FieldState {
        self.modules.iter().fold(state.clone(), |s, module| module.apply(&s))
    }

    /// Encode a codeword and run it through the chain.
    pub fn propagate(&self, c: &Codeword, a: BpskAmplitude) -> Result<FieldState, ActiveError> {
        if c.m() != self.m {
            return Err(ActiveError::OrderMismatch { chain_m: self.m, codeword_m: c.m() });
        }
        Ok(self.apply(&encode_bpsk(c, a)))
    }

    /// Propagate all `2^m` codewords at unit pulse amplitude and check that
    /// each concentrates its energy in the predicted bin.
    pub fn verify_concentration(&self, tolerance: f64) -> Result<ConcentrationReport, ActiveError> {
        let n = 1u32 << self.m;
        let per_codeword: Vec<(f64, i64)> = (0..n)
            .into_par_iter()
            .map(|bits| {
                let c = Codeword::new(self.m, bits).expect("bits < 2^m");
                let out = self
                    .propagate(&c, BpskAmplitude::new(Complex64::ONE))
                    .expect("orders match");
                let total = out.total_energy();
                let in_predicted = out.bin_power(self.predicted_bin(bits));
                let leakage = 1.0 - in_predicted / total;
                let (peak, _) = out.peak_bin().expect("nonzero input energy");
                (leakage, peak)
            })
            .collect();

        let max_leakage = per_codeword.iter().map(|&(l, _)| l).fold(0.0, f64::max);
        let positions: Vec<i64> = per_codeword.iter().map(|&(_, p)| p).collect();
        for (bits, &found) in positions.iter().enumerate() {
            let expected = self.position_offset + bits as i64;
            if found != expected {
                return Err(ActiveError::PositionMapBroken {
                    bits: bits as u32,
                    expected,
                    found,
                });
            }
        }
        if max_leakage > tolerance {
            return Err(ActiveError::ConcentrationFailure { max_leakage, tolerance });
        }
        Ok(ConcentrationReport { max_leakage, positions })
    }

    /// Canonical chain description: `{m, position_offset, modules: [{delay_T,
    /// swap_bins}]}` with sorted swap bins, byte-stable for golden files.
    pub fn to_export_json(&self) -> String {
        let doc = ChainJson {
            m: self.m,
            position_offset: self.position_offset,
            modules: self
                .modules
                .iter()
                .map(|module| ModuleJson {
                    delay_t: module.delay_t,
                    swap_bins: module.schedule.swap_bins().collect(),
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("chain serialization cannot fail")
    }
}

/// Result of an exhaustive concentration check.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    /// Largest fraction of any codeword's energy found outside its
    /// predicted output bin.
    pub max_leakage: f64,
    /// Peak-power output bin per codeword, indexed by bits.
    pub positions: Vec<i64>,
}

#[derive(Serialize)]
struct ChainJson {
    m: u32,
    position_offset: i64,
    modules: Vec<ModuleJson>,
}

#[derive(Serialize)]
struct ModuleJson {
    #[serde(rename = "delay_T")]
    delay_t: u64,
    swap_bins: Vec<i64>,
}
