//! Channel impairments and direct photon-counting detection.
//!
//! The channel scales every amplitude by `sqrt(transmissivity)` and applies
//! one Gaussian phase per bin, common to both polarizations; delay-line
//! phase errors inside the receivers are modeled separately on the chain
//! specs. Detection draws Poisson counts per detector cell from the
//! coherent-state intensity, with interference visibility folded in as
//! incoherent leakage spread uniformly over the detection span, plus dark
//! counts. Decoding follows PPM direct detection: no count anywhere is an
//! erasure, otherwise the strongest cell wins (ties broken uniformly at
//! random from the trial's stream).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldState, Pol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("transmissivity {0} outside [0, 1]")]
    BadTransmissivity(f64),
    #[error("visibility {0} outside [0, 1]")]
    BadVisibility(f64),
    #[error("phase noise sigma {0} must be finite and nonnegative")]
    BadPhaseNoise(f64),
    #[error("dark count mean {0} must be finite and nonnegative")]
    BadDarkMean(f64),
    #[error("two cells of the position map decode to symbol {symbol}")]
    NonInjectivePositionMap { symbol: usize },
    #[error("cell {cell:?} appears twice in the position map")]
    DuplicateCell { cell: DetCell },
}

/// Channel and detector imperfection parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Power transmissivity of the link, in [0, 1].
    pub transmissivity: f64,
    /// Std dev of the per-bin Gaussian phase, radians.
    pub phase_noise_sigma: f64,
    /// Interference visibility, in [0, 1]; 1 is ideal.
    pub visibility: f64,
    /// Mean dark counts per bin per detector.
    pub dark_mean: f64,
    /// Per-delay-line phase errors forwarded into the receiver chain, in
    /// propagation order (two per active module, one per passive module).
    #[serde(default)]
    pub delay_phase_errors: Vec<f64>,
}

impl ChannelParams {
    /// Lossless, noiseless, fully visible, dark-free.
    pub fn ideal() -> Self {
        ChannelParams {
            transmissivity: 1.0,
            phase_noise_sigma: 0.0,
            visibility: 1.0,
            dark_mean: 0.0,
            delay_phase_errors: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(0.0..=1.0).contains(&self.transmissivity) {
            return Err(ChannelError::BadTransmissivity(self.transmissivity));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(ChannelError::BadVisibility(self.visibility));
        }
        if !self.phase_noise_sigma.is_finite() || self.phase_noise_sigma < 0.0 {
            return Err(ChannelError::BadPhaseNoise(self.phase_noise_sigma));
        }
        if !self.dark_mean.is_finite() || self.dark_mean < 0.0 {
            return Err(ChannelError::BadDarkMean(self.dark_mean));
        }
        Ok(())
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams::ideal()
    }
}

/// Apply transmissivity and per-bin phase noise: every stored amplitude
/// becomes `sqrt(eta) * e^{i phi_t} * a`, with `phi_t ~ Normal(0, sigma^2)`
/// drawn once per bin and shared by both polarizations.
pub fn apply_channel<R: Rng>(
    state: &FieldState,
    params: &ChannelParams,
    rng: &mut R,
) -> FieldState {
    let root_eta = params.transmissivity.sqrt();
    if params.phase_noise_sigma == 0.0 {
        return state.scaled(root_eta.into());
    }
    let normal = Normal::new(0.0, params.phase_noise_sigma).expect("validated sigma");
    let amps = state
        .bins()
        .map(|(_, a)| {
            let phase = num_complex::Complex64::from_polar(root_eta, normal.sample(rng));
            [a[0] * phase, a[1] * phase]
        })
        .collect();
    FieldState::from_bins(state.start_bin(), amps)
}

/// Detector arrangement: one detector summing both polarizations per bin,
/// or a polarizing splitter feeding a detector pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorMode {
    PerBin,
    PerBinPol,
}

/// One detector cell: a bin, with the polarization resolved in
/// [`DetectorMode::PerBinPol`] only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DetCell {
    pub bin: i64,
    pub pol: Option<Pol>,
}

impl DetCell {
    pub fn bin(bin: i64) -> Self {
        DetCell { bin, pol: None }
    }

    pub fn bin_pol(bin: i64, pol: Pol) -> Self {
        DetCell { bin, pol: Some(pol) }
    }
}

/// Gate window over which the detectors are read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinWindow {
    pub start: i64,
    pub len: u64,
}

impl BinWindow {
    pub fn new(start: i64, len: u64) -> Self {
        BinWindow { start, len }
    }

    pub fn end(&self) -> i64 {
        self.start + self.len as i64
    }

    pub fn contains(&self, bin: i64) -> bool {
        bin >= self.start && bin < self.end()
    }

    pub fn bins(&self) -> impl Iterator<Item = i64> {
        self.start..self.end()
    }
}

/// Photocount record: nonzero counts per detector cell, in cell order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DetectionRecord {
    counts: BTreeMap<DetCell, u64>,
}

impl DetectionRecord {
    pub fn counts(&self) -> &BTreeMap<DetCell, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub const CSV_HEADER: &'static str = "trial,bin,pol,count";

    /// Append debug CSV rows (`trial,bin,pol,count`) for this record. Mode A
    /// cells print `-` in the polarization column.
    pub fn write_csv_rows(&self, trial: u64, out: &mut String) {
        for (cell, count) in &self.counts {
            let pol = cell.pol.map_or("-", Pol::label);
            writeln!(out, "{trial},{},{pol},{count}", cell.bin).expect("string write");
        }
    }
}

/// Simulate direct detection over `window`. Per cell the count is Poisson
/// with mean `v * mu + mu_leak + dark_mean`, where `mu` is the cell's
/// squared amplitude and `mu_leak` spreads the fraction `1 - v` of the
/// windowed signal energy uniformly over all cells of the window. Light
/// outside the gate window is not detected.
pub fn detect<R: Rng>(
    state: &FieldState,
    params: &ChannelParams,
    mode: DetectorMode,
    window: BinWindow,
    rng: &mut R,
) -> DetectionRecord {
    let windowed_energy: f64 = window.bins().map(|b| state.bin_power(b)).sum();
    let n_cells = match mode {
        DetectorMode::PerBin => window.len,
        DetectorMode::PerBinPol => 2 * window.len,
    };
    let leak = if n_cells > 0 {
        (1.0 - params.visibility) * windowed_energy / n_cells as f64
    } else {
        0.0
    };

    let mut counts = BTreeMap::new();
    let mut draw = |cell: DetCell, mu: f64, rng: &mut R| {
        let mean = params.visibility * mu + leak + params.dark_mean;
        if mean > 0.0 {
            let count = Poisson::new(mean).expect("positive mean").sample(rng) as u64;
            if count > 0 {
                counts.insert(cell, count);
            }
        }
    };

    for bin in window.bins() {
        match mode {
            DetectorMode::PerBin => draw(DetCell::bin(bin), state.bin_power(bin), rng),
            DetectorMode::PerBinPol => {
                for pol in [Pol::H, Pol::V] {
                    draw(DetCell::bin_pol(bin, pol), state.amp(bin, pol).norm_sqr(), rng);
                }
            }
        }
    }
    DetectionRecord { counts }
}

/// Injective map from detector cells to symbol indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionMap {
    cells: BTreeMap<DetCell, usize>,
}

impl PositionMap {
    pub fn new(entries: impl IntoIterator<Item = (DetCell, usize)>) -> Result<Self, ChannelError> {
        let mut cells = BTreeMap::new();
        let mut seen = std::collections::BTreeSet::new();
        for (cell, symbol) in entries {
            if cells.insert(cell, symbol).is_some() {
                return Err(ChannelError::DuplicateCell { cell });
            }
            if !seen.insert(symbol) {
                return Err(ChannelError::NonInjectivePositionMap { symbol });
            }
        }
        Ok(PositionMap { cells })
    }

    pub fn symbol_for(&self, cell: &DetCell) -> Option<usize> {
        // Mode A records carry unresolved cells; a map built on resolved
        // cells never matches them, and vice versa.
        self.cells.get(cell).copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Outcome of decoding one detection record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeOutcome {
    Symbol(usize),
    Erasure,
    Invalid,
}

/// PPM decoding: no counts is an erasure; otherwise the cell with the
/// maximum count (ties broken uniformly at random) decodes through the
/// position map, or comes back [`DecodeOutcome::Invalid`] if it maps to no
/// symbol position.
pub fn decode<R: Rng>(
    record: &DetectionRecord,
    map: &PositionMap,
    rng: &mut R,
) -> DecodeOutcome {
    let Some(max) = record.counts.values().copied().max() else {
        return DecodeOutcome::Erasure;
    };
    let tied: Vec<&DetCell> = record
        .counts
        .iter()
        .filter(|(_, &c)| c == max)
        .map(|(cell, _)| cell)
        .collect();
    let cell = if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.random_range(0..tied.len())]
    };
    match map.symbol_for(cell) {
        Some(symbol) => DecodeOutcome::Symbol(symbol),
        None => DecodeOutcome::Invalid,
    }
}
