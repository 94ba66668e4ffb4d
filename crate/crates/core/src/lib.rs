//! Simulation and analysis toolkit for structured optical receivers.
//!
//! Two receiver architectures convert distributed-power pulse sequences
//! into single-pulse PPM outputs by optical interference: an active chain
//! that maps BPSK Hadamard codewords onto PPM positions using per-bin
//! polarization switching, and an all-passive chain that concentrates
//! phase-polarization pulse patterns while preserving their arrival time.
//! On top of the field-level simulation sit photon-counting detection with
//! erasure semantics and Monte Carlo link analysis: symbol error and
//! erasure rates, mutual information, photon information efficiency and
//! peak-to-average power comparisons against the standard PPM baseline.

pub mod active;
pub mod channel;
pub mod field;
pub mod hadamard;
pub mod link;
pub mod passive;

pub use active::{ActiveChain, ActiveError, ActiveModuleSpec, ConcentrationReport};
pub use channel::{
    apply_channel, decode, detect, BinWindow, ChannelError, ChannelParams, DecodeOutcome, DetCell,
    DetectionRecord, DetectorMode, PositionMap,
};
pub use field::{FieldError, FieldState, Pol, PolTransform, SwitchSchedule};
pub use hadamard::{decode_position, encode_bpsk, BpskAmplitude, Codeword, CodecError};
pub use link::{
    analytic_ppm_mi, chi_square_homogeneity, compare_par, run_trials, validate_scheme,
    ChiSquareTest, JointCounts, LinkError, LinkReport, ParEntry, SchemeConfig, SchemeSpec,
};
pub use num_complex::Complex64;
pub use passive::{
    build_symbol_alphabet, derive_pattern, peak_to_average, FrameConfig, PassiveChain,
    PassiveError, PassiveModuleSpec, PatternSymbol,
};
