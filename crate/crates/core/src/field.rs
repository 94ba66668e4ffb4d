//! Time-binned dual-polarization coherent field states and the elementary
//! lossless optical elements acting on them.
//!
//! A [`FieldState`] stores one complex amplitude per (time bin, polarization),
//! in units of sqrt(photons), over a contiguous window of bins. The bin
//! spacing is the receiver's elementary delay and is normalized to 1, so all
//! delays are integer bin counts. The three elements provided here — uniform
//! polarization transforms, per-bin polarization switching and
//! polarization-selective delay lines — are all unitary, and receiver chains
//! are compositions of them.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum elementwise deviation of `u†u` from the identity accepted by
/// [`PolTransform::new`].
pub const UNITARITY_TOL: f64 = 1e-12;

/// Errors from field-level operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    /// The supplied 2x2 matrix is not unitary within [`UNITARITY_TOL`].
    #[error("polarization transform is not unitary (max |u†u - I| = {max_dev:.3e})")]
    NonUnitary { max_dev: f64 },
    /// A polarization delay of zero bins is a degenerate element.
    #[error("polarization delay must be at least one bin")]
    ZeroDelay,
}

/// Rectilinear polarization label. Index 0 = horizontal, 1 = vertical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pol {
    H,
    V,
}

impl Pol {
    /// Storage index within a bin's amplitude pair.
    pub fn index(self) -> usize {
        match self {
            Pol::H => 0,
            Pol::V => 1,
        }
    }

    /// The other rectilinear polarization.
    pub fn orthogonal(self) -> Pol {
        match self {
            Pol::H => Pol::V,
            Pol::V => Pol::H,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Pol::H => "H",
            Pol::V => "V",
        }
    }
}

impl fmt::Display for Pol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Pol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "H" | "h" => Ok(Pol::H),
            "V" | "v" => Ok(Pol::V),
            other => Err(format!("invalid polarization {other:?}, expected H or V")),
        }
    }
}

/// Classical coherent-field state: complex amplitude per (bin, polarization).
///
/// The window `[start_bin, start_bin + n_bins)` is dense; bins outside the
/// window are implicitly zero. Operations that move amplitudes grow the
/// window as needed; trimming zero-energy edges is explicit via
/// [`FieldState::normalize_window`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    start_bin: i64,
    amps: Vec<[Complex64; 2]>,
}

impl FieldState {
    /// The designated empty state: no stored bins, zero energy.
    pub fn empty() -> Self {
        FieldState { start_bin: 0, amps: Vec::new() }
    }

    /// A single pulse of amplitude `amp` in one (bin, polarization) mode.
    pub fn single_pulse(bin: i64, pol: Pol, amp: Complex64) -> Self {
        let mut cell = [Complex64::ZERO; 2];
        cell[pol.index()] = amp;
        FieldState { start_bin: bin, amps: vec![cell] }
    }

    /// Build a state from a dense window of `[H, V]` amplitude pairs.
    pub fn from_bins(start_bin: i64, amps: Vec<[Complex64; 2]>) -> Self {
        FieldState { start_bin, amps }
    }

    /// Index of the first stored bin.
    pub fn start_bin(&self) -> i64 {
        self.start_bin
    }

    /// Number of stored bins.
    pub fn n_bins(&self) -> usize {
        self.amps.len()
    }

    /// One past the last stored bin.
    pub fn end_bin(&self) -> i64 {
        self.start_bin + self.amps.len() as i64
    }

    /// True if no bins are stored.
    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    /// Amplitude in one (bin, polarization) mode; zero outside the window.
    pub fn amp(&self, bin: i64, pol: Pol) -> Complex64 {
        if bin < self.start_bin || bin >= self.end_bin() {
            return Complex64::ZERO;
        }
        self.amps[(bin - self.start_bin) as usize][pol.index()]
    }

    /// Iterate over stored bins as `(bin, [h, v])`.
    pub fn bins(&self) -> impl Iterator<Item = (i64, &[Complex64; 2])> + '_ {
        self.amps.iter().enumerate().map(move |(i, a)| (self.start_bin + i as i64, a))
    }

    /// Optical power in one bin, both polarizations: |h|^2 + |v|^2.
    pub fn bin_power(&self, bin: i64) -> f64 {
        if bin < self.start_bin || bin >= self.end_bin() {
            return 0.0;
        }
        let a = &self.amps[(bin - self.start_bin) as usize];
        a[0].norm_sqr() + a[1].norm_sqr()
    }

    /// Total energy in photons: sum of |amplitude|^2 over all modes.
    pub fn total_energy(&self) -> f64 {
        self.amps.iter().map(|a| a[0].norm_sqr() + a[1].norm_sqr()).sum()
    }

    /// The bin with the highest power, with that power. Ties resolve to the
    /// earliest bin; `None` for a state with no stored bins.
    pub fn peak_bin(&self) -> Option<(i64, f64)> {
        let mut best: Option<(i64, f64)> = None;
        for (t, a) in self.bins() {
            let p = a[0].norm_sqr() + a[1].norm_sqr();
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((t, p));
            }
        }
        best
    }

    /// Translate the whole state by `delta` bins.
    pub fn shift(&self, delta: i64) -> Self {
        FieldState { start_bin: self.start_bin + delta, amps: self.amps.clone() }
    }

    /// Inner product `sum conj(self) * other` over aligned (bin, pol) modes.
    pub fn overlap(&self, other: &FieldState) -> Complex64 {
        let lo = self.start_bin.max(other.start_bin);
        let hi = self.end_bin().min(other.end_bin());
        let mut acc = Complex64::ZERO;
        for bin in lo..hi {
            for pol in [Pol::H, Pol::V] {
                acc += self.amp(bin, pol).conj() * other.amp(bin, pol);
            }
        }
        acc
    }

    /// Multiply every amplitude by a complex factor.
    pub fn scaled(&self, factor: Complex64) -> Self {
        let amps = self.amps.iter().map(|a| [a[0] * factor, a[1] * factor]).collect();
        FieldState { start_bin: self.start_bin, amps }
    }

    /// Coherent sum of two states over the union of their windows.
    pub fn superpose(&self, other: &FieldState) -> Self {
        if self.is_empty() {
            return other.clone();
        }
        if other.is_empty() {
            return self.clone();
        }
        let start = self.start_bin.min(other.start_bin);
        let end = self.end_bin().max(other.end_bin());
        let mut amps = vec![[Complex64::ZERO; 2]; (end - start) as usize];
        for (t, a) in self.bins() {
            let i = (t - start) as usize;
            amps[i][0] += a[0];
            amps[i][1] += a[1];
        }
        for (t, a) in other.bins() {
            let i = (t - start) as usize;
            amps[i][0] += a[0];
            amps[i][1] += a[1];
        }
        FieldState { start_bin: start, amps }
    }

    /// Trim zero-energy bins from both ends of the window. A state with no
    /// energy anywhere collapses to the designated empty state.
    pub fn normalize_window(&self) -> Self {
        let occupied = |a: &[Complex64; 2]| a[0].norm_sqr() + a[1].norm_sqr() > 0.0;
        let Some(first) = self.amps.iter().position(occupied) else {
            return FieldState::empty();
        };
        let last = self.amps.iter().rposition(occupied).unwrap();
        FieldState {
            start_bin: self.start_bin + first as i64,
            amps: self.amps[first..=last].to_vec(),
        }
    }

    /// Apply one polarization transform to every bin. Energy is preserved
    /// because the transform is unitary by construction.
    pub fn apply_uniform(&self, t: &PolTransform) -> Self {
        let amps = self
            .amps
            .iter()
            .map(|a| {
                let (h, v) = t.apply_pair(a[0], a[1]);
                [h, v]
            })
            .collect();
        FieldState { start_bin: self.start_bin, amps }
    }

    /// Exchange H and V amplitudes in every bin the schedule marks SWAP.
    pub fn apply_schedule(&self, s: &SwitchSchedule) -> Self {
        let mut out = self.clone();
        for bin in s.swap_bins() {
            if bin >= out.start_bin && bin < out.end_bin() {
                let i = (bin - out.start_bin) as usize;
                out.amps[i].swap(0, 1);
            }
        }
        out
    }

    /// Delay the horizontal component by `t_bins` relative to the vertical
    /// one, multiplying each delayed amplitude by `e^{i phase_error}`. The
    /// window grows by `t_bins` at the late end.
    pub fn apply_pol_delay(&self, t_bins: u64, phase_error: f64) -> Result<Self, FieldError> {
        if t_bins == 0 {
            return Err(FieldError::ZeroDelay);
        }
        if self.is_empty() {
            return Ok(self.clone());
        }
        let t = t_bins as usize;
        let phase = Complex64::from_polar(1.0, phase_error);
        let mut amps = vec![[Complex64::ZERO; 2]; self.amps.len() + t];
        for (i, a) in self.amps.iter().enumerate() {
            amps[i + t][0] = a[0] * phase;
            amps[i][1] = a[1];
        }
        Ok(FieldState { start_bin: self.start_bin, amps })
    }

    /// Advance the horizontal component by `t_bins`, multiplying each moved
    /// amplitude by `e^{i phase}`. `apply_pol_delay(T, f)` followed by
    /// `apply_pol_advance(T, -f)` restores the state exactly.
    pub fn apply_pol_advance(&self, t_bins: u64, phase: f64) -> Result<Self, FieldError> {
        if t_bins == 0 {
            return Err(FieldError::ZeroDelay);
        }
        if self.is_empty() {
            return Ok(self.clone());
        }
        let t = t_bins as usize;
        let ph = Complex64::from_polar(1.0, phase);
        let mut amps = vec![[Complex64::ZERO; 2]; self.amps.len() + t];
        for (i, a) in self.amps.iter().enumerate() {
            amps[i][0] = a[0] * ph;
            amps[i + t][1] = a[1];
        }
        Ok(FieldState { start_bin: self.start_bin - t as i64, amps })
    }

    /// Debug serialization: `{start_bin, bins: [{t, h: [re, im], v: [re, im]}]}`
    /// with bins sorted by `t` and only nonzero bins emitted.
    pub fn to_debug_json(&self) -> String {
        let bins: Vec<BinJson> = self
            .bins()
            .filter(|(_, a)| a[0].norm_sqr() + a[1].norm_sqr() > 0.0)
            .map(|(t, a)| BinJson { t, h: [a[0].re, a[0].im], v: [a[1].re, a[1].im] })
            .collect();
        let doc = FieldStateJson { start_bin: self.start_bin, bins };
        serde_json::to_string(&doc).expect("field state serialization cannot fail")
    }
}

#[derive(Serialize, Deserialize)]
struct FieldStateJson {
    start_bin: i64,
    bins: Vec<BinJson>,
}

#[derive(Serialize, Deserialize)]
struct BinJson {
    t: i64,
    h: [f64; 2],
    v: [f64; 2],
}

/// A 2x2 unitary acting on the (H, V) amplitude pair of a bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolTransform {
    u: [[Complex64; 2]; 2],
}

impl PolTransform {
    /// Validate unitarity (`u†u = I` within [`UNITARITY_TOL`] elementwise)
    /// and wrap the matrix.
    pub fn new(u: [[Complex64; 2]; 2]) -> Result<Self, FieldError> {
        let mut max_dev: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                // (u†u)_ij = sum_k conj(u_ki) u_kj
                let e: Complex64 = u.iter().map(|row| row[i].conj() * row[j]).sum();
                let target = if i == j { Complex64::ONE } else { Complex64::ZERO };
                max_dev = max_dev.max((e - target).norm());
            }
        }
        if max_dev > UNITARITY_TOL {
            return Err(FieldError::NonUnitary { max_dev });
        }
        Ok(PolTransform { u })
    }

    pub fn identity() -> Self {
        PolTransform {
            u: [[Complex64::ONE, Complex64::ZERO], [Complex64::ZERO, Complex64::ONE]],
        }
    }

    /// The waveplate stage used throughout both receivers:
    /// `R = (1/sqrt 2) [[1, -1], [1, 1]]` in (H, V) ordering. It maps the
    /// +45 degree diagonal to V and the -45 degree diagonal to H.
    pub fn diag_to_rect() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let re = |x: f64| Complex64::new(x, 0.0);
        PolTransform { u: [[re(s), re(-s)], [re(s), re(s)]] }
    }

    /// Conjugate transpose; the inverse, since the matrix is unitary.
    pub fn inverse(&self) -> Self {
        let u = &self.u;
        PolTransform {
            u: [[u[0][0].conj(), u[1][0].conj()], [u[0][1].conj(), u[1][1].conj()]],
        }
    }

    pub fn matrix(&self) -> &[[Complex64; 2]; 2] {
        &self.u
    }

    /// Apply to one (H, V) amplitude pair.
    pub fn apply_pair(&self, h: Complex64, v: Complex64) -> (Complex64, Complex64) {
        (
            self.u[0][0] * h + self.u[0][1] * v,
            self.u[1][0] * h + self.u[1][1] * v,
        )
    }
}

/// Per-bin polarization switching pattern: bins in the set are SWAP
/// (exchange H and V), all other bins are identity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SwitchSchedule {
    swaps: BTreeSet<i64>,
}

impl SwitchSchedule {
    pub fn empty() -> Self {
        SwitchSchedule::default()
    }

    pub fn from_swap_bins(bins: impl IntoIterator<Item = i64>) -> Self {
        SwitchSchedule { swaps: bins.into_iter().collect() }
    }

    pub fn mark_swap(&mut self, bin: i64) {
        self.swaps.insert(bin);
    }

    pub fn is_swap(&self, bin: i64) -> bool {
        self.swaps.contains(&bin)
    }

    /// Marked bins in ascending order.
    pub fn swap_bins(&self) -> impl Iterator<Item = i64> + '_ {
        self.swaps.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.swaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.swaps.is_empty()
    }

    /// The same pattern translated by `delta` bins.
    pub fn shifted(&self, delta: i64) -> Self {
        SwitchSchedule { swaps: self.swaps.iter().map(|b| b + delta).collect() }
    }
}
