//! Hadamard codewords and their BPSK pulse-train encoding.
//!
//! A codeword of length `2^m` is a row of the Sylvester-ordered Hadamard
//! matrix, identified bijectively with an m-bit string `b_{m-1}..b_1 b_0`.
//! Entry `t` of the row carries the sign `(-1)^{popcount(bits AND t)}`: bit
//! `b_k = 1` flips the sign whenever bit `k` of the time index is set.

use num_complex::Complex64;
use thiserror::Error;

use crate::field::FieldState;

/// Largest supported codeword-length exponent.
pub const MAX_ORDER_EXP: u32 = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("codeword length exponent m = {m} outside 1..={MAX_ORDER_EXP}")]
    OrderOutOfRange { m: u32 },
    #[error("bit pattern {bits} does not fit in m = {m} bits")]
    BitsOutOfRange { m: u32, bits: u32 },
    /// A detection position that does not correspond to any symbol.
    #[error("bin {bin} is not a symbol position (m = {m}, offset = {offset})")]
    NotASymbol { bin: i64, m: u32, offset: i64 },
}

/// One of the `2^m` Hadamard codewords of length `2^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Codeword {
    m: u32,
    bits: u32,
}

impl Codeword {
    pub fn new(m: u32, bits: u32) -> Result<Self, CodecError> {
        if m == 0 || m > MAX_ORDER_EXP {
            return Err(CodecError::OrderOutOfRange { m });
        }
        if (bits as u64) >= (1u64 << m) {
            return Err(CodecError::BitsOutOfRange { m, bits });
        }
        Ok(Codeword { m, bits })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Codeword length `2^m`; never zero.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u64 {
        1u64 << self.m
    }

    /// The +-1 sign vector: entry `t` is `(-1)^{popcount(bits AND t)}`, the
    /// Sylvester Hadamard row selected by `bits`.
    pub fn signs(&self) -> Vec<i8> {
        (0..self.len())
            .map(|t| {
                if (self.bits as u64 & t).count_ones() & 1 == 0 {
                    1
                } else {
                    -1
                }
            })
            .collect()
    }
}

impl std::fmt::Display for Codeword {
    /// Renders MSB-first: `b_{m-1}` is the leftmost character.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for k in (0..self.m).rev() {
            f.write_str(if self.bits >> k & 1 == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Per-pulse coherent amplitude of the BPSK constellation, in sqrt(photons).
/// `|alpha|^2` is the mean photon number per pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpskAmplitude {
    pub alpha: Complex64,
}

impl BpskAmplitude {
    pub fn new(alpha: Complex64) -> Self {
        BpskAmplitude { alpha }
    }

    /// Real amplitude with the given mean photon number per pulse.
    pub fn from_mean_photons(n: f64) -> Self {
        BpskAmplitude { alpha: Complex64::new(n.sqrt(), 0.0) }
    }

    pub fn mean_photons(&self) -> f64 {
        self.alpha.norm_sqr()
    }
}

/// Encode a codeword as a train of `2^m` V-polarized pulses in bins
/// `0..2^m`, pulse `t` carrying amplitude `sign_t * alpha`.
pub fn encode_bpsk(c: &Codeword, a: BpskAmplitude) -> FieldState {
    let amps = c
        .signs()
        .into_iter()
        .map(|s| [Complex64::ZERO, a.alpha * f64::from(s)])
        .collect();
    FieldState::from_bins(0, amps)
}

/// Map a detected bin back to the codeword whose PPM position it is.
/// Positions run from `offset` (bits 0) to `offset + 2^m - 1`.
pub fn decode_position(bin: i64, m: u32, offset: i64) -> Result<Codeword, CodecError> {
    if m == 0 || m > MAX_ORDER_EXP {
        return Err(CodecError::OrderOutOfRange { m });
    }
    let rel = bin - offset;
    if rel < 0 || rel >= (1i64 << m) {
        return Err(CodecError::NotASymbol { bin, m, offset });
    }
    Codeword::new(m, rel as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Pol;

    /// Independent oracle: build the Sylvester Hadamard matrix by recursive
    /// doubling H_{2n} = [[H_n, H_n], [H_n, -H_n]] and read off rows.
    fn sylvester_rows(m: u32) -> Vec<Vec<i8>> {
        let mut h = vec![vec![1i8]];
        for _ in 0..m {
            let n = h.len();
            let mut next = vec![vec![0i8; 2 * n]; 2 * n];
            for r in 0..n {
                for t in 0..n {
                    next[r][t] = h[r][t];
                    next[r][t + n] = h[r][t];
                    next[r + n][t] = h[r][t];
                    next[r + n][t + n] = -h[r][t];
                }
            }
            h = next;
        }
        h
    }

    /// Row index for a bit string under the doubling construction: appending
    /// a doubling level puts rows with b_{level} = 1 in the lower half, so
    /// the row index is just the bit string read as an integer.
    fn oracle_signs(m: u32, bits: u32) -> Vec<i8> {
        sylvester_rows(m)[bits as usize].clone()
    }

    #[test]
    fn all_zero_bits_is_all_plus() {
        let c = Codeword::new(3, 0).unwrap();
        assert_eq!(c.signs(), vec![1; 8]);
    }

    #[test]
    fn msb_set_splits_halves() {
        // Frozen from the recursive doubling oracle for m=3, bits=100.
        let c = Codeword::new(3, 0b100).unwrap();
        assert_eq!(c.signs(), vec![1, 1, 1, 1, -1, -1, -1, -1]);
        assert_eq!(c.signs(), oracle_signs(3, 0b100));
    }

    #[test]
    fn signs_match_sylvester_oracle_up_to_m6() {
        for m in 1..=6u32 {
            for bits in 0..(1u32 << m) {
                let c = Codeword::new(m, bits).unwrap();
                assert_eq!(c.signs(), oracle_signs(m, bits), "m={m} bits={bits}");
            }
        }
    }

    #[test]
    fn rows_are_orthogonal() {
        // Brute-force integer dot products over all pairs.
        for m in 1..=6u32 {
            let n = 1i64 << m;
            for a in 0..(1u32 << m) {
                let sa = Codeword::new(m, a).unwrap().signs();
                for b in 0..(1u32 << m) {
                    let sb = Codeword::new(m, b).unwrap().signs();
                    let dot: i64 = sa.iter().zip(&sb).map(|(&x, &y)| x as i64 * y as i64).sum();
                    assert_eq!(dot, if a == b { n } else { 0 }, "m={m} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn m2_self_products_are_four() {
        for bits in 0..4u32 {
            let s = Codeword::new(2, bits).unwrap().signs();
            let dot: i64 = s.iter().map(|&x| x as i64 * x as i64).sum();
            assert_eq!(dot, 4);
        }
    }

    #[test]
    fn encode_all_plus_row() {
        let c = Codeword::new(3, 0).unwrap();
        let s = encode_bpsk(&c, BpskAmplitude::from_mean_photons(1.0));
        assert_eq!(s.n_bins(), 8);
        assert!((s.total_energy() - 8.0).abs() < 1e-12);
        for t in 0..8 {
            assert_eq!(s.amp(t, Pol::V), Complex64::ONE);
            assert_eq!(s.amp(t, Pol::H), Complex64::ZERO);
        }
    }

    #[test]
    fn encode_m1_plus_minus() {
        let c = Codeword::new(1, 1).unwrap();
        let s = encode_bpsk(&c, BpskAmplitude::new(Complex64::ONE));
        assert_eq!(s.amp(0, Pol::V), Complex64::ONE);
        assert_eq!(s.amp(1, Pol::V), -Complex64::ONE);
    }

    #[test]
    fn encode_zero_amplitude_has_no_energy() {
        let c = Codeword::new(4, 9).unwrap();
        let s = encode_bpsk(&c, BpskAmplitude::new(Complex64::ZERO));
        assert_eq!(s.total_energy(), 0.0);
        assert!(s.normalize_window().is_empty());
    }

    #[test]
    fn uniform_power_over_codeword_span() {
        let c = Codeword::new(4, 0b1011).unwrap();
        let s = encode_bpsk(&c, BpskAmplitude::new(Complex64::new(0.3, -0.4)));
        let expected = 0.25;
        for t in 0..16 {
            assert!((s.bin_power(t) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn decode_position_roundtrip() {
        let offset = 7;
        assert_eq!(decode_position(offset, 3, offset).unwrap().bits(), 0);
        assert_eq!(decode_position(offset + 5, 3, offset).unwrap().bits(), 0b101);
        for m in 1..=8u32 {
            for bits in 0..(1u32 << m) {
                let c = decode_position(offset + bits as i64, m, offset).unwrap();
                assert_eq!(c.bits(), bits);
            }
        }
    }

    #[test]
    fn decode_position_out_of_range() {
        let offset = 3;
        for bad in [offset - 1, offset + 8] {
            match decode_position(bad, 3, offset) {
                Err(CodecError::NotASymbol { .. }) => {}
                other => panic!("expected NotASymbol, got {other:?}"),
            }
        }
    }

    #[test]
    fn codeword_validation() {
        assert!(matches!(Codeword::new(0, 0), Err(CodecError::OrderOutOfRange { .. })));
        assert!(matches!(Codeword::new(17, 0), Err(CodecError::OrderOutOfRange { .. })));
        assert!(matches!(Codeword::new(2, 4), Err(CodecError::BitsOutOfRange { .. })));
        assert!(Codeword::new(16, u16::MAX as u32).is_ok());
    }

    #[test]
    fn display_is_msb_first() {
        assert_eq!(Codeword::new(3, 0b101).unwrap().to_string(), "101");
        assert_eq!(Codeword::new(4, 1).unwrap().to_string(), "0001");
    }
}
