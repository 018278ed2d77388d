//! PSK constellation mapping and demapping.
//!
//! Bits are handled most-significant-bit first everywhere: byte `57` expands
//! to `0 0 1 1 1 0 0 1`. QPSK uses a fixed non-Gray table
//!
//! | bits | point  |
//! |------|--------|
//! | 00   | 1 + 0j |
//! | 01   | -1 + 0j|
//! | 10   | 0 + 1j |
//! | 11   | 0 - 1j |
//!
//! while 16PSK and 64PSK use the natural-binary rule `i -> exp(j 2 pi i / M)`
//! where `i` is the bit group read as an unsigned integer.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{ComplexSample, Error, Result};

/// Constellation points of QPSK indexed by the 2-bit group value.
const QPSK_POINTS: [ComplexSample; 4] = [
    ComplexSample::new(1.0, 0.0),
    ComplexSample::new(-1.0, 0.0),
    ComplexSample::new(0.0, 1.0),
    ComplexSample::new(0.0, -1.0),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PskScheme {
    Qpsk,
    #[serde(rename = "16psk")]
    Psk16,
    #[serde(rename = "64psk")]
    Psk64,
}

impl PskScheme {
    pub const ALL: [PskScheme; 3] = [PskScheme::Qpsk, PskScheme::Psk16, PskScheme::Psk64];

    /// Constellation size `M`.
    pub fn order(self) -> usize {
        match self {
            PskScheme::Qpsk => 4,
            PskScheme::Psk16 => 16,
            PskScheme::Psk64 => 64,
        }
    }

    /// `k = log2(M)`.
    pub fn bits_per_symbol(self) -> usize {
        self.order().trailing_zeros() as usize
    }

    /// Constellation point for a bit-group value in `0..M`.
    pub fn point(self, index: usize) -> ComplexSample {
        assert!(index < self.order(), "constellation index out of range");
        match self {
            PskScheme::Qpsk => QPSK_POINTS[index],
            _ => ComplexSample::from_polar(1.0, 2.0 * PI * index as f64 / self.order() as f64),
        }
    }

    pub fn points(self) -> Vec<ComplexSample> {
        (0..self.order()).map(|i| self.point(i)).collect()
    }

    /// Smallest distance between two distinct constellation points.
    pub fn min_distance(self) -> f64 {
        2.0 * (PI / self.order() as f64).sin()
    }

    /// Zero bits appended so that `n_bits` fills whole symbols.
    pub fn pad_bits(self, n_bits: usize) -> usize {
        let k = self.bits_per_symbol();
        (k - n_bits % k) % k
    }

    /// Number of symbols carrying `n_bytes` bytes, padding included.
    pub fn symbols_for_bytes(self, n_bytes: usize) -> usize {
        let bits = 8 * n_bytes;
        (bits + self.pad_bits(bits)) / self.bits_per_symbol()
    }

    pub fn name(self) -> &'static str {
        match self {
            PskScheme::Qpsk => "qpsk",
            PskScheme::Psk16 => "16psk",
            PskScheme::Psk64 => "64psk",
        }
    }
}

impl fmt::Display for PskScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PskScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" | "4psk" => Ok(PskScheme::Qpsk),
            "16psk" => Ok(PskScheme::Psk16),
            "64psk" => Ok(PskScheme::Psk64),
            _ => Err(Error::UnknownScheme(s.to_string())),
        }
    }
}

/// MSB-first bit expansion, one `0`/`1` per output element.
pub fn bytes_to_bits(data: &[u8]) -> Vec<u8> {
    data.iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
        .collect()
}

/// Packs MSB-first bits into bytes. Trailing bits that do not fill a byte are
/// dropped.
pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks_exact(8)
        .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | (b & 1)))
        .collect()
}

pub fn map_bits(bits: &[u8], scheme: PskScheme) -> Result<Vec<ComplexSample>> {
    let k = scheme.bits_per_symbol();
    if !bits.len().is_multiple_of(k) {
        return Err(Error::BitLength {
            len: bits.len(),
            multiple: k,
        });
    }
    if let Some((i, &b)) = bits.iter().enumerate().find(|(_, &b)| b > 1) {
        return Err(Error::InvalidBit(b, i));
    }
    Ok(bits
        .chunks_exact(k)
        .map(|group| {
            let index = group.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            scheme.point(index)
        })
        .collect())
}

const TIE_EPS: f64 = 1e-12;

/// Hard-decision demapping to the nearest constellation point. Distances
/// within `1e-12` count as ties, which go to the lowest constellation index.
pub fn demap_symbols(samples: &[ComplexSample], scheme: PskScheme) -> Vec<u8> {
    let points = scheme.points();
    let k = scheme.bits_per_symbol();
    let mut bits = Vec::with_capacity(samples.len() * k);
    for s in samples {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, p) in points.iter().enumerate() {
            let d = (s - p).norm_sqr();
            if d < best_dist - TIE_EPS {
                best = i;
                best_dist = d;
            }
        }
        bits.extend((0..k).rev().map(|i| ((best >> i) & 1) as u8));
    }
    bits
}

/// Symbols for a byte payload plus the number of zero pad bits appended to
/// complete the last symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulatedFrame {
    pub symbols: Vec<ComplexSample>,
    pub pad_bits: usize,
}

pub fn modulate_bytes(data: &[u8], scheme: PskScheme) -> ModulatedFrame {
    let mut bits = bytes_to_bits(data);
    let pad_bits = scheme.pad_bits(bits.len());
    bits.resize(bits.len() + pad_bits, 0);
    let symbols = map_bits(&bits, scheme).expect("padded bit stream fills whole symbols");
    ModulatedFrame { symbols, pad_bits }
}

/// Demaps `samples` and returns the first `n_bytes` bytes, discarding padding.
pub fn demodulate_bytes(samples: &[ComplexSample], scheme: PskScheme, n_bytes: usize) -> Vec<u8> {
    let mut bits = demap_symbols(samples, scheme);
    bits.truncate(8 * n_bytes);
    bits_to_bytes(&bits)
}
