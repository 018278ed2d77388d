//! Baseband testbed for digital self-interference cancellation in in-band
//! full-duplex radios.
//!
//! The transmit chain maps bytes onto PSK symbols ([`modem`]), up-samples and
//! pulse-shapes them ([`pulse`]) and prefixes a Barker preamble ([`sync`]).
//! The simulated self-interference channel ([`channel`]) replaces the
//! over-the-air path. A small feed-forward network ([`dnn`]) learns that
//! channel from probe data, and [`canceller`] uses it to subtract the
//! self-interference from the received mixture. [`harness`] drives the
//! experiments and writes CSV reports.

pub mod canceller;
pub mod channel;
pub mod dnn;
mod error;
pub mod harness;
pub mod modem;
pub mod pulse;
pub mod sync;

pub use error::{Error, Result};

/// One baseband I/Q sample.
pub type ComplexSample = num_complex::Complex64;

/// Complex FIR coefficients `h[k]` of a channel or estimator.
pub type TapVector = Vec<ComplexSample>;

/// Mean power `mean(|x|^2)` of a sample stream, `0.0` for an empty one.
pub fn power(x: &[ComplexSample]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}
