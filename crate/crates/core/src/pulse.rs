//! Up-sampling, root-raised-cosine shaping, matched filtering and decimation.
//!
//! All filtering is full linear convolution. A filter with `L` taps delays
//! the signal by `(L - 1) / 2` samples, so a shaping filter followed by its
//! matched filter puts symbol `n` at output index `n * sps + (L - 1)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::{ComplexSample, Error, Result};

/// Parameters of the shaping filter shared by transmitter and receiver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseConfig {
    pub sps: usize,
    pub span: usize,
    pub beta: f64,
}

impl Default for PulseConfig {
    /// 4 samples per symbol, 64-symbol support, roll-off 0.35.
    fn default() -> Self {
        PulseConfig {
            sps: 4,
            span: 64,
            beta: 0.35,
        }
    }
}

impl PulseConfig {
    pub fn design(&self) -> Result<RrcFilter> {
        design_rrc(self.sps, self.span, self.beta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RrcFilter {
    pub sps: usize,
    pub span: usize,
    pub beta: f64,
    pub taps: Vec<f64>,
}

impl RrcFilter {
    pub fn config(&self) -> PulseConfig {
        PulseConfig {
            sps: self.sps,
            span: self.span,
            beta: self.beta,
        }
    }

    /// Group delay in samples.
    pub fn delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Peak of the cascaded raised-cosine response, `sum(taps^2)`.
    pub fn matched_gain(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    /// Zero-stuff and shape a symbol stream.
    pub fn shape(&self, symbols: &[ComplexSample]) -> Vec<ComplexSample> {
        let up = upsample(symbols, self.sps).expect("filter sps is at least 1");
        fir_filter(&up, &self.taps).expect("filter taps are nonempty")
    }

    /// Matched-filter a shaped stream and sample `n_symbols` symbol instants.
    /// Output is scaled so that a noiseless round trip returns the original
    /// symbols.
    pub fn recover(&self, samples: &[ComplexSample], n_symbols: usize) -> Vec<ComplexSample> {
        let filtered = fir_filter(samples, &self.taps).expect("filter taps are nonempty");
        let gain = self.matched_gain();
        let start = 2 * self.delay();
        (0..n_symbols)
            .map(|n| {
                filtered
                    .get(start + n * self.sps)
                    .copied()
                    .unwrap_or_default()
                    / gain
            })
            .collect()
    }
}

pub fn upsample(symbols: &[ComplexSample], sps: usize) -> Result<Vec<ComplexSample>> {
    if sps < 1 {
        return Err(Error::InvalidParameter("samples per symbol must be at least 1".into()));
    }
    let mut out = vec![ComplexSample::default(); symbols.len() * sps];
    for (n, s) in symbols.iter().enumerate() {
        out[n * sps] = *s;
    }
    Ok(out)
}

/// Root-raised-cosine impulse response at `t` symbol periods, unnormalized,
/// with the removable singularities at `t = 0` and `|t| = 1 / (4 beta)` filled
/// by their limits.
pub fn rrc_response(t: f64, beta: f64) -> f64 {
    const EPS: f64 = 1e-9;
    if t.abs() < EPS {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if (t.abs() - 1.0 / (4.0 * beta)).abs() < EPS {
        let arg = PI / (4.0 * beta);
        return beta * FRAC_1_SQRT_2
            * ((1.0 + 2.0 / PI) * arg.sin() + (1.0 - 2.0 / PI) * arg.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// `span * sps + 1` taps, symmetric about the center, normalized so the
/// center tap is 1.
pub fn design_rrc(sps: usize, span: usize, beta: f64) -> Result<RrcFilter> {
    if sps < 1 {
        return Err(Error::InvalidParameter("samples per symbol must be at least 1".into()));
    }
    if span < 2 {
        return Err(Error::InvalidParameter(format!("filter span {span} is below 2 symbols")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!("roll-off {beta} outside (0, 1]")));
    }
    let len = span * sps + 1;
    let center = (len - 1) / 2;
    let peak = rrc_response(0.0, beta);
    let mut taps = vec![0.0; len];
    for i in 0..=center {
        let t = (center - i) as f64 / sps as f64;
        let v = rrc_response(t, beta) / peak;
        taps[i] = v;
        taps[len - 1 - i] = v;
    }
    Ok(RrcFilter {
        sps,
        span,
        beta,
        taps,
    })
}

/// Full linear convolution `y[n] = sum_k h[k] x[n - k]`, length
/// `len(x) + len(h) - 1`.
pub fn fir_filter<T>(x: &[ComplexSample], taps: &[T]) -> Result<Vec<ComplexSample>>
where
    T: Copy,
    ComplexSample: Mul<T, Output = ComplexSample>,
{
    if taps.is_empty() {
        return Err(Error::InvalidParameter("filter taps are empty".into()));
    }
    if x.is_empty() {
        return Ok(vec![ComplexSample::default(); taps.len() - 1]);
    }
    let mut y = vec![ComplexSample::default(); x.len() + taps.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        if xi == ComplexSample::default() {
            continue;
        }
        for (out, &h) in y[i..i + taps.len()].iter_mut().zip(taps) {
            *out += xi * h;
        }
    }
    Ok(y)
}

pub fn decimate(x: &[ComplexSample], sps: usize, offset: usize) -> Result<Vec<ComplexSample>> {
    if sps < 1 || offset >= sps {
        return Err(Error::InvalidParameter(format!(
            "decimation offset {offset} outside 0..{sps}"
        )));
    }
    Ok(x.iter().skip(offset).step_by(sps).copied().collect())
}
