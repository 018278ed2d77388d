//! Barker-13 preamble insertion and correlation-based frame synchronization.

use crate::pulse::{fir_filter, RrcFilter};
use crate::{ComplexSample, Error, Result};

/// Barker-13: `+ + + + + - - + + - + - +`.
pub const BARKER13: [f64; 13] = [1.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0];

/// Detection requires the correlation peak to reach this multiple of the
/// median correlation magnitude.
pub const DETECTION_RATIO: f64 = 5.0;

/// Correlation magnitudes within this relative distance of the maximum count
/// as the peak; the earliest such lag wins.
pub const PEAK_TIE_TOLERANCE: f64 = 1e-3;

/// Chip amplitude of the preamble. Unit-power data following the preamble
/// raises the median correlation, so the chips are sent at twice the data
/// amplitude to keep the peak well clear of [`DETECTION_RATIO`].
pub const PREAMBLE_AMPLITUDE: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Preamble {
    pub code: Vec<f64>,
    pub samples: Vec<ComplexSample>,
}

/// Aperiodic autocorrelation of a real sequence at lags `0..len`.
pub fn autocorrelation(code: &[f64]) -> Vec<f64> {
    (0..code.len())
        .map(|lag| code.iter().zip(&code[lag..]).map(|(a, b)| a * b).sum())
        .collect()
}

/// `|sum_n rx[lag + n] conj(reference[n])|` for every lag at which
/// `reference` fits inside `rx`.
pub fn correlation_magnitudes(rx: &[ComplexSample], reference: &[ComplexSample]) -> Vec<f64> {
    if reference.is_empty() || rx.len() < reference.len() {
        return Vec::new();
    }
    let conj: Vec<ComplexSample> = reference.iter().map(|r| r.conj()).collect();
    (0..=rx.len() - reference.len())
        .map(|lag| {
            rx[lag..lag + conj.len()]
                .iter()
                .zip(&conj)
                .map(|(a, b)| a * b)
                .sum::<ComplexSample>()
                .norm()
        })
        .collect()
}

fn peak_index(mags: &[f64]) -> (usize, f64) {
    let max = mags.iter().copied().fold(0.0f64, f64::max);
    let floor = max * (1.0 - PEAK_TIE_TOLERANCE);
    let idx = mags.iter().position(|&m| m >= floor).unwrap_or(0);
    (idx, max)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl Preamble {
    /// Barker-13 as BPSK `±A + 0j`, shaped by `pulse`.
    pub fn new(pulse: &RrcFilter) -> Self {
        let symbols: Vec<ComplexSample> = BARKER13
            .iter()
            .map(|&b| ComplexSample::new(PREAMBLE_AMPLITUDE * b, 0.0))
            .collect();
        Preamble {
            code: BARKER13.to_vec(),
            samples: pulse.shape(&symbols),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn attach(&self, frame: &[ComplexSample]) -> Vec<ComplexSample> {
        let mut out = Vec::with_capacity(self.samples.len() + frame.len());
        out.extend_from_slice(&self.samples);
        out.extend_from_slice(frame);
        out
    }

    /// Start index of the preamble in `rx`.
    pub fn locate(&self, rx: &[ComplexSample]) -> Result<usize> {
        if rx.len() < self.samples.len() {
            return Err(Error::InvalidParameter(format!(
                "record of {} samples is shorter than the {}-sample preamble",
                rx.len(),
                self.samples.len()
            )));
        }
        let mags = correlation_magnitudes(rx, &self.samples);
        let (idx, peak) = peak_index(&mags);
        let threshold = DETECTION_RATIO * median(&mags);
        if !(peak > 0.0 && peak >= threshold) {
            return Err(Error::NoFrameFound { peak, threshold });
        }
        Ok(idx)
    }

    /// Lag of the correlation peak introduced by an FIR channel alone. This is
    /// the offset between the true arrival time and what [`Preamble::locate`]
    /// reports on the channel output.
    pub fn channel_lag(&self, taps: &[ComplexSample]) -> usize {
        let through = fir_filter(&self.samples, taps).expect("channel taps are nonempty");
        peak_index(&correlation_magnitudes(&through, &self.samples)).0
    }

    /// Trims both records so sample `n` of the returned `x` is the channel
    /// input that produced sample `n` of the returned `y`, then equalizes the
    /// lengths. `channel_lag` is the known FIR correlation lag
    /// (see [`Preamble::channel_lag`]).
    pub fn align(
        &self,
        tx_record: &[ComplexSample],
        rx_record: &[ComplexSample],
        channel_lag: usize,
    ) -> Result<(Vec<ComplexSample>, Vec<ComplexSample>)> {
        let tx_start = self.locate(tx_record)?;
        let located = self.locate(rx_record)?;
        let rx_start = located.checked_sub(channel_lag).ok_or_else(|| {
            Error::InvalidParameter(format!("preamble at {located} precedes channel lag {channel_lag}"))
        })?;
        let len = (tx_record.len() - tx_start).min(rx_record.len() - rx_start);
        Ok((
            tx_record[tx_start..tx_start + len].to_vec(),
            rx_record[rx_start..rx_start + len].to_vec(),
        ))
    }
}
