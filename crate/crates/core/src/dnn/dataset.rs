use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::{ComplexSample, Error, Result};

/// How complex windows enter the real-valued network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureMode {
    /// Interleaved `I, Q` of every window sample, `2K` inputs per network.
    JointIq,
    /// The I-network sees only I values and the Q-network only Q values,
    /// `K` inputs each.
    PerComponent,
}

impl FeatureMode {
    pub fn in_dim(self, window: usize) -> usize {
        match self {
            FeatureMode::JointIq => 2 * window,
            FeatureMode::PerComponent => window,
        }
    }
}

/// Which output component a network regresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Component {
    I,
    Q,
}

impl Component {
    pub fn of(self, v: ComplexSample) -> f64 {
        match self {
            Component::I => v.re,
            Component::Q => v.im,
        }
    }
}

/// Sliding-window regression data. Row `r` holds source samples
/// `r .. r + K` (oldest first) and `targets[r]` is the channel output at the
/// window's last sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SlidingDataset {
    pub window: usize,
    pub inputs: Matrix,
    pub targets: Vec<f64>,
}

impl SlidingDataset {
    /// Windows a real-valued stream directly.
    pub fn from_real(x: &[f64], y: &[f64], window: usize) -> Result<Self> {
        check_lengths(x.len(), y.len(), window)?;
        let rows = x.len() - window + 1;
        let mut data = Vec::with_capacity(rows * window);
        for r in 0..rows {
            data.extend_from_slice(&x[r..r + window]);
        }
        Ok(SlidingDataset {
            window,
            inputs: Matrix {
                rows,
                cols: window,
                data,
            },
            targets: y[window - 1..].to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Rows `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> SlidingDataset {
        let cols = self.inputs.cols;
        SlidingDataset {
            window: self.window,
            inputs: Matrix {
                rows: range.len(),
                cols,
                data: self.inputs.data[range.start * cols..range.end * cols].to_vec(),
            },
            targets: self.targets[range].to_vec(),
        }
    }
}

fn check_lengths(x: usize, y: usize, window: usize) -> Result<()> {
    if window < 1 {
        return Err(Error::InvalidParameter("window length must be at least 1".into()));
    }
    if x != y {
        return Err(Error::LengthMismatch { left: x, right: y });
    }
    if x < window {
        return Err(Error::InvalidParameter(format!(
            "{x} samples are fewer than the window length {window}"
        )));
    }
    Ok(())
}

/// Network input for one window of complex samples, oldest first.
pub fn window_features(history: &[ComplexSample], mode: FeatureMode, component: Component) -> Vec<f64> {
    let mut out = Vec::with_capacity(mode.in_dim(history.len()));
    push_features(history, mode, component, &mut out);
    out
}

fn push_features(history: &[ComplexSample], mode: FeatureMode, component: Component, out: &mut Vec<f64>) {
    match mode {
        FeatureMode::JointIq => {
            for v in history {
                out.push(v.re);
                out.push(v.im);
            }
        }
        FeatureMode::PerComponent => out.extend(history.iter().map(|v| component.of(*v))),
    }
}

/// Windows aligned complex pairs into a dataset for one output component.
pub fn build_dataset(
    x: &[ComplexSample],
    y: &[ComplexSample],
    window: usize,
    mode: FeatureMode,
    component: Component,
) -> Result<SlidingDataset> {
    check_lengths(x.len(), y.len(), window)?;
    let rows = x.len() - window + 1;
    let cols = mode.in_dim(window);
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        push_features(&x[r..r + window], mode, component, &mut data);
    }
    Ok(SlidingDataset {
        window,
        inputs: Matrix { rows, cols, data },
        targets: y[window - 1..].iter().map(|v| component.of(*v)).collect(),
    })
}
