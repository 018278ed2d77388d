//! Probe, collect, train and cancel.
//!
//! A [`CancellerState`] starts in [`Phase::Probing`]. It sends random probe
//! frames through the self-interference path, aligns the transmitted and
//! received records on the Barker preamble, fits an estimator of the channel
//! and moves to [`Phase::Trained`]. Afterwards it estimates the
//! self-interference from the known transmit samples and subtracts it from
//! the received mixture at sample rate.

mod oracle;
mod record;

pub use oracle::{ls_fir_oracle, LS_REGULARIZATION};
pub use record::Record;

use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, ScenarioConfig};
use crate::dnn::{self, build_dataset, Component, FeatureMode, Matrix, MlpParams, TrainConfig};
use crate::modem::{demodulate_bytes, modulate_bytes, PskScheme};
use crate::pulse::{PulseConfig, RrcFilter};
use crate::sync::Preamble;
use crate::{power, ComplexSample, Error, Result, TapVector};

/// Fraction of aligned probe samples used for training; the rest is held out.
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorMode {
    JointIq,
    /// Separate I-to-I and Q-to-Q networks; selected as `paper-literal`.
    #[serde(rename = "paper-literal")]
    PerComponent,
    Oracle,
}

impl EstimatorMode {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorMode::JointIq => "joint-iq",
            EstimatorMode::PerComponent => "paper-literal",
            EstimatorMode::Oracle => "oracle",
        }
    }

    fn code(self) -> f64 {
        match self {
            EstimatorMode::JointIq => 0.0,
            EstimatorMode::PerComponent => 1.0,
            EstimatorMode::Oracle => 2.0,
        }
    }

    fn from_code(code: f64) -> Option<Self> {
        match code as i64 {
            0 => Some(EstimatorMode::JointIq),
            1 => Some(EstimatorMode::PerComponent),
            2 => Some(EstimatorMode::Oracle),
            _ => None,
        }
    }
}

impl FromStr for EstimatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint-iq" => Ok(EstimatorMode::JointIq),
            "paper-literal" => Ok(EstimatorMode::PerComponent),
            "oracle" => Ok(EstimatorMode::Oracle),
            _ => Err(Error::InvalidParameter(format!(
                "unknown mode {s:?}; valid: joint-iq, paper-literal, oracle"
            ))),
        }
    }
}

/// Trained self-interference estimator.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq)]
pub enum SiModel {
    Network {
        features: FeatureMode,
        i_net: MlpParams,
        q_net: MlpParams,
    },
    Oracle {
        taps: TapVector,
    },
}

impl SiModel {
    pub fn mode(&self) -> EstimatorMode {
        match self {
            SiModel::Network {
                features: FeatureMode::JointIq,
                ..
            } => EstimatorMode::JointIq,
            SiModel::Network { .. } => EstimatorMode::PerComponent,
            SiModel::Oracle { .. } => EstimatorMode::Oracle,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Probing,
    Trained,
}

/// Transmitted and received probe records plus the FIR correlation lag of the
/// probed channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeRecords {
    pub tx: Record,
    pub rx: Record,
    pub channel_lag: usize,
}

/// Per-network loss histories from [`CancellerState::train`]. Empty for the
/// oracle.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainOutcome {
    pub i_history: Vec<f64>,
    pub q_history: Vec<f64>,
}

impl TrainOutcome {
    /// Final complex per-sample loss, `I + Q`.
    pub fn final_loss(&self) -> Option<f64> {
        Some(self.i_history.last()? + self.q_history.last()?)
    }
}

#[derive(Clone, Debug)]
pub struct CancellerState {
    pub window: usize,
    pub scheme: PskScheme,
    pub pulse_cfg: PulseConfig,
    pub si_lag: usize,
    pub model: Option<SiModel>,
    pulse: RrcFilter,
    preamble: Preamble,
}

impl PartialEq for CancellerState {
    fn eq(&self, other: &Self) -> bool {
        self.window == other.window
            && self.scheme == other.scheme
            && self.pulse_cfg == other.pulse_cfg
            && self.si_lag == other.si_lag
            && self.model == other.model
    }
}

/// Per-row complex residual statistics on held-out probe data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoldoutEval {
    pub si_power: f64,
    pub residual_power: f64,
    pub max_abs_residual: f64,
    pub cancellation_db: f64,
}

impl CancellerState {
    pub fn new(scheme: PskScheme, pulse_cfg: PulseConfig, window: usize) -> Result<Self> {
        if window < 1 {
            return Err(Error::InvalidParameter("window length must be at least 1".into()));
        }
        let pulse = pulse_cfg.design()?;
        let preamble = Preamble::new(&pulse);
        Ok(CancellerState {
            window,
            scheme,
            pulse_cfg,
            si_lag: 0,
            model: None,
            pulse,
            preamble,
        })
    }

    pub fn phase(&self) -> Phase {
        if self.model.is_some() {
            Phase::Trained
        } else {
            Phase::Probing
        }
    }

    pub fn pulse(&self) -> &RrcFilter {
        &self.pulse
    }

    pub fn preamble(&self) -> &Preamble {
        &self.preamble
    }

    /// Modulated, shaped and preamble-prefixed samples for a byte payload.
    pub fn transmit_frame(&self, data: &[u8]) -> Vec<ComplexSample> {
        let symbols = modulate_bytes(data, self.scheme).symbols;
        self.preamble.attach(&self.pulse.shape(&symbols))
    }

    /// Sends `n_bytes` random bytes through the self-interference path only.
    /// The received record has `len(tx) + len(si_taps) - 1 + delay` samples.
    pub fn probe(&self, cfg: &ScenarioConfig, n_bytes: usize, rng: &mut impl Rng) -> Result<ProbeRecords> {
        if n_bytes < 1 {
            return Err(Error::InvalidParameter("probe needs at least one byte".into()));
        }
        let data: Vec<u8> = (0..n_bytes).map(|_| rng.random()).collect();
        let tx = self.transmit_frame(&data);
        let rx = apply_channel(&tx, cfg, rng)?;
        let meta = |samples| Record {
            samples,
            sps: self.pulse.sps,
            scheme: self.scheme,
            seed: cfg.seed,
        };
        Ok(ProbeRecords {
            channel_lag: self.preamble.channel_lag(&cfg.si_taps),
            tx: meta(tx),
            rx: meta(rx),
        })
    }

    /// Sample-aligned `(x, y)` pairs from probe records. Remembers the channel
    /// lag for later cancellation.
    pub fn collect(&mut self, records: &ProbeRecords) -> Result<(Vec<ComplexSample>, Vec<ComplexSample>)> {
        self.si_lag = records.channel_lag;
        self.preamble.align(&records.tx.samples, &records.rx.samples, records.channel_lag)
    }

    /// Fits the estimator on aligned pairs and enters the trained phase.
    /// The I and Q networks train on separate threads with seeds derived from
    /// `train_cfg.seed`.
    pub fn train(
        &mut self,
        x: &[ComplexSample],
        y: &[ComplexSample],
        mode: EstimatorMode,
        train_cfg: &TrainConfig,
    ) -> Result<TrainOutcome> {
        let features = match mode {
            EstimatorMode::Oracle => {
                let taps = ls_fir_oracle(x, y, self.window)?;
                self.model = Some(SiModel::Oracle { taps });
                return Ok(TrainOutcome::default());
            }
            EstimatorMode::JointIq => FeatureMode::JointIq,
            EstimatorMode::PerComponent => FeatureMode::PerComponent,
        };
        let fit = |component: Component, seed: u64| -> Result<(MlpParams, Vec<f64>)> {
            let ds = build_dataset(x, y, self.window, features, component)?;
            dnn::train(&ds, &TrainConfig { seed, ..*train_cfg })
        };
        let (i_res, q_res) = std::thread::scope(|s| {
            let q = s.spawn(|| fit(Component::Q, train_cfg.seed.wrapping_mul(2).wrapping_add(1)));
            let i = fit(Component::I, train_cfg.seed.wrapping_mul(2));
            (i, q.join().expect("Q-network training thread panicked"))
        });
        let (i_net, i_history) = i_res?;
        let (q_net, q_history) = q_res?;
        self.model = Some(SiModel::Network {
            features,
            i_net,
            q_net,
        });
        Ok(TrainOutcome { i_history, q_history })
    }

    /// Self-interference estimate at the newest sample of `history`
    /// (`window` samples, oldest first).
    pub fn estimate_si(&self, history: &[ComplexSample]) -> Result<ComplexSample> {
        let model = self.model.as_ref().ok_or(Error::Untrained)?;
        if history.len() != self.window {
            return Err(Error::LengthMismatch {
                left: history.len(),
                right: self.window,
            });
        }
        Ok(match model {
            SiModel::Oracle { taps } => taps.iter().zip(history.iter().rev()).map(|(h, x)| h * x).sum(),
            SiModel::Network { features, i_net, q_net } => {
                let fi = dnn::window_features(history, *features, Component::I);
                let i = i_net.predict(&fi)?;
                let q = match features {
                    FeatureMode::JointIq => q_net.predict(&fi)?,
                    FeatureMode::PerComponent => {
                        q_net.predict(&dnn::window_features(history, *features, Component::Q))?
                    }
                };
                ComplexSample::new(i, q)
            }
        })
    }

    /// Estimates at every index of `x`, treating samples before the stream
    /// as zero.
    pub fn estimate_stream(&self, x: &[ComplexSample]) -> Result<Vec<ComplexSample>> {
        if self.model.is_none() {
            return Err(Error::Untrained);
        }
        let mut padded = vec![ComplexSample::default(); self.window - 1];
        padded.extend_from_slice(x);
        padded
            .windows(self.window)
            .map(|w| self.estimate_si(w))
            .collect()
    }

    /// Residual statistics over the held-out tail of aligned probe pairs.
    pub fn evaluate_holdout(&self, x: &[ComplexSample], y: &[ComplexSample]) -> Result<HoldoutEval> {
        let split = holdout_split(x.len());
        let y_hat = self.estimate_stream(x)?;
        let residual = cancel(&y[split..], &y_hat[split..])?;
        let si_power = power(&y[split..]);
        Ok(HoldoutEval {
            si_power,
            residual_power: power(&residual),
            max_abs_residual: residual.iter().map(|r| r.norm()).fold(0.0, f64::max),
            cancellation_db: cancellation_db(&y[split..], &residual)?,
        })
    }

    /// Recovers the remote node's bytes from a received mixture while this
    /// node transmitted `tx_bytes`. The remote frame is assumed to carry as
    /// many bytes as `tx_bytes`.
    pub fn run_pipeline(&self, tx_bytes: &[u8], rx_mixture: &[ComplexSample]) -> Result<Vec<u8>> {
        let recovered = self.cancel_frame(&self.transmit_frame(tx_bytes), rx_mixture)?;
        self.demodulate(&recovered, tx_bytes.len())
    }

    /// Estimates and removes the self-interference of transmitted frame `x`
    /// from `rx`. Returns the cancelled stream starting at the frame's
    /// arrival.
    ///
    /// The arrival is first placed at the SI preamble peak minus the known
    /// channel lag. The useful signal can move that peak, so the offset is
    /// then refined to the one within `window + sps` samples that leaves the
    /// least residual power.
    pub fn cancel_frame(&self, x: &[ComplexSample], rx: &[ComplexSample]) -> Result<Vec<ComplexSample>> {
        if self.model.is_none() {
            return Err(Error::Untrained);
        }
        let coarse = self.preamble.locate(rx)? as i64 - self.si_lag as i64;
        let mut x_ext = x.to_vec();
        x_ext.resize(rx.len().max(x.len()), ComplexSample::default());
        let y_hat = self.estimate_stream(&x_ext)?;
        let scored = (x.len() + self.window).min(y_hat.len());
        let reach = (self.window + self.pulse.sps) as i64;
        let mut best: Option<(usize, f64)> = None;
        for s in (coarse - reach).max(0)..=coarse + reach {
            let s = s as usize;
            if s >= rx.len() {
                break;
            }
            let n = scored.min(rx.len() - s);
            let delta: f64 = rx[s..s + n]
                .iter()
                .zip(&y_hat[..n])
                .map(|(r, h)| (r - h).norm_sqr() - r.norm_sqr())
                .sum();
            if best.is_none_or(|(_, d)| delta < d) {
                best = Some((s, delta));
            }
        }
        let start = best.map(|(s, _)| s).ok_or_else(|| {
            Error::InvalidParameter(format!("frame arrival {coarse} lies outside the record"))
        })?;
        let y = &rx[start..];
        cancel(y, &y_hat[..y.len()])
    }

    /// Synchronizes on the preamble in a cancelled stream, matched-filters
    /// and demaps `n_bytes` bytes.
    pub fn demodulate(&self, stream: &[ComplexSample], n_bytes: usize) -> Result<Vec<u8>> {
        let start = self.preamble.locate(stream)? + self.preamble.len();
        let n_symbols = self.scheme.symbols_for_bytes(n_bytes);
        let symbols = self.pulse.recover(&stream[start.min(stream.len())..], n_symbols);
        Ok(demodulate_bytes(&symbols, self.scheme, n_bytes))
    }

    pub fn save_model(&self, path: &Path) -> Result<()> {
        let model = self.model.as_ref().ok_or(Error::Untrained)?;
        let meta = vec![
            1.0,
            self.window as f64,
            self.si_lag as f64,
            self.pulse_cfg.sps as f64,
            self.pulse_cfg.span as f64,
            self.pulse_cfg.beta,
            self.scheme.order() as f64,
            model.mode().code(),
        ];
        let mut arrays = vec![("meta".to_string(), Matrix::from_vec(1, meta.len(), meta)?)];
        match model {
            SiModel::Network { i_net, q_net, .. } => {
                arrays.extend(i_net.to_arrays("i."));
                arrays.extend(q_net.to_arrays("q."));
            }
            SiModel::Oracle { taps } => {
                let data = taps.iter().flat_map(|t| [t.re, t.im]).collect();
                arrays.push(("oracle.taps".into(), Matrix::from_vec(taps.len(), 2, data)?));
            }
        }
        dnn::write_arrays(path, &arrays)
    }

    pub fn load_model(path: &Path) -> Result<Self> {
        let arrays = dnn::read_arrays(path)?;
        let corrupt = |reason: &str| Error::CorruptFile {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let meta = arrays
            .iter()
            .find(|(n, _)| n == "meta")
            .map(|(_, m)| m.data.clone())
            .ok_or_else(|| corrupt("missing array meta"))?;
        if meta.len() != 8 || meta[0] != 1.0 {
            return Err(corrupt("unsupported model metadata"));
        }
        let scheme = match meta[6] as usize {
            4 => PskScheme::Qpsk,
            16 => PskScheme::Psk16,
            64 => PskScheme::Psk64,
            _ => return Err(corrupt("unknown constellation order")),
        };
        let pulse_cfg = PulseConfig {
            sps: meta[3] as usize,
            span: meta[4] as usize,
            beta: meta[5],
        };
        let mut state = CancellerState::new(scheme, pulse_cfg, meta[1] as usize)?;
        state.si_lag = meta[2] as usize;
        let mode = EstimatorMode::from_code(meta[7]).ok_or_else(|| corrupt("unknown estimator mode"))?;
        state.model = Some(match mode {
            EstimatorMode::Oracle => {
                let m = arrays
                    .iter()
                    .find(|(n, _)| n == "oracle.taps")
                    .map(|(_, m)| m)
                    .ok_or_else(|| corrupt("missing array oracle.taps"))?;
                if m.rows != state.window || m.cols != 2 {
                    return Err(Error::ShapeMismatch {
                        name: "oracle.taps".into(),
                        expected: format!("{}x2", state.window),
                        found: format!("{}x{}", m.rows, m.cols),
                    });
                }
                SiModel::Oracle {
                    taps: m.data.chunks_exact(2).map(|c| ComplexSample::new(c[0], c[1])).collect(),
                }
            }
            EstimatorMode::JointIq | EstimatorMode::PerComponent => {
                let features = if mode == EstimatorMode::JointIq {
                    FeatureMode::JointIq
                } else {
                    FeatureMode::PerComponent
                };
                let in_dim = Some(features.in_dim(state.window));
                SiModel::Network {
                    features,
                    i_net: MlpParams::from_arrays(&arrays, "i.", path, in_dim)?,
                    q_net: MlpParams::from_arrays(&arrays, "q.", path, in_dim)?,
                }
            }
        });
        Ok(state)
    }
}

/// Index where the held-out block of an aligned record of `len` samples
/// begins.
pub fn holdout_split(len: usize) -> usize {
    (len as f64 * TRAIN_FRACTION).floor() as usize
}

/// `m = y - y_si_hat`.
pub fn cancel(y: &[ComplexSample], y_si_hat: &[ComplexSample]) -> Result<Vec<ComplexSample>> {
    if y.len() != y_si_hat.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: y_si_hat.len(),
        });
    }
    Ok(y.iter().zip(y_si_hat).map(|(a, b)| a - b).collect())
}

/// `10 log10(power(y) / power(residual))`; `+inf` for a zero residual.
pub fn cancellation_db(y: &[ComplexSample], residual: &[ComplexSample]) -> Result<f64> {
    if y.len() != residual.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: residual.len(),
        });
    }
    let r = power(residual);
    if r == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (power(y) / r).log10())
}
