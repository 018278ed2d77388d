//! Simulated self-interference and useful-signal channels.
//!
//! The self-interference path is `delay(awgn(nonlin(fir(x, si_taps))))` with a
//! memoryless cubic nonlinearity `a1 v + a3 v |v|^2`. Noise is circular
//! complex Gaussian with per-component variance
//! `signal_power / (2 * 10^(snr_db / 10))`, where `signal_power` is measured on
//! the nonlinearity output. `snr_db = inf` disables noise.
//!
//! Scenario files are TOML:
//!
//! ```toml
//! name = "room1"
//! si_taps = [[1.0, 0.0], [0.35, 0.2]]   # [re, im] pairs
//! useful_taps = [[0.32, 0.0]]
//! nl_coeffs = [1.0, 0.05]               # [a1, a3]
//! snr_db = 31.0                         # `inf` for noiseless
//! delay_samples = 52
//! seed = 2
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::pulse::fir_filter;
use crate::{power, ComplexSample, Error, Result, TapVector};

pub const SCENARIO_NAMES: [&str; 6] = ["room1", "room2", "outdoor", "hallway", "validation", "multipath"];

/// Memoryless polynomial `a1 v + a3 v |v|^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Nonlinearity {
    pub a1: f64,
    pub a3: f64,
}

impl Nonlinearity {
    pub const LINEAR: Nonlinearity = Nonlinearity { a1: 1.0, a3: 0.0 };

    pub fn apply(&self, v: ComplexSample) -> ComplexSample {
        v * self.a1 + v * (self.a3 * v.norm_sqr())
    }
}

impl From<[f64; 2]> for Nonlinearity {
    fn from([a1, a3]: [f64; 2]) -> Self {
        Nonlinearity { a1, a3 }
    }
}

impl From<Nonlinearity> for [f64; 2] {
    fn from(n: Nonlinearity) -> Self {
        [n.a1, n.a3]
    }
}

mod tap_pairs {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(taps: &TapVector, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = taps.iter().map(|t| [t.re, t.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<TapVector, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| ComplexSample::new(re, im)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(with = "tap_pairs")]
    pub si_taps: TapVector,
    #[serde(with = "tap_pairs")]
    pub useful_taps: TapVector,
    pub nl_coeffs: Nonlinearity,
    pub snr_db: f64,
    pub delay_samples: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.si_taps.is_empty() {
            return Err(Error::Config("si_taps must not be empty".into()));
        }
        if self.useful_taps.is_empty() {
            return Err(Error::Config("useful_taps must not be empty".into()));
        }
        if self.nl_coeffs.a1 == 0.0 || !self.nl_coeffs.a1.is_finite() || !self.nl_coeffs.a3.is_finite() {
            return Err(Error::Config("nl_coeffs must be finite with a1 != 0".into()));
        }
        // +inf is the noiseless setting
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::Config(format!("snr_db {} is not usable", self.snr_db)));
        }
        let finite = |t: &ComplexSample| t.re.is_finite() && t.im.is_finite();
        if !self.si_taps.iter().all(finite) || !self.useful_taps.iter().all(finite) {
            return Err(Error::Config("taps must be finite".into()));
        }
        Ok(())
    }

    /// Noise generator seeded from the scenario seed.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db == f64::INFINITY
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }
}

fn taps(pairs: &[(f64, f64)]) -> TapVector {
    pairs.iter().map(|&(re, im)| ComplexSample::new(re, im)).collect()
}

/// Sparse tap vector with `(index, re, im)` entries.
fn sparse_taps(len: usize, entries: &[(usize, f64, f64)]) -> TapVector {
    let mut t = vec![ComplexSample::default(); len];
    for &(i, re, im) in entries {
        t[i] = ComplexSample::new(re, im);
    }
    t
}

/// Built-in scenario presets.
///
/// * `validation`: useful taps `[1]`, SI taps `[1, 1]`, linear and noiseless.
/// * `outdoor`, `room1`, `room2`, `hallway`: nonlinear (`a3 = 0.05`) SI
///   channels whose tap count grows and SNR falls in that order. The useful
///   signal arrives about 10 dB below the self-interference.
/// * `multipath`: linear, noiseless SI channel with echoes out to 81 samples.
pub fn scenario(name: &str) -> Result<ScenarioConfig> {
    let nonlinear = Nonlinearity { a1: 1.0, a3: 0.05 };
    let cfg = match name.to_ascii_lowercase().as_str() {
        "validation" => ScenarioConfig {
            name: "validation".into(),
            si_taps: taps(&[(1.0, 0.0), (1.0, 0.0)]),
            useful_taps: taps(&[(1.0, 0.0)]),
            nl_coeffs: Nonlinearity::LINEAR,
            snr_db: f64::INFINITY,
            delay_samples: 0,
            seed: 1,
        },
        "outdoor" => ScenarioConfig {
            name: "outdoor".into(),
            si_taps: taps(&[(1.0, 0.0), (0.25, -0.1)]),
            useful_taps: taps(&[(0.32, 0.0)]),
            nl_coeffs: nonlinear,
            snr_db: 34.0,
            delay_samples: 37,
            seed: 2,
        },
        "room1" => ScenarioConfig {
            name: "room1".into(),
            si_taps: taps(&[(1.0, 0.0), (0.0, 0.0), (0.35, 0.2), (0.0, 0.0), (0.0, 0.15)]),
            useful_taps: taps(&[(0.32, 0.0), (0.04, 0.0)]),
            nl_coeffs: nonlinear,
            snr_db: 31.0,
            delay_samples: 52,
            seed: 3,
        },
        "room2" => ScenarioConfig {
            name: "room2".into(),
            si_taps: sparse_taps(7, &[(0, 1.0, 0.0), (1, 0.3, -0.2), (3, -0.25, 0.1), (6, 0.0, 0.2)]),
            useful_taps: taps(&[(0.32, 0.0), (0.05, 0.03)]),
            nl_coeffs: nonlinear,
            snr_db: 29.0,
            delay_samples: 64,
            seed: 4,
        },
        "hallway" => ScenarioConfig {
            name: "hallway".into(),
            si_taps: sparse_taps(
                10,
                &[(0, 1.0, 0.0), (1, 0.35, 0.25), (3, 0.0, -0.3), (5, -0.25, 0.0), (7, 0.15, 0.15), (9, 0.0, 0.12)],
            ),
            useful_taps: taps(&[(0.3, 0.0), (0.08, 0.0), (0.0, 0.05)]),
            nl_coeffs: nonlinear,
            snr_db: 26.0,
            delay_samples: 81,
            seed: 5,
        },
        "multipath" => ScenarioConfig {
            name: "multipath".into(),
            si_taps: sparse_taps(
                82,
                &[(0, 0.25, 0.0), (1, 0.0, 0.1), (23, 0.7, 0.0), (37, -0.5, 0.4), (58, 0.0, 0.45), (81, 0.35, 0.0)],
            ),
            useful_taps: taps(&[(1.0, 0.0)]),
            nl_coeffs: Nonlinearity::LINEAR,
            snr_db: f64::INFINITY,
            delay_samples: 23,
            seed: 6,
        },
        _ => {
            return Err(Error::UnknownScenario {
                name: name.to_string(),
                valid: SCENARIO_NAMES.join(", "),
            })
        }
    };
    Ok(cfg)
}

/// Complex circular Gaussian noise at `snr_db` below the measured power of
/// `x`, added in place.
pub fn add_awgn(x: &mut [ComplexSample], snr_db: f64, rng: &mut impl rand::Rng) {
    if snr_db == f64::INFINITY || x.is_empty() {
        return;
    }
    let signal = power(x);
    let sigma = (signal / (2.0 * 10f64.powf(snr_db / 10.0))).sqrt();
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("finite noise deviation");
    for v in x.iter_mut() {
        let re = normal.sample(rng);
        let im = normal.sample(rng);
        *v += ComplexSample::new(re, im);
    }
}

fn delay(x: Vec<ComplexSample>, samples: usize) -> Vec<ComplexSample> {
    if samples == 0 {
        return x;
    }
    let mut out = vec![ComplexSample::default(); samples];
    out.extend(x);
    out
}

/// Passes a transmitted stream through the self-interference path.
/// Output length is `len(x) + len(si_taps) - 1 + delay_samples`.
pub fn apply_channel(x: &[ComplexSample], cfg: &ScenarioConfig, rng: &mut impl rand::Rng) -> Result<Vec<ComplexSample>> {
    if x.is_empty() {
        return Err(Error::InvalidParameter("channel input is empty".into()));
    }
    cfg.validate()?;
    let mut v = fir_filter(x, &cfg.si_taps)?;
    for s in v.iter_mut() {
        *s = cfg.nl_coeffs.apply(*s);
    }
    add_awgn(&mut v, cfg.snr_db, rng);
    Ok(delay(v, cfg.delay_samples))
}

pub fn mix(si: &[ComplexSample], useful: &[ComplexSample]) -> Result<Vec<ComplexSample>> {
    if si.len() != useful.len() {
        return Err(Error::LengthMismatch {
            left: si.len(),
            right: useful.len(),
        });
    }
    Ok(si.iter().zip(useful).map(|(a, b)| a + b).collect())
}

/// Received stream at a full-duplex node: the node's own transmission `x`
/// through the self-interference path plus the remote transmission `u`
/// through the useful channel. Both share the receiver delay; the shorter
/// contribution is zero-padded.
pub fn receive_mixture(
    x: &[ComplexSample],
    u: &[ComplexSample],
    cfg: &ScenarioConfig,
    rng: &mut impl rand::Rng,
) -> Result<Vec<ComplexSample>> {
    let mut si = apply_channel(x, cfg, rng)?;
    let mut useful = delay(fir_filter(u, &cfg.useful_taps)?, cfg.delay_samples);
    let len = si.len().max(useful.len());
    si.resize(len, ComplexSample::default());
    useful.resize(len, ComplexSample::default());
    mix(&si, &useful)
}

/// `10 log10(mean(|x|^2))` relative to unit power. An all-zero stream yields
/// `f64::NEG_INFINITY`.
pub fn relative_power_db(x: &[ComplexSample]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidParameter("power of an empty stream".into()));
    }
    let p = power(x);
    Ok(if p == 0.0 { f64::NEG_INFINITY } else { 10.0 * p.log10() })
}
