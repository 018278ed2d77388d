use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{init_params, ForwardCache, MlpParams, SlidingDataset};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            epochs: 30,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::InvalidParameter("batch size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Mean squared error per row of `dataset`.
pub fn evaluate_loss(params: &MlpParams, dataset: &SlidingDataset) -> f64 {
    if dataset.is_empty() {
        return 0.0;
    }
    let mut cache = ForwardCache::default();
    let total: f64 = (0..dataset.len())
        .map(|r| (params.forward_into(dataset.inputs.row(r), &mut cache) - dataset.targets[r]).powi(2))
        .sum();
    total / dataset.len() as f64
}

/// Mini-batch gradient descent from seeded Glorot initialization. Returns the
/// trained parameters and the mean per-row loss of every epoch.
pub fn train(dataset: &SlidingDataset, cfg: &TrainConfig) -> Result<(MlpParams, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let initial = init_params(dataset.inputs.cols, &mut rng)?;
    train_with_rng(initial, dataset, cfg, &mut rng)
}

/// Continues training from `initial`; the shuffling stream is seeded from
/// `cfg.seed`.
pub fn train_from(initial: MlpParams, dataset: &SlidingDataset, cfg: &TrainConfig) -> Result<(MlpParams, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    train_with_rng(initial, dataset, cfg, &mut rng)
}

fn train_with_rng(
    mut params: MlpParams,
    dataset: &SlidingDataset,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(MlpParams, Vec<f64>)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidParameter("training dataset is empty".into()));
    }
    if dataset.inputs.cols != params.in_dim {
        return Err(Error::ShapeMismatch {
            name: "dataset".into(),
            expected: format!("{} columns", params.in_dim),
            found: format!("{} columns", dataset.inputs.cols),
        });
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut grads = MlpParams::zeros(params.in_dim);
    let mut cache = ForwardCache::default();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.zero();
            for &r in batch {
                let y_e = params.forward_into(dataset.inputs.row(r), &mut cache);
                let err = y_e - dataset.targets[r];
                epoch_loss += err * err;
                // d/dy_e of (y_real - y_e)^2
                params.backward_accumulate(&cache, 2.0 * err, &mut grads);
            }
            params.apply_gradients(&grads, cfg.learning_rate);
        }
        let mean = epoch_loss / dataset.len() as f64;
        if !mean.is_finite() || !params.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        history.push(mean);
    }
    Ok((params, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Noiseless two-tap real FIR target on white inputs.
    fn fir_dataset(window: usize, n: usize, seed: u64) -> SlidingDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 0.8 * x[i] - 0.4 * if i > 0 { x[i - 1] } else { 0.0 })
            .collect();
        SlidingDataset::from_real(&x, &y, window).unwrap()
    }

    #[test]
    fn learns_linear_fir() {
        let ds = fir_dataset(4, 3000, 1);
        let cfg = TrainConfig {
            epochs: 200,
            learning_rate: 2e-3,
            seed: 3,
            ..TrainConfig::default()
        };
        let initial = init_params(4, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap();
        let start = evaluate_loss(&initial, &ds);
        let (params, history) = train(&ds, &cfg).unwrap();
        let end = evaluate_loss(&params, &ds);
        assert_eq!(history.len(), 200);
        assert!(end < 1e-4 * start, "start {start} end {end}");
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let ds = fir_dataset(3, 200, 2);
        let cfg = TrainConfig {
            epochs: 5,
            learning_rate: 0.0,
            seed: 4,
            ..TrainConfig::default()
        };
        let initial = init_params(3, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let (params, history) = train(&ds, &cfg).unwrap();
        assert_eq!(params, initial);
        assert!(history.windows(2).all(|w| (w[0] - w[1]).abs() <= 1e-12 * w[0]));
    }

    #[test]
    fn deterministic_for_seed() {
        let ds = fir_dataset(3, 500, 3);
        let cfg = TrainConfig {
            epochs: 4,
            seed: 9,
            ..TrainConfig::default()
        };
        assert_eq!(train(&ds, &cfg).unwrap(), train(&ds, &cfg).unwrap());
    }

    #[test]
    fn divergence_reports_epoch() {
        let ds = fir_dataset(3, 500, 5);
        let cfg = TrainConfig {
            epochs: 50,
            learning_rate: 50.0,
            seed: 1,
            ..TrainConfig::default()
        };
        match train(&ds, &cfg) {
            Err(Error::Diverged { epoch, .. }) => assert!(epoch < 50),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn empty_or_bad_config_rejected() {
        let ds = fir_dataset(3, 50, 6);
        let empty = ds.slice(0..0);
        assert!(train(&empty, &TrainConfig::default()).is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(train(&ds, &bad).is_err());
    }
}
