#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sic_core::dnn::{init_params, MlpParams};

pub const FD_STEP: f64 = 1e-5;

/// `|a - n| / max(|a| + |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Squared-error loss of one sample, evaluated from scratch.
fn loss(p: &MlpParams, x: &[f64], target: f64) -> f64 {
    let (y, _) = p.forward(x).unwrap();
    (y - target).powi(2)
}

/// Worst relative error between backprop and central differences over
/// every parameter of `draws` random networks and inputs.
pub fn worst_gradient_error(draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let in_dim = rng.random_range(1..=12);
        let mut p = init_params(in_dim, &mut rng).unwrap();
        for b in [&mut p.b1, &mut p.b2, &mut p.b3] {
            for v in b.iter_mut() {
                *v = rng.random_range(-0.5..0.5);
            }
        }
        let x: Vec<f64> = (0..in_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let target = rng.random_range(-1.0..1.0);
        let (y, cache) = p.forward(&x).unwrap();
        let grads = p.backward(&cache, 2.0 * (y - target));
        let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
        for (layer, g) in analytic.iter().enumerate() {
            for (i, &a) in g.iter().enumerate() {
                let orig = p.slices()[layer][i];
                p.slices_mut()[layer][i] = orig + FD_STEP;
                let up = loss(&p, &x, target);
                p.slices_mut()[layer][i] = orig - FD_STEP;
                let down = loss(&p, &x, target);
                p.slices_mut()[layer][i] = orig;
                let numeric = (up - down) / (2.0 * FD_STEP);
                worst = worst.max(relative_error(a, numeric));
            }
        }
    }
    worst
}

/// Writes a single-network parameter file straight from the documented byte
/// layout, without going through the library.
pub fn write_params_by_hand(arrays: &[(&str, usize, usize, Vec<f64>)]) -> Vec<u8> {
    let mut out = b"SICNET01".to_vec();
    out.extend((arrays.len() as u32).to_le_bytes());
    for (name, rows, cols, vals) in arrays {
        out.extend((name.len() as u32).to_le_bytes());
        out.extend(name.as_bytes());
        out.extend((*rows as u32).to_le_bytes());
        out.extend((*cols as u32).to_le_bytes());
        for v in vals {
            out.extend(v.to_le_bytes());
        }
    }
    out
}
