//! Least-squares FIR estimate of the self-interference channel.

use crate::{ComplexSample, Error, Result, TapVector};

/// Diagonal loading added to the normal equations.
pub const LS_REGULARIZATION: f64 = 1e-9;

/// Minimizes `sum_n |y[n] - sum_k h[k] x[n-k]|^2` over rows `n = K-1 ..`,
/// solving `(A^H A + eps I) h = A^H y` by Cholesky factorization.
pub fn ls_fir_oracle(x: &[ComplexSample], y: &[ComplexSample], window: usize) -> Result<TapVector> {
    if window < 1 {
        return Err(Error::InvalidParameter("oracle needs at least one tap".into()));
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < window {
        return Err(Error::InvalidParameter(format!(
            "{} aligned pairs are fewer than {window} taps",
            x.len()
        )));
    }
    let k = window;
    // gram[i][j] = sum_n conj(x[n-i]) x[n-j], upper triangle first
    let mut gram = vec![ComplexSample::default(); k * k];
    let mut rhs = vec![ComplexSample::default(); k];
    for n in k - 1..x.len() {
        for i in 0..k {
            let xi = x[n - i].conj();
            rhs[i] += xi * y[n];
            let row = &mut gram[i * k..(i + 1) * k];
            for j in i..k {
                row[j] += xi * x[n - j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            gram[i * k + j] = gram[j * k + i].conj();
        }
        gram[i * k + i] += LS_REGULARIZATION;
    }
    solve_hermitian(&mut gram, &mut rhs, k)?;
    Ok(rhs)
}

/// In-place Cholesky solve of a Hermitian positive-definite system.
fn solve_hermitian(a: &mut [ComplexSample], b: &mut [ComplexSample], n: usize) -> Result<()> {
    // a <- L with a = L L^H (lower triangle used)
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for p in 0..j {
            d -= a[j * n + p].norm_sqr();
        }
        let usable = d.is_finite() && d > 2.0 * LS_REGULARIZATION;
        if !usable {
            return Err(Error::RankDeficient { column: j });
        }
        let ljj = d.sqrt();
        a[j * n + j] = ComplexSample::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for p in 0..j {
                s -= a[i * n + p] * a[j * n + p].conj();
            }
            a[i * n + j] = s / ljj;
        }
    }
    // L z = b
    for i in 0..n {
        let mut s = b[i];
        for p in 0..i {
            s -= a[i * n + p] * b[p];
        }
        b[i] = s / a[i * n + i].re;
    }
    // L^H h = z
    for i in (0..n).rev() {
        let mut s = b[i];
        for p in i + 1..n {
            s -= a[p * n + i].conj() * b[p];
        }
        b[i] = s / a[i * n + i].re;
    }
    Ok(())
}
