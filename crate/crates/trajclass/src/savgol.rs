//! Savitzky-Golay smoothing.
//!
//! Weights come from a linear least-squares fit of a degree-`polyorder`
//! polynomial over an odd-length window; filtering a series evaluates that
//! fit at each position. Boundaries are handled without padding: positions
//! too close to an edge are evaluated from the polynomial fitted to the
//! nearest full window.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SavGolError {
    #[error("window length must be odd, got {0}")]
    EvenWindow(usize),
    #[error("window length must be at least 1")]
    ZeroWindow,
    #[error("polyorder {polyorder} must be smaller than window length {window_length}")]
    PolyorderTooLarge { polyorder: usize, window_length: usize },
    #[error("evaluation offset {offset} outside window half-width {half}")]
    OffsetOutsideWindow { offset: i64, half: usize },
    #[error("singular normal equations for window {window_length}, polyorder {polyorder}")]
    Singular { window_length: usize, polyorder: usize },
}

/// Smoothing parameters as they appear in pipeline configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavGolParams {
    pub window_length: usize,
    pub polyorder: usize,
}

impl SavGolParams {
    /// Clamps the polyorder to `window_length - 1`.
    ///
    /// Configuration search treats window length and polyorder as independent
    /// axes, so invalid combinations are repaired here instead of rejected.
    pub fn repaired(self) -> SavGolParams {
        SavGolParams {
            window_length: self.window_length,
            polyorder: self.polyorder.min(self.window_length.saturating_sub(1)),
        }
    }

    pub fn validate(&self) -> Result<(), SavGolError> {
        if self.window_length == 0 {
            return Err(SavGolError::ZeroWindow);
        }
        if self.window_length % 2 == 0 {
            return Err(SavGolError::EvenWindow(self.window_length));
        }
        if self.polyorder >= self.window_length {
            return Err(SavGolError::PolyorderTooLarge {
                polyorder: self.polyorder,
                window_length: self.window_length,
            });
        }
        Ok(())
    }
}

/// Solves `a x = b` in place via Gaussian elimination with partial pivoting.
fn solve_linear(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

/// Convolution weights for one evaluation point.
///
/// The returned vector `w` has `window_length` entries; `w · y` over a window
/// of samples equals the least-squares polynomial fit of those samples
/// evaluated `offset` steps from the window center. `offset = 0` is the
/// classic smoothing kernel; nonzero offsets are used at series boundaries.
pub fn savgol_coeffs(
    window_length: usize,
    polyorder: usize,
    offset: i64,
) -> Result<Vec<f64>, SavGolError> {
    SavGolParams { window_length, polyorder }.validate()?;
    let half = (window_length / 2) as i64;
    if offset.abs() > half {
        return Err(SavGolError::OffsetOutsideWindow { offset, half: half as usize });
    }
    if window_length == 1 {
        return Ok(vec![1.0]);
    }
    // Positions are scaled by the half-width to keep the normal equations
    // well conditioned at large windows and orders; the fitted polynomial
    // space, and therefore the weights, are unchanged by the scaling.
    let scale = half as f64;
    let m = polyorder + 1;
    let xs: Vec<f64> = (-half..=half).map(|j| j as f64 / scale).collect();

    // Normal equations: (AᵀA) z = e, weights w = A z, where A[j][k] = x_j^k
    // and e_k = (offset/scale)^k.
    let mut ata = vec![vec![0.0; m]; m];
    for (r, row) in ata.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = xs.iter().map(|&x| x.powi((r + c) as i32)).sum();
        }
    }
    let x0 = offset as f64 / scale;
    let mut e: Vec<f64> = (0..m).map(|k| x0.powi(k as i32)).collect();
    let z = solve_linear(&mut ata, &mut e)
        .ok_or(SavGolError::Singular { window_length, polyorder })?;
    Ok(xs
        .iter()
        .map(|&x| (0..m).map(|k| z[k] * x.powi(k as i32)).sum())
        .collect())
}

/// Largest odd window that fits a series of length `n`, capped at `window`.
fn effective_window(window: usize, n: usize) -> usize {
    let mut w = window.min(n);
    if w % 2 == 0 {
        w -= 1;
    }
    w
}

/// Filters a series, shrinking the window to the largest odd length that
/// fits when the series is shorter than `window_length`. The polyorder is
/// clamped below any shrunken window. A window of 1 is the identity.
pub fn savgol_filter(
    values: &[f64],
    window_length: usize,
    polyorder: usize,
) -> Result<Vec<f64>, SavGolError> {
    SavGolParams { window_length, polyorder }.validate()?;
    let n = values.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let w = effective_window(window_length, n);
    if w <= 1 {
        return Ok(values.to_vec());
    }
    let p = polyorder.min(w - 1);
    let half = w / 2;

    let center = savgol_coeffs(w, p, 0)?;
    let mut out = vec![0.0; n];
    for i in half..n - half {
        out[i] = dot(&center, &values[i - half..i + half + 1]);
    }
    // Leading edge: fit the first full window, evaluate at each position.
    for i in 0..half {
        let coeffs = savgol_coeffs(w, p, i as i64 - half as i64)?;
        out[i] = dot(&coeffs, &values[..w]);
    }
    // Trailing edge: fit the last full window.
    for i in n - half..n {
        let offset = i as i64 - (n - 1 - half) as i64;
        let coeffs = savgol_coeffs(w, p, offset)?;
        out[i] = dot(&coeffs, &values[n - w..]);
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
