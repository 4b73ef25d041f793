//! Savitzky–Golay smoothing.
//!
//! The filter fits a least-squares polynomial over a sliding window and keeps
//! the fitted value at the window center, which suppresses high-frequency
//! noise without flattening peak shapes the way a moving average does.
//! Weights assume a uniform x grid and are applied by index; spectra are
//! near-uniformly sampled, so non-uniform grids are filtered by index as a
//! documented approximation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::SpectralCurve;

#[derive(Debug, Error)]
pub enum SmoothError {
    #[error("invalid Savitzky-Golay config: {0}")]
    InvalidConfig(String),
    #[error("curve has {len} points but the window needs at least {window}")]
    CurveTooShort { len: usize, window: usize },
}

/// Window length and polynomial order for the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SgConfig {
    /// Number of samples in the window; odd, >= 3.
    pub window: usize,
    /// Fit polynomial order; < window.
    pub poly_order: usize,
}

impl Default for SgConfig {
    /// Window 11, order 3: narrow enough to preserve sharp diffraction and
    /// fragment peaks at typical point counts of 1000-3000.
    fn default() -> Self {
        SgConfig { window: 11, poly_order: 3 }
    }
}

impl SgConfig {
    pub fn validate(&self) -> Result<(), SmoothError> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(SmoothError::InvalidConfig(format!(
                "window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if self.poly_order >= self.window {
            return Err(SmoothError::InvalidConfig(format!(
                "poly_order {} must be < window {}",
                self.poly_order, self.window
            )));
        }
        Ok(())
    }
}

/// Central-point convolution weights of the least-squares polynomial fit.
///
/// For offsets z in `-h..=h` and basis `z^k`, the smoothed center value is
/// `w · y` where `w_i = sum_k u_k z_i^k` and `u` solves `G u = e_0` with the
/// Gram matrix `G[j][k] = sum_i z_i^(j+k)`. Weights sum to 1.
#[allow(clippy::needless_range_loop)]
pub fn sg_coefficients(window: usize, poly_order: usize) -> Result<Vec<f64>, SmoothError> {
    let cfg = SgConfig { window, poly_order };
    cfg.validate()?;

    let h = (window / 2) as i64;
    let dim = poly_order + 1;

    // Gram matrix of the monomial basis on the integer window.
    let mut gram = vec![vec![0.0; dim]; dim];
    for j in 0..dim {
        for k in 0..dim {
            let mut s = 0.0;
            for z in -h..=h {
                s += (z as f64).powi((j + k) as i32);
            }
            gram[j][k] = s;
        }
    }
    let mut rhs = vec![0.0; dim];
    rhs[0] = 1.0;
    let u = solve_dense(&mut gram, &mut rhs).ok_or_else(|| {
        SmoothError::InvalidConfig("singular Gram matrix (window too small for order)".into())
    })?;

    let weights = (-h..=h)
        .map(|z| {
            let mut w = 0.0;
            let mut zk = 1.0;
            for &uk in &u {
                w += uk * zk;
                zk *= z as f64;
            }
            w
        })
        .collect();
    Ok(weights)
}

// Gaussian elimination with partial pivoting on a small dense system.
#[allow(clippy::needless_range_loop)]
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Applies the filter to the y values; x is unchanged.
///
/// Boundaries use mirror padding that reflects around the edge sample
/// without repeating it (index -k maps to k), avoiding the amplitude droop
/// zero padding causes on rising baselines.
pub fn sg_smooth(curve: &SpectralCurve, cfg: SgConfig) -> Result<SpectralCurve, SmoothError> {
    cfg.validate()?;
    let n = curve.len();
    if n < cfg.window {
        return Err(SmoothError::CurveTooShort { len: n, window: cfg.window });
    }
    let weights = sg_coefficients(cfg.window, cfg.poly_order)?;
    let ys: Vec<f64> = curve.ys().collect();
    let h = (cfg.window / 2) as isize;
    let len = n as isize;

    let smoothed = (0..len)
        .map(|i| {
            let mut acc = 0.0;
            for (j, w) in weights.iter().enumerate() {
                let mut k = i + j as isize - h;
                if k < 0 {
                    k = -k;
                } else if k >= len {
                    k = 2 * len - 2 - k;
                }
                acc += w * ys[k as usize];
            }
            acc
        })
        .collect();
    Ok(curve.with_ys(smoothed))
}
