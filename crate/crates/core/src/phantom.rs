//! Built-in test images on the 0-255 intensity scale.

use crate::model::Image;
use crate::{Error, Result};

/// Ellipse phantom rows: (value, semi-axis a, semi-axis b, x0, y0, angle deg).
/// The classic head phantom with the usual contrast-boosted tissue values.
const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Gaussian blob rows: (amplitude, cx, cy, sx, sy).
const BLOBS: [(f64, f64, f64, f64, f64); 6] = [
    (1.0, -0.25, -0.3, 0.18, 0.25),
    (0.85, 0.3, -0.2, 0.22, 0.15),
    (0.7, 0.0, 0.3, 0.3, 0.18),
    (0.55, -0.35, 0.25, 0.12, 0.12),
    (0.45, 0.25, 0.35, 0.1, 0.16),
    (0.6, 0.05, -0.05, 0.4, 0.35),
];

fn check_size(n: usize) -> Result<()> {
    if n < 16 {
        return Err(Error::InvalidParameter(format!(
            "phantom size must be at least 16, got {n}"
        )));
    }
    Ok(())
}

/// Piecewise-constant ellipse head phantom, real-valued in `[0, 255]`.
pub fn shepp_logan(n: usize) -> Result<Image> {
    check_size(n)?;
    let mut values = vec![0.0f64; n * n];
    for row in 0..n {
        for col in 0..n {
            // Image coordinates in [-1, 1], y up.
            let x = 2.0 * (col as f64 + 0.5) / n as f64 - 1.0;
            let y = 1.0 - 2.0 * (row as f64 + 0.5) / n as f64;
            let mut v = 0.0;
            for &(val, a, b, x0, y0, deg) in &ELLIPSES {
                let phi = deg.to_radians();
                let (s, c) = phi.sin_cos();
                let xr = (x - x0) * c + (y - y0) * s;
                let yr = -(x - x0) * s + (y - y0) * c;
                if (xr / a).powi(2) + (yr / b).powi(2) <= 1.0 {
                    v += val;
                }
            }
            values[row * n + col] = v.max(0.0);
        }
    }
    let max = values.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        for v in values.iter_mut() {
            *v *= 255.0 / max;
        }
    }
    Image::from_real(n, n, &values)
}

/// Smooth sum-of-Gaussians phantom, real-valued in `[0, 255]`.
pub fn gaussian_blobs(n: usize) -> Result<Image> {
    check_size(n)?;
    let mut values = vec![0.0f64; n * n];
    for row in 0..n {
        for col in 0..n {
            let x = 2.0 * (col as f64 + 0.5) / n as f64 - 1.0;
            let y = 1.0 - 2.0 * (row as f64 + 0.5) / n as f64;
            let mut v = 0.0;
            for &(amp, cx, cy, sx, sy) in &BLOBS {
                let dx = (x - cx) / sx;
                let dy = (y - cy) / sy;
                v += amp * (-0.5 * (dx * dx + dy * dy)).exp();
            }
            values[row * n + col] = v;
        }
    }
    let max = values.iter().cloned().fold(0.0, f64::max);
    for v in values.iter_mut() {
        *v *= 255.0 / max;
    }
    Image::from_real(n, n, &values)
}

/// Phantom registry used by the CLI.
pub fn by_name(name: &str, n: usize) -> Result<Image> {
    match name {
        "shepp-logan" => shepp_logan(n),
        "gaussian-blobs" => gaussian_blobs(n),
        other => Err(Error::InvalidParameter(format!(
            "unknown phantom '{other}' (expected 'shepp-logan' or 'gaussian-blobs')"
        ))),
    }
}

/// Same registry rescaled to peak magnitude 1, the convenient scale when
/// regularization weights are quoted as absolute thresholds.
pub fn unit_peak(name: &str, n: usize) -> Result<Image> {
    let img = by_name(name, n)?;
    let peak = img.data().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let scaled: Vec<_> = img.data().iter().map(|v| v / peak).collect();
    Image::new(img.height(), img.width(), scaled)
}
