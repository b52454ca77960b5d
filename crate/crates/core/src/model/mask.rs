//! Variable-density Cartesian sampling masks.
//!
//! The mask lives on the unshifted DFT grid (DC at index `[0, 0]`); geometry
//! is computed in centered coordinates so the sampled pattern is the usual
//! dense-center, sparse-periphery point cloud.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::{Error, Result};

/// Which k-space locations are retained by the measurement operator.
#[derive(Clone, Debug, Serialize)]
pub struct SamplingMask {
    height: usize,
    width: usize,
    /// Row-major selection flags on the unshifted grid.
    selected: Vec<bool>,
    /// Sorted flat indices of the selected points.
    indices: Vec<usize>,
}

impl SamplingMask {
    pub fn from_flags(height: usize, width: usize, selected: Vec<bool>) -> Result<Self> {
        if selected.len() != height * width {
            return Err(Error::DimensionMismatch {
                what: "mask flags",
                expected: height * width,
                got: selected.len(),
            });
        }
        let indices = selected
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
            .collect();
        Ok(Self {
            height,
            width,
            selected,
            indices,
        })
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self::from_flags(height, width, vec![true; height * width]).unwrap()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of retained k-space locations (rows of the selection matrix).
    pub fn num_selected(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn is_selected(&self, flat: usize) -> bool {
        self.selected[flat]
    }

    /// Achieved acceleration `N / M`.
    pub fn acceleration(&self) -> f64 {
        (self.height * self.width) as f64 / self.indices.len() as f64
    }

    /// Gathers the selected entries of a full k-space grid.
    pub fn gather(&self, grid: &[num_complex::Complex64]) -> Vec<num_complex::Complex64> {
        self.indices.iter().map(|&i| grid[i]).collect()
    }

    /// Scatters selected-entry values back onto a zeroed full grid.
    pub fn scatter(&self, values: &[num_complex::Complex64]) -> Vec<num_complex::Complex64> {
        assert_eq!(values.len(), self.indices.len());
        let mut grid = vec![num_complex::Complex64::ZERO; self.height * self.width];
        for (&i, &v) in self.indices.iter().zip(values) {
            grid[i] = v;
        }
        grid
    }
}

#[derive(Clone, Debug)]
pub struct MaskOptions {
    /// Target acceleration `R`; the mask keeps `round(N / R)` points.
    pub reduction: f64,
    /// Fully sampled central square has side `ceil(center_fraction * min(H, W))`.
    pub center_fraction: f64,
    /// Polynomial decay exponent of the sampling probability.
    pub exponent: f64,
    pub seed: u64,
}

impl Default for MaskOptions {
    fn default() -> Self {
        Self {
            reduction: 4.0,
            center_fraction: 0.08,
            exponent: 8.0,
            seed: 0,
        }
    }
}

/// Signed centered frequency offset of index `i` on an axis of length `n`,
/// in `(-n/2, n/2]`.
fn centered_offset(i: usize, n: usize) -> f64 {
    let half = n / 2;
    if i <= half {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Draws a variable-density mask: a fully sampled centered square plus
/// Bernoulli samples with probability proportional to `(1 - r/r_max)^exponent`,
/// rescaled so the expected count hits the target, then adjusted to exactly
/// `round(N / R)` points. Deterministic for a fixed seed.
pub fn make_variable_density_mask(
    height: usize,
    width: usize,
    opts: &MaskOptions,
) -> Result<SamplingMask> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidParameter("mask grid must be non-empty".into()));
    }
    if !opts.reduction.is_finite() || opts.reduction < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "acceleration must be >= 1, got {}",
            opts.reduction
        )));
    }
    if !(0.0..=1.0).contains(&opts.center_fraction) {
        return Err(Error::InvalidParameter(format!(
            "center_fraction must be in [0, 1], got {}",
            opts.center_fraction
        )));
    }
    if opts.exponent < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "exponent must be >= 0, got {}",
            opts.exponent
        )));
    }

    let n = height * width;
    let target = (n as f64 / opts.reduction).round() as usize;
    if target == 0 {
        return Err(Error::MaskInfeasible(format!(
            "acceleration {} leaves no samples on a {}x{} grid",
            opts.reduction, height, width
        )));
    }
    if opts.reduction == 1.0 {
        return Ok(SamplingMask::full(height, width));
    }

    // Fully sampled centered square.
    let side = (opts.center_fraction * height.min(width) as f64).ceil() as i64;
    let lo = -side / 2;
    let hi = lo + side - 1;
    let in_center = |du: f64, dv: f64| {
        let (du, dv) = (du as i64, dv as i64);
        side > 0 && du >= lo && du <= hi && dv >= lo && dv <= hi
    };

    let r_max = {
        let du = (height / 2) as f64;
        let dv = (width / 2) as f64;
        (du * du + dv * dv).sqrt()
    };

    let mut center = vec![false; n];
    let mut radius = vec![0.0f64; n];
    let mut weight = vec![0.0f64; n];
    let mut n_center = 0usize;
    for u in 0..height {
        for v in 0..width {
            let i = u * width + v;
            let du = centered_offset(u, height);
            let dv = centered_offset(v, width);
            radius[i] = (du * du + dv * dv).sqrt();
            if in_center(du, dv) {
                center[i] = true;
                n_center += 1;
            } else {
                weight[i] = (1.0 - radius[i] / r_max).max(0.0).powf(opts.exponent);
            }
        }
    }

    if n_center > target {
        return Err(Error::MaskInfeasible(format!(
            "fully sampled center ({n_center} points) exceeds the budget of {target} \
             points at acceleration {}; reduce center_fraction",
            opts.reduction
        )));
    }

    // Rescale weights so the expected non-center count matches the budget.
    // Bisection handles the saturation at probability 1.
    let remaining = (target - n_center) as f64;
    let expected = |alpha: f64| -> f64 {
        weight
            .iter()
            .map(|&w| (alpha * w).min(1.0))
            .sum::<f64>()
    };
    let mut alpha_hi = 1.0;
    while expected(alpha_hi) < remaining && alpha_hi < 1e12 {
        alpha_hi *= 2.0;
    }
    let mut a = 0.0;
    let mut b = alpha_hi;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if expected(mid) < remaining {
            a = mid;
        } else {
            b = mid;
        }
    }
    let alpha = 0.5 * (a + b);

    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    let mut selected = vec![false; n];
    for i in 0..n {
        if center[i] {
            selected[i] = true;
        } else {
            let p = (alpha * weight[i]).min(1.0);
            selected[i] = rng.gen::<f64>() < p;
        }
    }

    // Exact-count adjustment, preserving the density profile: drop the
    // outermost selected points or add the innermost unselected ones. The
    // center square is never touched.
    let count = selected.iter().filter(|&&s| s).count();
    if count > target {
        let mut extra: Vec<usize> = (0..n).filter(|&i| selected[i] && !center[i]).collect();
        extra.sort_by(|&x, &y| {
            radius[y]
                .partial_cmp(&radius[x])
                .unwrap()
                .then(y.cmp(&x))
        });
        for &i in extra.iter().take(count - target) {
            selected[i] = false;
        }
    } else if count < target {
        let mut holes: Vec<usize> = (0..n).filter(|&i| !selected[i]).collect();
        holes.sort_by(|&x, &y| {
            radius[x]
                .partial_cmp(&radius[y])
                .unwrap()
                .then(x.cmp(&y))
        });
        for &i in holes.iter().take(target - count) {
            selected[i] = true;
        }
    }

    SamplingMask::from_flags(height, width, selected)
}
