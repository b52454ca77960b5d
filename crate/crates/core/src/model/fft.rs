//! Unitary 2-D DFT on row-major complex buffers.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::par;

pub enum Direction {
    Forward,
    Inverse,
}

/// Cached FFT plans for a fixed grid. Plans are `Send + Sync`; scratch is
/// allocated per call so the transform can run from any thread.
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// In-place unitary transform: both directions carry `1/sqrt(H*W)` so
    /// that forward followed by inverse is the identity and energy is
    /// preserved (`||F x|| = ||x||`).
    pub fn transform(&self, data: &mut [Complex64], dir: Direction) {
        assert_eq!(data.len(), self.height * self.width);
        let (row_plan, col_plan) = match dir {
            Direction::Forward => (&self.row_fwd, &self.col_fwd),
            Direction::Inverse => (&self.row_inv, &self.col_inv),
        };

        fft_rows(data, self.width, row_plan);
        let mut t = transpose(data, self.height, self.width);
        fft_rows(&mut t, self.height, col_plan);
        transpose_into(&t, self.width, self.height, data);

        let scale = 1.0 / ((self.height * self.width) as f64).sqrt();
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

fn fft_rows(data: &mut [Complex64], row_len: usize, plan: &Arc<dyn Fft<f64>>) {
    let scratch_len = plan.get_inplace_scratch_len();
    par::for_each_row(data, row_len, |row| {
        let mut scratch = vec![Complex64::ZERO; scratch_len];
        plan.process_with_scratch(row, &mut scratch);
    });
}

fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; data.len()];
    transpose_into(data, rows, cols, &mut out);
    out
}

fn transpose_into(data: &[Complex64], rows: usize, cols: usize, out: &mut [Complex64]) {
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = data[i * cols + j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm, rel_err};
    use crate::linop::standard_complex_normal;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_grid(h: usize, w: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..h * w).map(|_| standard_complex_normal(&mut rng)).collect()
    }

    #[test]
    fn round_trip_is_identity() {
        let (h, w) = (16, 24);
        let fft = Fft2::new(h, w);
        let x = random_grid(h, w, 0);
        let mut y = x.clone();
        fft.transform(&mut y, Direction::Forward);
        fft.transform(&mut y, Direction::Inverse);
        assert!(rel_err(&y, &x) < 1e-13);
    }

    #[test]
    fn transform_preserves_energy() {
        let (h, w) = (32, 32);
        let fft = Fft2::new(h, w);
        let x = random_grid(h, w, 1);
        let mut y = x.clone();
        fft.transform(&mut y, Direction::Forward);
        assert!((norm(&y) - norm(&x)).abs() < 1e-10 * norm(&x));
    }

    #[test]
    fn impulse_transforms_to_flat_spectrum() {
        let (h, w) = (8, 8);
        let fft = Fft2::new(h, w);
        let mut x = vec![Complex64::ZERO; h * w];
        x[0] = Complex64::ONE;
        fft.transform(&mut x, Direction::Forward);
        let expect = 1.0 / ((h * w) as f64).sqrt();
        for v in &x {
            assert!((v.re - expect).abs() < 1e-14);
            assert!(v.im.abs() < 1e-14);
        }
    }

    #[test]
    fn matches_direct_dft_on_small_grid() {
        let (h, w) = (4, 6);
        let fft = Fft2::new(h, w);
        let x = random_grid(h, w, 2);
        let mut got = x.clone();
        fft.transform(&mut got, Direction::Forward);

        let scale = 1.0 / ((h * w) as f64).sqrt();
        for ku in 0..h {
            for kv in 0..w {
                let mut acc = Complex64::ZERO;
                for u in 0..h {
                    for v in 0..w {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * ((ku * u) as f64 / h as f64 + (kv * v) as f64 / w as f64);
                        acc += x[u * w + v] * Complex64::from_polar(1.0, phase);
                    }
                }
                let want = acc * scale;
                assert!((got[ku * w + kv] - want).norm() < 1e-12);
            }
        }
    }
}
