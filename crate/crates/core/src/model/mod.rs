//! Measurement model: images, sampling masks, coil maps, and the
//! undersampled multi-coil Fourier operator
//! `A x = stack_c ( M F Diag(s_c) x )` with unitary `F`.

pub mod coils;
pub mod fft;
pub mod mask;

pub use coils::{biot_savart_maps, CoilMaps, CoilOptions};
pub use mask::{make_variable_density_mask, MaskOptions, SamplingMask};

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::linalg;
use crate::linop::{standard_normal, LinearOperator};
use crate::{Error, Result};
use fft::{Direction, Fft2};

/// Row-major complex image.
#[derive(Clone, Debug)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::DimensionMismatch {
                what: "image storage",
                expected: height * width,
                got: data.len(),
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![Complex64::ZERO; height * width],
        }
    }

    pub fn from_real(height: usize, width: usize, values: &[f64]) -> Result<Self> {
        let data = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.re).collect()
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|v| v.im == 0.0)
    }
}

/// The undersampled multi-coil Fourier measurement operator.
pub struct ForwardOp {
    mask: SamplingMask,
    coils: CoilMaps,
    fft: Fft2,
    /// Multiplies the forward DFT output. Unity in normal operation; the
    /// self-test suite sets it off-unity to prove the adjoint checks can fail.
    dft_scale: f64,
}

impl ForwardOp {
    pub fn new(mask: SamplingMask, coils: CoilMaps) -> Result<Self> {
        if mask.height() != coils.height() || mask.width() != coils.width() {
            return Err(Error::DimensionMismatch {
                what: "mask vs coil grid",
                expected: mask.height() * mask.width(),
                got: coils.height() * coils.width(),
            });
        }
        let fft = Fft2::new(mask.height(), mask.width());
        Ok(Self {
            mask,
            coils,
            fft,
            dft_scale: 1.0,
        })
    }

    /// Draws the mask and simulates the coil maps in one call.
    pub fn build(
        height: usize,
        width: usize,
        coils: usize,
        mask_opts: &MaskOptions,
        coil_opts: &CoilOptions,
    ) -> Result<Self> {
        let mask = make_variable_density_mask(height, width, mask_opts)?;
        let maps = biot_savart_maps(height, width, coils, coil_opts)?;
        Self::new(mask, maps)
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }

    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn num_coils(&self) -> usize {
        self.coils.num_coils()
    }

    pub fn num_samples(&self) -> usize {
        self.mask.num_selected()
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn coil_maps(&self) -> &CoilMaps {
        &self.coils
    }

    /// Self-test hook: corrupts the forward DFT scaling so adjoint and
    /// round-trip checks fail. Never used in reconstruction paths.
    pub fn corrupt_dft_scale(&mut self, scale: f64) {
        self.dft_scale = scale;
    }

    /// Same mask-free operator, for reference energies and oracles.
    pub fn with_full_mask(&self) -> Result<ForwardOp> {
        ForwardOp::new(
            SamplingMask::full(self.height(), self.width()),
            self.coils.clone(),
        )
    }

    fn coil_forward(&self, c: usize, x: &[Complex64]) -> Vec<Complex64> {
        let map = self.coils.map(c);
        let mut grid: Vec<Complex64> = map.iter().zip(x).map(|(s, v)| s * v).collect();
        self.fft.transform(&mut grid, Direction::Forward);
        if self.dft_scale != 1.0 {
            for v in grid.iter_mut() {
                *v *= self.dft_scale;
            }
        }
        self.mask.gather(&grid)
    }

    fn coil_adjoint(&self, c: usize, seg: &[Complex64]) -> Vec<Complex64> {
        let mut grid = self.mask.scatter(seg);
        self.fft.transform(&mut grid, Direction::Inverse);
        let map = self.coils.map(c);
        grid.iter_mut().zip(map).for_each(|(v, s)| *v *= s.conj());
        if self.dft_scale != 1.0 {
            for v in grid.iter_mut() {
                *v *= self.dft_scale;
            }
        }
        grid
    }
}

impl LinearOperator for ForwardOp {
    fn rows(&self) -> usize {
        self.coils.num_coils() * self.mask.num_selected()
    }

    fn cols(&self) -> usize {
        self.height() * self.width()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols());
        let segs = crate::par::map_indices(self.num_coils(), |c| self.coil_forward(c, x));
        let mut out = Vec::with_capacity(self.rows());
        for seg in segs {
            out.extend_from_slice(&seg);
        }
        out
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.rows());
        let m = self.num_samples();
        let parts = crate::par::map_indices(self.num_coils(), |c| {
            self.coil_adjoint(c, &y[c * m..(c + 1) * m])
        });
        let mut out = vec![Complex64::ZERO; self.cols()];
        for part in parts {
            for (o, p) in out.iter_mut().zip(&part) {
                *o += p;
            }
        }
        out
    }

    /// Closed form: each retained k-space row of coil `c` has squared norm
    /// `sum_n |s_c[n]|^2 / N`, so the total is `M / N * sum_{c,n} |s_c[n]|^2`
    /// (exactly `M` under joint sum-of-squares normalization).
    fn frobenius_norm_sq(&self) -> f64 {
        let n = self.cols() as f64;
        let m = self.num_samples() as f64;
        let energy: f64 = (0..self.num_coils())
            .map(|c| linalg::norm_sq(self.coils.map(c)))
            .sum();
        self.dft_scale * self.dft_scale * m / n * energy
    }
}

/// Measurements with the noise precision actually used to generate them.
#[derive(Clone, Debug)]
pub struct Measurement {
    pub y: Vec<Complex64>,
    /// Noise precision `gamma_w`; `f64::INFINITY` marks noiseless data.
    pub gamma_w: f64,
    pub snr_db: f64,
    pub seed: u64,
}

/// Simulates measurements at a pre-masking SNR: `gamma_w` is chosen so that
/// `10 log10( ||A_full x0||^2 / (C N / gamma_w) ) = snr_db`, then complex
/// white noise of per-component variance `1/gamma_w` is added to the masked
/// measurements. `snr_db = f64::INFINITY` requests noiseless data.
pub fn measure(x0: &Image, op: &ForwardOp, snr_db: f64, seed: u64) -> Result<Measurement> {
    if x0.height() != op.height() || x0.width() != op.width() {
        return Err(Error::DimensionMismatch {
            what: "image vs operator grid",
            expected: op.cols(),
            got: x0.len(),
        });
    }
    let clean = op.apply(x0.data());

    if snr_db == f64::INFINITY {
        return Ok(Measurement {
            y: clean,
            gamma_w: f64::INFINITY,
            snr_db,
            seed,
        });
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!("invalid snr_db {snr_db}")));
    }

    let full = op.with_full_mask()?;
    let signal_energy = linalg::norm_sq(&full.apply(x0.data()));
    if signal_energy == 0.0 {
        return Err(Error::InvalidParameter(
            "cannot set a finite SNR for an all-zero image".into(),
        ));
    }
    let c = op.num_coils() as f64;
    let n = op.cols() as f64;
    let gamma_w = c * n * 10f64.powf(snr_db / 10.0) / signal_energy;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sd = (0.5 / gamma_w).sqrt();
    let y = clean
        .iter()
        .map(|v| {
            Complex64::new(
                v.re + sd * standard_normal(&mut rng),
                v.im + sd * standard_normal(&mut rng),
            )
        })
        .collect();

    Ok(Measurement {
        y,
        gamma_w,
        snr_db,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, norm_sq, rel_err};
    use crate::linop::standard_complex_normal;
    use rand::Rng;

    fn test_op(h: usize, w: usize, coils: usize, reduction: f64, seed: u64) -> ForwardOp {
        let mask = make_variable_density_mask(
            h,
            w,
            &MaskOptions {
                reduction,
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let maps = biot_savart_maps(h, w, coils, &CoilOptions::default()).unwrap();
        ForwardOp::new(mask, maps).unwrap()
    }

    fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n).map(|_| standard_complex_normal(&mut rng)).collect()
    }

    #[test]
    fn adjoint_identity_across_configurations() {
        for (coils, reduction) in [(1, 2.0), (4, 4.0), (3, 1.0)] {
            let op = test_op(16, 16, coils, reduction, 9);
            let x = random_vec(op.cols(), 1);
            let y = random_vec(op.rows(), 2);
            let lhs = dot(&y, &op.apply(&x));
            let rhs = dot(&op.apply_adjoint(&y), &x);
            assert!(
                (lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0),
                "coils={coils} R={reduction}"
            );
        }
    }

    #[test]
    fn full_mask_preserves_energy_under_sos_normalization() {
        for coils in [1, 4] {
            let op = test_op(16, 16, coils, 1.0, 0);
            let x = random_vec(op.cols(), 3);
            let y = op.apply(&x);
            assert!(
                (norm_sq(&y) - norm_sq(&x)).abs() <= 1e-10 * norm_sq(&x),
                "coils={coils}"
            );
        }
    }

    #[test]
    fn frobenius_closed_form_matches_probing() {
        for coils in [1, 3] {
            let op = test_op(8, 8, coils, 2.0, 4);
            let direct = op.frobenius_norm_sq();
            let mut probed = 0.0;
            let mut e = vec![Complex64::ZERO; op.cols()];
            for j in 0..op.cols() {
                e[j] = Complex64::ONE;
                probed += norm_sq(&op.apply(&e));
                e[j] = Complex64::ZERO;
            }
            assert!(
                (probed - direct).abs() <= 1e-8 * direct,
                "coils={coils}: probed {probed} vs closed form {direct}"
            );
            // Under joint SOS normalization the closed form reduces to M.
            assert!((direct - op.num_samples() as f64).abs() <= 1e-8 * direct);
        }
    }

    #[test]
    fn output_length_is_coils_times_samples() {
        let op = test_op(16, 16, 4, 4.0, 5);
        let x = random_vec(op.cols(), 6);
        assert_eq!(op.apply(&x).len(), 4 * op.num_samples());
    }

    #[test]
    fn noiseless_sentinel_returns_clean_measurements() {
        let op = test_op(16, 16, 1, 2.0, 7);
        let x0 = Image::new(16, 16, random_vec(256, 8)).unwrap();
        let m = measure(&x0, &op, f64::INFINITY, 0).unwrap();
        assert_eq!(m.gamma_w, f64::INFINITY);
        assert!(rel_err(&m.y, &op.apply(x0.data())) == 0.0);
    }

    #[test]
    fn measurement_is_deterministic_per_seed() {
        let op = test_op(16, 16, 2, 2.0, 7);
        let x0 = Image::new(16, 16, random_vec(256, 9)).unwrap();
        let a = measure(&x0, &op, 30.0, 11).unwrap();
        let b = measure(&x0, &op, 30.0, 11).unwrap();
        assert_eq!(a.y, b.y);
        let c = measure(&x0, &op, 30.0, 12).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn zero_image_with_finite_snr_is_rejected() {
        let op = test_op(8, 8, 1, 2.0, 0);
        let x0 = Image::zeros(8, 8);
        assert!(matches!(
            measure(&x0, &op, 40.0, 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn empirical_snr_matches_request() {
        // Average the realized noise power over many seeds and check the
        // resulting SNR against the requested level.
        let op = test_op(64, 64, 2, 4.0, 1);
        let mut rng = ChaCha12Rng::seed_from_u64(500);
        let x0 = Image::new(
            64,
            64,
            (0..64 * 64)
                .map(|_| Complex64::new(255.0 * rng.gen::<f64>(), 0.0))
                .collect(),
        )
        .unwrap();
        let clean = op.apply(x0.data());
        let full = op.with_full_mask().unwrap();
        let signal_energy = norm_sq(&full.apply(x0.data()));
        let c_n = (op.num_coils() * op.cols()) as f64;

        let seeds = 200;
        let mut noise_acc = 0.0;
        let mut count = 0usize;
        for seed in 0..seeds {
            let m = measure(&x0, &op, 40.0, seed).unwrap();
            noise_acc += norm_sq(&crate::linalg::sub(&m.y, &clean));
            count += m.y.len();
        }
        let mean_noise_power = noise_acc / count as f64;
        let snr = 10.0 * (signal_energy / (c_n * mean_noise_power)).log10();
        assert!((snr - 40.0).abs() < 0.2, "empirical snr {snr}");
    }
}
