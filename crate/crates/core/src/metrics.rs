//! Reconstruction quality metrics and error-statistics diagnostics.

use num_complex::Complex64;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::model::Image;
use crate::trace::RunTrace;
use crate::wavelet::{subband_stats, SubbandLayout};
use crate::{Error, Result};

pub const PEAK: f64 = 255.0;
pub const SSIM_WINDOW: usize = 8;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_same_shape(a: &Image, b: &Image) -> Result<()> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::DimensionMismatch {
            what: "metric image pair",
            expected: b.len(),
            got: a.len(),
        });
    }
    Ok(())
}

/// Peak signal-to-noise ratio over real parts with peak 255. Identical
/// images return `f64::INFINITY`.
pub fn psnr(candidate: &Image, reference: &Image) -> Result<f64> {
    check_same_shape(candidate, reference)?;
    let n = reference.len() as f64;
    let mse: f64 = candidate
        .data()
        .iter()
        .zip(reference.data())
        .map(|(c, r)| (c.re - r.re) * (c.re - r.re))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / mse).log10())
}

/// Mean structural similarity over all fully contained 8x8 windows
/// (stride 1), standard constants, real parts.
pub fn ssim(candidate: &Image, reference: &Image) -> Result<f64> {
    check_same_shape(candidate, reference)?;
    let (h, w) = (reference.height(), reference.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidParameter(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
        )));
    }
    let c1 = (SSIM_K1 * PEAK) * (SSIM_K1 * PEAK);
    let c2 = (SSIM_K2 * PEAK) * (SSIM_K2 * PEAK);
    let a = candidate.real_part();
    let b = reference.real_part();
    let win = SSIM_WINDOW;
    let wn = (win * win) as f64;

    let mut total = 0.0;
    let mut count = 0usize;
    for top in 0..=(h - win) {
        for left in 0..=(w - win) {
            let mut sa = 0.0;
            let mut sb = 0.0;
            let mut saa = 0.0;
            let mut sbb = 0.0;
            let mut sab = 0.0;
            for r in top..top + win {
                for c in left..left + win {
                    let x = a[r * w + c];
                    let y = b[r * w + c];
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            }
            let ma = sa / wn;
            let mb = sb / wn;
            let va = saa / wn - ma * ma;
            let vb = sbb / wn - mb * mb;
            let cov = sab / wn - ma * mb;
            let s = ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            total += s;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Excess kurtosis `m4 / m2^2 - 3` of centered samples. Zero for a Gaussian.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 4 {
        return f64::NAN;
    }
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    if m2 == 0.0 {
        return f64::NAN;
    }
    m4 / (m2 * m2) - 3.0
}

/// Kolmogorov-Smirnov statistic of standardized samples against the
/// standard normal CDF.
pub fn ks_normal_statistic(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if sd == 0.0 {
        return f64::NAN;
    }
    let mut z: Vec<f64> = xs.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut d: f64 = 0.0;
    for (i, &x) in z.iter().enumerate() {
        let cdf = normal.cdf(x);
        let hi = (i + 1) as f64 / n as f64 - cdf;
        let lo = cdf - i as f64 / n as f64;
        d = d.max(hi.abs()).max(lo.abs());
    }
    d
}

/// Asymptotic 1% critical value of the one-sample KS test.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// True when the standardized samples pass a 1% KS-against-normal check.
pub fn ks_normal_pass_1pct(xs: &[f64]) -> bool {
    let d = ks_normal_statistic(xs);
    d.is_finite() && d < ks_critical_1pct(xs.len())
}

#[derive(Clone, Debug, Serialize)]
pub struct QqBand {
    pub band: usize,
    pub n: usize,
    /// Centered SD used for standardization.
    pub sd: f64,
    /// Normal quantile at the Blom plotting position.
    pub theoretical: Vec<f64>,
    /// Sorted standardized real parts.
    pub empirical: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct QqReport {
    pub bands: Vec<QqBand>,
    /// Bands excluded from the report, with the reason.
    pub skipped: Vec<(usize, String)>,
}

/// Normal quantile-quantile data per band of an error vector: standardized
/// real parts against quantiles at Blom positions `(i - 3/8) / (n + 1/4)`.
/// Bands with fewer than `min_n` samples or zero SD are skipped with notice.
pub fn qq_export(errors: &[Complex64], layout: &SubbandLayout, min_n: usize) -> Result<QqReport> {
    if errors.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            what: "qq error vector",
            expected: layout.len(),
            got: errors.len(),
        });
    }
    let min_n = min_n.max(16);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut report = QqReport {
        bands: Vec::new(),
        skipped: Vec::new(),
    };
    for (l, band) in layout.bands().iter().enumerate() {
        let slice = &errors[band.range()];
        if slice.len() < min_n {
            report
                .skipped
                .push((l, format!("band has {} samples, need {min_n}", slice.len())));
            continue;
        }
        let re: Vec<f64> = slice.iter().map(|v| v.re).collect();
        let n = re.len() as f64;
        let mean = re.iter().sum::<f64>() / n;
        let sd = (re.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        if sd == 0.0 {
            report.skipped.push((l, "band SD is zero".into()));
            continue;
        }
        let mut z: Vec<f64> = re.iter().map(|x| (x - mean) / sd).collect();
        z.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let theoretical = (0..z.len())
            .map(|i| normal.inverse_cdf(((i + 1) as f64 - 0.375) / (n + 0.25)))
            .collect();
        report.bands.push(QqBand {
            band: l,
            n: z.len(),
            sd,
            theoretical,
            empirical: z,
        });
    }
    Ok(report)
}

pub fn write_qq_csv<W: std::io::Write>(mut w: W, band: &QqBand) -> Result<()> {
    writeln!(w, "theoretical,empirical")?;
    for (t, e) in band.theoretical.iter().zip(&band.empirical) {
        writeln!(w, "{t},{e}")?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SdEvolutionRow {
    pub iteration: usize,
    pub band: usize,
    pub predicted: f64,
    pub empirical: f64,
    pub ratio: f64,
}

/// Predicted versus empirical denoiser-input SD per iteration and band.
/// Uses the empirical SDs recorded in the trace when present; otherwise
/// recomputes them from recorded input snapshots and the reference
/// coefficients. Errors when neither is available.
pub fn sd_evolution(
    trace: &RunTrace,
    oracle: Option<(&[Complex64], &SubbandLayout)>,
) -> Result<Vec<SdEvolutionRow>> {
    let mut rows = Vec::new();
    let mut have_empirical = false;
    for rec in &trace.records {
        for band in &rec.bands {
            if let (Some(p), Some(e)) = (band.predicted_sd, band.empirical_sd) {
                have_empirical = true;
                rows.push(SdEvolutionRow {
                    iteration: rec.iteration,
                    band: band.band,
                    predicted: p,
                    empirical: e,
                    ratio: if e > 0.0 { p / e } else { f64::NAN },
                });
            }
        }
    }
    if have_empirical {
        return Ok(rows);
    }

    let (c0, layout) = oracle.ok_or_else(|| {
        Error::MissingData(
            "trace has no oracle band SDs; rerun the solver with the oracle flag enabled".into(),
        )
    })?;
    if trace.denoiser_inputs.is_empty() {
        return Err(Error::MissingData(
            "trace has neither oracle band SDs nor input snapshots; rerun with the oracle flag"
                .into(),
        ));
    }
    for (rec, input) in trace.records.iter().zip(&trace.denoiser_inputs) {
        let diff = crate::linalg::sub(input, c0);
        let stats = subband_stats(&diff, layout)?;
        for band in &rec.bands {
            if let Some(p) = band.predicted_sd {
                let e = stats[band.band].sd;
                rows.push(SdEvolutionRow {
                    iteration: rec.iteration,
                    band: band.band,
                    predicted: p,
                    empirical: e,
                    ratio: if e > 0.0 { p / e } else { f64::NAN },
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_sd_evolution_csv<W: std::io::Write>(mut w: W, rows: &[SdEvolutionRow]) -> Result<()> {
    writeln!(w, "iteration,band,predicted_sd,empirical_sd,ratio")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.iteration, r.band, r.predicted, r.empirical, r.ratio
        )?;
    }
    Ok(())
}

/// Absolute difference image `|candidate - reference|` (complex magnitude).
pub fn error_map(candidate: &Image, reference: &Image) -> Result<Vec<f64>> {
    check_same_shape(candidate, reference)?;
    Ok(candidate
        .data()
        .iter()
        .zip(reference.data())
        .map(|(c, r)| (c - r).norm())
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorMapSidecar {
    pub height: usize,
    pub width: usize,
    /// Value mapped to the full 16-bit range in the PNG.
    pub peak: f64,
}

/// Writes the error map as a 16-bit PNG on a fixed linear scale plus a JSON
/// sidecar recording the scale.
pub fn write_error_map<P: AsRef<std::path::Path>>(
    path: P,
    candidate: &Image,
    reference: &Image,
    peak: Option<f64>,
) -> Result<ErrorMapSidecar> {
    let path = path.as_ref();
    let map = error_map(candidate, reference)?;
    let used = crate::io::write_values_png16(path, reference.height(), reference.width(), &map, peak)?;
    let sidecar = ErrorMapSidecar {
        height: reference.height(),
        width: reference.width(),
        peak: used,
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::InvalidParameter(format!("error map sidecar: {e}")))?;
    std::fs::write(path.with_extension("scale.json"), json)?;
    Ok(sidecar)
}

/// Summary quality numbers for a finished run.
#[derive(Clone, Debug, Serialize)]
pub struct QualityReport {
    pub solver: String,
    pub iterations: usize,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub diverged: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::standard_normal;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn gauss_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n).map(|_| standard_normal(&mut rng)).collect()
    }

    #[test]
    fn psnr_of_known_offset() {
        // Constant offset of 1.0 -> MSE 1 -> 10 log10(255^2) = 48.1308 dB.
        let a = Image::from_real(8, 8, &[10.0; 64]).unwrap();
        let b = Image::from_real(8, 8, &[11.0; 64]).unwrap();
        let got = psnr(&a, &b).unwrap();
        assert!((got - 48.13080361).abs() < 1e-6, "psnr {got}");
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let a = Image::from_real(8, 8, &[3.0; 64]).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_ignores_imaginary_parts() {
        let a = Image::new(4, 4, vec![Complex64::new(5.0, 9.0); 16]).unwrap();
        let b = Image::new(4, 4, vec![Complex64::new(5.0, -2.0); 16]).unwrap();
        assert_eq!(psnr(&a, &b).unwrap(), f64::INFINITY);
    }

    #[test]
    fn ssim_bounds_and_identity() {
        let vals = gauss_vec(256, 0)
            .iter()
            .map(|v| 128.0 + 40.0 * v)
            .collect::<Vec<_>>();
        let a = Image::from_real(16, 16, &vals).unwrap();
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);

        let noisy: Vec<f64> = vals
            .iter()
            .zip(gauss_vec(256, 1))
            .map(|(v, n)| v + 30.0 * n)
            .collect();
        let b = Image::from_real(16, 16, &noisy).unwrap();
        let s = ssim(&b, &a).unwrap();
        assert!(s > 0.0 && s < 1.0, "ssim {s}");

        let tiny = Image::from_real(4, 4, &[0.0; 16]).unwrap();
        assert!(ssim(&tiny, &tiny).is_err());
    }

    #[test]
    fn kurtosis_separates_gaussian_from_laplacian() {
        let g = gauss_vec(200_000, 2);
        let kg = excess_kurtosis(&g);
        assert!(kg.abs() < 0.1, "gaussian kurtosis {kg}");

        // Laplace via difference of exponentials has excess kurtosis 3.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let lap: Vec<f64> = (0..200_000)
            .map(|_| {
                let u: f64 = rand::Rng::gen_range(&mut rng, -0.5..0.5);
                -u.signum() * (1.0 - 2.0 * u.abs()).ln()
            })
            .collect();
        let kl = excess_kurtosis(&lap);
        assert!((kl - 3.0).abs() < 0.3, "laplace kurtosis {kl}");
    }

    #[test]
    fn ks_accepts_gaussian_rejects_uniform() {
        let g = gauss_vec(4096, 4);
        assert!(ks_normal_pass_1pct(&g));

        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let u: Vec<f64> = (0..4096).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect();
        assert!(!ks_normal_pass_1pct(&u));
    }

    #[test]
    fn qq_is_near_diagonal_for_gaussian_errors() {
        let layout = SubbandLayout::new(64, 64, 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let errors: Vec<Complex64> = (0..layout.len())
            .map(|_| Complex64::new(2.0 * standard_normal(&mut rng), 0.0))
            .collect();
        let report = qq_export(&errors, &layout, 16).unwrap();
        assert_eq!(report.bands.len(), 4);
        assert!(report.skipped.is_empty());
        for band in &report.bands {
            // Middle quantiles hug the diagonal for Gaussian data.
            let n = band.n;
            for i in (n / 10)..(9 * n / 10) {
                let d = (band.theoretical[i] - band.empirical[i]).abs();
                assert!(d < 0.2, "band {} quantile {i} off by {d}", band.band);
            }
        }
    }

    #[test]
    fn qq_skips_small_and_degenerate_bands() {
        let layout = SubbandLayout::new(8, 8, 2).unwrap();
        // Finest-scale bands have 16 samples; the 2x2 coarse bands get skipped.
        let errors: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new(i as f64, 0.0))
            .collect();
        let report = qq_export(&errors, &layout, 16).unwrap();
        assert!(!report.skipped.is_empty());
        for (band, _) in &report.skipped {
            assert!(layout.band(*band).len() < 16);
        }

        // Zero-SD band: constant values.
        let constant: Vec<Complex64> = vec![Complex64::ONE; 64];
        let layout1 = SubbandLayout::new(8, 8, 1).unwrap();
        let report = qq_export(&constant, &layout1, 16).unwrap();
        assert_eq!(report.bands.len(), 0);
        assert_eq!(report.skipped.len(), 4);
    }

    #[test]
    fn sd_evolution_requires_oracle_data() {
        let trace = RunTrace::new("demo");
        let err = sd_evolution(&trace, None).unwrap_err();
        assert!(matches!(err, Error::MissingData(_)));
    }

    #[test]
    fn error_map_is_magnitude_difference() {
        let a = Image::new(4, 4, vec![Complex64::new(3.0, 4.0); 16]).unwrap();
        let b = Image::zeros(4, 4);
        let m = error_map(&a, &b).unwrap();
        for v in m {
            assert!((v - 5.0).abs() < 1e-12);
        }
    }
}
