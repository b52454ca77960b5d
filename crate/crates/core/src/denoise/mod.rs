//! Pluggable denoisers acting on wavelet pyramids with per-band noise levels.
//!
//! A denoiser receives the full coefficient vector plus one noise SD per
//! subband and returns a cleaned vector of the same layout. The built-in
//! denoiser is per-band complex soft-thresholding (the proximal operator of a
//! band-weighted l1 penalty); learned denoisers plug in over the byte
//! protocol in [`bridge`] without linking against this crate.

mod bridge;

pub use bridge::{
    encode_request, encode_response, parse_request, parse_response, read_frame, serve_http,
    serve_stream, write_frame, BridgeHeader, ExternalDenoiser, Transport, WIRE_MAGIC,
    WIRE_VERSION,
};

use num_complex::Complex64;

use crate::wavelet::SubbandLayout;
use crate::{Error, Result};

/// One denoising call: the noisy pyramid and the per-band noise SDs the
/// caller believes it carries.
pub struct DenoiserRequest<'a> {
    pub pyramid: &'a [Complex64],
    /// One SD per band, canonical band order, strictly positive.
    pub band_sds: &'a [f64],
    pub layout: &'a SubbandLayout,
}

impl DenoiserRequest<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.pyramid.len() != self.layout.len() {
            return Err(Error::DimensionMismatch {
                what: "denoiser request pyramid",
                expected: self.layout.len(),
                got: self.pyramid.len(),
            });
        }
        if self.band_sds.len() != self.layout.num_bands() {
            return Err(Error::DimensionMismatch {
                what: "denoiser request band SDs",
                expected: self.layout.num_bands(),
                got: self.band_sds.len(),
            });
        }
        if !self.band_sds.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::InvalidParameter(
                "band SDs must be finite and strictly positive".into(),
            ));
        }
        Ok(())
    }
}

pub trait Denoiser: Sync {
    fn denoise(&self, req: &DenoiserRequest) -> Result<Vec<Complex64>>;

    /// Short tag recorded in run traces.
    fn name(&self) -> &str;
}

/// How the per-band threshold is derived from the reported noise SD.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdMode {
    /// tau = lambda * sd^2. Matches the proximal operator of
    /// g(c) = lambda * ||c||_1 under the precision-weighted distance.
    VarianceScaled,
    /// tau = lambda * sd, the classical universal-threshold style.
    SdScaled,
}

/// Which part of each coefficient the shrinkage acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShrinkPhase {
    /// Shrink the magnitude, keep the phase.
    Complex,
    /// Shrink the real part and drop the imaginary part entirely. The right
    /// mode when the ground truth is known to be real-valued.
    RealPart,
}

/// Per-band soft-thresholding.
#[derive(Clone, Debug)]
pub struct SubbandSoftThreshold {
    pub lambda: f64,
    pub mode: ThresholdMode,
    pub phase: ShrinkPhase,
}

impl SubbandSoftThreshold {
    pub fn new(lambda: f64, mode: ThresholdMode, phase: ShrinkPhase) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "soft-threshold lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(Self { lambda, mode, phase })
    }

    /// The threshold applied to band `l` for the request's reported SDs.
    pub fn threshold(&self, band_sd: f64) -> f64 {
        match self.mode {
            ThresholdMode::VarianceScaled => self.lambda * band_sd * band_sd,
            ThresholdMode::SdScaled => self.lambda * band_sd,
        }
    }
}

impl Default for SubbandSoftThreshold {
    /// Variance-scaled with lambda 1.2, magnitude shrinkage.
    fn default() -> Self {
        Self {
            lambda: 1.2,
            mode: ThresholdMode::VarianceScaled,
            phase: ShrinkPhase::Complex,
        }
    }
}

fn soft_magnitude(v: Complex64, tau: f64) -> Complex64 {
    let mag = v.norm();
    if mag <= tau {
        Complex64::ZERO
    } else {
        v * ((mag - tau) / mag)
    }
}

fn soft_real(v: Complex64, tau: f64) -> Complex64 {
    let x = v.re;
    let shrunk = if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    };
    Complex64::new(shrunk, 0.0)
}

impl Denoiser for SubbandSoftThreshold {
    fn denoise(&self, req: &DenoiserRequest) -> Result<Vec<Complex64>> {
        req.validate()?;
        let mut out = req.pyramid.to_vec();
        for (band, &sd) in req.layout.bands().iter().zip(req.band_sds) {
            let tau = self.threshold(sd);
            let chunk = &mut out[band.range()];
            match self.phase {
                ShrinkPhase::Complex => {
                    for v in chunk.iter_mut() {
                        *v = soft_magnitude(*v, tau);
                    }
                }
                ShrinkPhase::RealPart => {
                    for v in chunk.iter_mut() {
                        *v = soft_real(*v, tau);
                    }
                }
            }
        }
        Ok(out)
    }

    fn name(&self) -> &str {
        "subband-soft-threshold"
    }
}

/// Exact band-averaged divergence of [`SubbandSoftThreshold`], the reference
/// the Monte-Carlo estimator is checked against.
///
/// Real-part mode: the per-coefficient derivative is an indicator, so the
/// band average is the fraction of real parts above threshold. Complex mode:
/// a surviving coefficient contributes `1 - tau/(2|v|)` per (re, im) pair,
/// the average of the two real partial derivatives under the magnitude
/// shrinkage.
pub fn soft_threshold_divergence(
    req: &DenoiserRequest,
    denoiser: &SubbandSoftThreshold,
) -> Result<Vec<f64>> {
    req.validate()?;
    let mut d = Vec::with_capacity(req.layout.num_bands());
    for (band, &sd) in req.layout.bands().iter().zip(req.band_sds) {
        let tau = denoiser.threshold(sd);
        let chunk = &req.pyramid[band.range()];
        let total: f64 = chunk
            .iter()
            .map(|v| match denoiser.phase {
                ShrinkPhase::RealPart => {
                    if v.re.abs() > tau {
                        1.0
                    } else {
                        0.0
                    }
                }
                ShrinkPhase::Complex => {
                    let mag = v.norm();
                    if mag > tau {
                        1.0 - tau / (2.0 * mag)
                    } else {
                        0.0
                    }
                }
            })
            .sum();
        d.push(total / band.len() as f64);
    }
    Ok(d)
}

/// Returns the input unchanged. Useful as a protocol check and as the
/// degenerate denoiser in self-tests.
#[derive(Clone, Copy, Debug, Default)]
pub struct EchoDenoiser;

impl Denoiser for EchoDenoiser {
    fn denoise(&self, req: &DenoiserRequest) -> Result<Vec<Complex64>> {
        req.validate()?;
        Ok(req.pyramid.to_vec())
    }

    fn name(&self) -> &str {
        "echo"
    }
}
