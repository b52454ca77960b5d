//! One half of the expectation-consistent iteration: evaluate the estimator,
//! estimate its band divergences, and extrapolate the complementary input.

use num_complex::Complex64;

use super::divergence::{estimate_band_divergences, ProbeOptions};
use crate::wavelet::SubbandLayout;
use crate::{Error, Result};

/// Guard rails for the extrapolation step. Imperfect divergence estimates
/// can push `eta - gamma` to zero or below; clamping the divergence (plus
/// damping at the caller) is the standard stabilization, with the absolute
/// precision range as a final guard.
#[derive(Clone, Copy, Debug)]
pub struct PrecisionBounds {
    pub min: f64,
    pub max: f64,
    /// Band divergences are clamped to `[floor, 1 - floor]` before the
    /// precision algebra. Keeping the floor strictly positive is what lets a
    /// fully shrunk band recover: its zero divergence becomes a confident
    /// "this band is zero" message that the data half corrects on the next
    /// pass, instead of a know-nothing precision that re-floors itself every
    /// iteration.
    pub divergence_floor: f64,
}

impl Default for PrecisionBounds {
    fn default() -> Self {
        Self {
            min: 1e-8,
            max: 1e8,
            divergence_floor: 0.01,
        }
    }
}

impl PrecisionBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0) || !(self.max > self.min) {
            return Err(Error::InvalidParameter(format!(
                "precision bounds must satisfy 0 < min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if !(self.divergence_floor > 0.0 && self.divergence_floor < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "divergence floor must be in (0, 0.5), got {}",
                self.divergence_floor
            )));
        }
        Ok(())
    }

    pub fn clip(&self, value: f64) -> f64 {
        value.clamp(self.min, self.max)
    }
}

/// Result of one half-step.
pub struct HalfStep {
    pub xhat: Vec<Complex64>,
    /// Estimated band divergences of the estimator at `r`.
    pub divergences: Vec<f64>,
    /// Per-band effective posterior precision `gamma + gamma_next`; equals
    /// `gamma / d` exactly on unclipped bands.
    pub eta: Vec<f64>,
    /// Per-band `clip(gamma / d - gamma)`, the precision handed to the other
    /// half.
    pub gamma_next: Vec<f64>,
    /// Extrapolated input for the other half.
    pub r_next: Vec<Complex64>,
    /// Bands where `gamma_next` hit a bound.
    pub clipped: Vec<bool>,
}

/// The extrapolation algebra: given the estimate `xhat = f(r)` under
/// per-band precisions `gamma` and band divergences `d`, produce the
/// complementary message `(gamma_next, r_next)`.
///
/// Unclipped, `r_next = (eta * xhat - gamma * r) / gamma_next` with
/// `eta = gamma / d`. The division is carried out with `gamma + gamma_next`
/// in place of `eta`: algebraically identical when no clipping occurred.
///
/// Divergences are clamped to `[floor, 1 - floor]` first. `d >= 1` would
/// claim the estimator passed its input through and added nothing
/// (`eta - gamma <= 0`); `d <= 0` that it ignored its input entirely, which
/// a fully shrunk band reports exactly. The clamp keeps both messages finite
/// and, crucially, keeps a dead band recoverable: its message becomes a
/// confident "this band is zero" that the data half corrects on the next
/// pass. Flooring the precision instead (the obvious alternative) makes
/// death absorbing, because every later round trip rebuilds gamma from the
/// floor and the predicted noise SD never drops back to signal scale.
///
/// Bands whose precision still hits an absolute bound, and bands with a
/// non-finite divergence, skip the extrapolation and send `r_next = xhat`:
/// the algebra divides by gamma_next, so a floored band would amplify the
/// residual by up to gamma / gamma_min, and the raw estimate is the bounded
/// limit of what such a message can still say. The receiving half weighs it
/// by the floored precision, so its value barely matters; what matters is
/// that it stays at signal scale.
pub fn extrapolate(
    xhat: &[Complex64],
    r: &[Complex64],
    gamma: &[f64],
    divergences: &[f64],
    layout: &SubbandLayout,
    bounds: &PrecisionBounds,
) -> Result<(Vec<f64>, Vec<f64>, Vec<Complex64>, Vec<bool>)> {
    bounds.validate()?;
    let num_bands = layout.num_bands();
    if gamma.len() != num_bands || divergences.len() != num_bands {
        return Err(Error::DimensionMismatch {
            what: "extrapolation band vectors",
            expected: num_bands,
            got: gamma.len().min(divergences.len()),
        });
    }

    let mut eta = Vec::with_capacity(num_bands);
    let mut gamma_next = Vec::with_capacity(num_bands);
    let mut clipped = Vec::with_capacity(num_bands);
    let mut pass_estimate = vec![false; num_bands];
    for (l, (&g, &d)) in gamma.iter().zip(divergences).enumerate() {
        let (next, was_clipped) = if d.is_finite() {
            let dc = d.clamp(bounds.divergence_floor, 1.0 - bounds.divergence_floor);
            let raw = g / dc - g;
            let next = bounds.clip(raw);
            pass_estimate[l] = next != raw;
            (next, next != raw || dc != d)
        } else {
            // Broken probes; send a know-nothing message.
            pass_estimate[l] = true;
            (bounds.min, true)
        };
        if was_clipped {
            log::warn!("band {l}: divergence {d:.4} clips the precision step to {next:.3e}");
        }
        eta.push(g + next);
        gamma_next.push(next);
        clipped.push(was_clipped);
    }

    let mut r_next = vec![Complex64::ZERO; layout.len()];
    for (l, band) in layout.bands().iter().enumerate() {
        if pass_estimate[l] {
            r_next[band.range()].copy_from_slice(&xhat[band.range()]);
            continue;
        }
        let g = gamma[l];
        let gn = gamma_next[l];
        let eta_eff = eta[l];
        let inv = 1.0 / gn;
        for ((dst, xh), ri) in r_next[band.range()]
            .iter_mut()
            .zip(&xhat[band.range()])
            .zip(&r[band.range()])
        {
            *dst = (xh * eta_eff - ri * g) * inv;
        }
    }
    Ok((eta, gamma_next, r_next, clipped))
}

/// Evaluates `f`, estimates its divergences, and extrapolates.
pub fn gec_half_step<F>(
    f: F,
    r: &[Complex64],
    gamma: &[f64],
    layout: &SubbandLayout,
    probe: &ProbeOptions,
    bounds: &PrecisionBounds,
) -> Result<HalfStep>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
{
    let xhat = f(r)?;
    let divergences = estimate_band_divergences(&f, r, &xhat, layout, probe)?;
    let (eta, gamma_next, r_next, clipped) =
        extrapolate(&xhat, r, gamma, &divergences, layout, bounds)?;
    Ok(HalfStep {
        xhat,
        divergences,
        eta,
        gamma_next,
        r_next,
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::standard_complex_normal;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_pyramid(layout: &SubbandLayout, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..layout.len())
            .map(|_| standard_complex_normal(&mut rng))
            .collect()
    }

    /// The one-dimensional quadratic estimator `f(r) = (g r + gw y)/(g + gw)`
    /// has divergence `g/(g + gw)`, so eta = g + gw, gamma_next = gw, and
    /// r_next = y: the extrapolation exactly exposes the measurement.
    #[test]
    fn scalar_quadratic_exposes_the_measurement() {
        let layout = SubbandLayout::new(1, 1, 0).unwrap();
        let y = Complex64::new(2.0, -1.0);
        let (g, gw) = (0.7, 3.1);
        let r = [Complex64::new(0.4, 0.9)];
        let xhat = [(r[0] * g + y * gw) / (g + gw)];
        let d = [g / (g + gw)];
        let (eta, gamma_next, r_next, clipped) =
            extrapolate(&xhat, &r, &[g], &d, &layout, &PrecisionBounds::default()).unwrap();
        assert!((eta[0] - (g + gw)).abs() < 1e-12);
        assert!((gamma_next[0] - gw).abs() < 1e-12);
        assert!((r_next[0] - y).norm() < 1e-12);
        assert!(!clipped[0]);
    }

    /// Unclipped bands must satisfy gamma_next*r_next + gamma*r = eta*xhat.
    #[test]
    fn unclipped_consistency_identity() {
        let layout = SubbandLayout::new(8, 8, 1).unwrap();
        let xhat = random_pyramid(&layout, 1);
        let r = random_pyramid(&layout, 2);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let gamma: Vec<f64> = (0..4).map(|_| rng.gen_range(0.5..2.0)).collect();
        let d: Vec<f64> = (0..4).map(|_| rng.gen_range(0.2..0.8)).collect();
        let (eta, gamma_next, r_next, clipped) =
            extrapolate(&xhat, &r, &gamma, &d, &layout, &PrecisionBounds::default()).unwrap();
        assert!(clipped.iter().all(|c| !c));
        for (l, band) in layout.bands().iter().enumerate() {
            for i in band.range() {
                let lhs = r_next[i] * gamma_next[l] + r[i] * gamma[l];
                let rhs = xhat[i] * eta[l];
                assert!((lhs - rhs).norm() < 1e-12, "band {l}");
            }
        }
    }

    #[test]
    fn degenerate_divergences_clamp_to_the_floor_band() {
        let layout = SubbandLayout::new(4, 4, 0).unwrap();
        let xhat = random_pyramid(&layout, 4);
        let r = random_pyramid(&layout, 5);
        let bounds = PrecisionBounds::default();
        let g = 2.0;
        // d <= 0 (a fully shrunk band reports exactly zero) clamps to the
        // divergence floor: a high-precision message, not a know-nothing one.
        let strong = g * (1.0 - bounds.divergence_floor) / bounds.divergence_floor;
        for d in [0.0, -0.3] {
            let (eta, gn, rn, clipped) =
                extrapolate(&xhat, &r, &[g], &[d], &layout, &bounds).unwrap();
            assert!((gn[0] - strong).abs() < 1e-12, "d = {d}");
            assert!(clipped[0], "d = {d}");
            // The extrapolation stays on the exact algebra with the clamped
            // divergence, so the consistency identity still holds.
            for i in 0..rn.len() {
                let lhs = rn[i] * gn[0] + r[i] * g;
                let rhs = xhat[i] * eta[0];
                assert!((lhs - rhs).norm() < 1e-9, "d = {d}");
            }
        }
        // d >= 1 (pass-through estimator) clamps to the ceiling of the
        // divergence range: a weak but finite message.
        let weak = g * bounds.divergence_floor / (1.0 - bounds.divergence_floor);
        for d in [1.0, 1.4] {
            let (_, gn, _, clipped) =
                extrapolate(&xhat, &r, &[g], &[d], &layout, &bounds).unwrap();
            assert!((gn[0] - weak).abs() < 1e-12, "d = {d}");
            assert!(clipped[0], "d = {d}");
        }
        // A non-finite divergence means broken probes: floor the precision
        // and forward the raw estimate instead of the amplifying algebra.
        let (_, gn, rn, clipped) =
            extrapolate(&xhat, &r, &[g], &[f64::NAN], &layout, &bounds).unwrap();
        assert_eq!(gn[0], bounds.min);
        assert!(clipped[0]);
        assert_eq!(rn, xhat);
    }

    #[test]
    fn absolute_bound_clip_passes_the_estimate() {
        let layout = SubbandLayout::new(4, 4, 0).unwrap();
        let xhat = random_pyramid(&layout, 6);
        let r = random_pyramid(&layout, 7);
        let bounds = PrecisionBounds {
            min: 1e-8,
            max: 10.0,
            divergence_floor: 0.01,
        };
        // Tiny divergence: even after the clamp, gamma (1 - d)/d = 198
        // exceeds the ceiling; the band falls back to the raw estimate.
        let (_, gn, rn, clipped) =
            extrapolate(&xhat, &r, &[2.0], &[1e-9], &layout, &bounds).unwrap();
        assert_eq!(gn[0], 10.0);
        assert!(clipped[0]);
        assert_eq!(rn, xhat);
    }

    #[test]
    fn half_step_on_scalar_linear_map() {
        // f(r) = alpha r with alpha = 1/3: d -> 1/3, eta -> 3 gamma,
        // gamma_next -> 2 gamma, r_next -> (3 gamma xhat - gamma r)/(2 gamma)
        // = (3 alpha - 1)/2 * r = 0.
        let layout = SubbandLayout::new(32, 32, 0).unwrap();
        let r = random_pyramid(&layout, 8);
        let alpha = 1.0 / 3.0;
        let f = |x: &[Complex64]| Ok(x.iter().map(|v| v * alpha).collect::<Vec<_>>());
        let out = gec_half_step(
            f,
            &r,
            &[1.5],
            &layout,
            &ProbeOptions {
                probes_per_band: 64,
                ..ProbeOptions::default()
            },
            &PrecisionBounds::default(),
        )
        .unwrap();
        assert!((out.divergences[0] - alpha).abs() < 0.05 * alpha);
        assert!(!out.clipped[0]);
        // r_next collapses towards zero (exactly zero for exact d).
        let rn = crate::linalg::norm(&out.r_next) / crate::linalg::norm(&r);
        assert!(rn < 0.1, "residual scale {rn}");
    }
}
