//! Monte-Carlo estimation of per-band Jacobian traces.
//!
//! For a map `f` on pyramids, the band divergence is `tr{Q_ll} / N_l` with
//! `Q` the Jacobian of `f` at `r`. It is estimated from finite differences
//! against real Gaussian probes confined to one band: `d_l = Re{q_l^H [f(r +
//! delta q_l) - f(r)]} / (delta N_l)`. For linear maps the finite difference
//! is exact and the only estimation noise is the chi-squared concentration
//! of `||q||^2 / N_l`.

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::linop::fill_standard_normal_real;
use crate::wavelet::{subband_stats, SubbandLayout};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeMode {
    /// One probe per band, one `f` evaluation each: the L-fold cost buys
    /// exact isolation of the diagonal blocks.
    PerBand,
    /// A single full-pyramid probe and one `f` evaluation; cross-band terms
    /// have zero mean but add variance.
    Shared,
}

#[derive(Clone, Debug)]
pub struct ProbeOptions {
    /// Perturbation size as a fraction of the band's RMS level.
    pub delta_scale: f64,
    /// Floor on the RMS level entering the perturbation size, so that
    /// near-zero bands still get a usable step.
    pub delta_floor: f64,
    pub probes_per_band: usize,
    pub mode: ProbeMode,
    pub seed: u64,
    /// Caller-chosen stream tag (e.g. iteration and half-step), so that
    /// every call site draws from a disjoint, reproducible stream. Must fit
    /// in 32 bits.
    pub context: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            delta_scale: 1e-3,
            delta_floor: 1e-3,
            probes_per_band: 1,
            mode: ProbeMode::PerBand,
            seed: 0,
            context: 0,
        }
    }
}

impl ProbeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_scale > 0.0) || !(self.delta_floor > 0.0) {
            return Err(Error::InvalidParameter(
                "probe delta scale and floor must be positive".into(),
            ));
        }
        if self.probes_per_band == 0 {
            return Err(Error::InvalidParameter(
                "probes_per_band must be at least 1".into(),
            ));
        }
        if self.context >= 1 << 32 {
            return Err(Error::InvalidParameter(
                "probe context must fit in 32 bits".into(),
            ));
        }
        Ok(())
    }

    /// RNG for probe `p` of band `l`: one seed, disjoint ChaCha streams.
    /// Identical draws regardless of evaluation order or probe mode.
    fn rng(&self, band: usize, probe: usize) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream((self.context << 32) | ((band as u64) << 16) | probe as u64);
        rng
    }
}

/// Per-band perturbation sizes: `delta_scale * max(rms, delta_floor)`.
fn band_deltas(r: &[Complex64], layout: &SubbandLayout, opts: &ProbeOptions) -> Result<Vec<f64>> {
    Ok(subband_stats(r, layout)?
        .iter()
        .map(|s| opts.delta_scale * s.sd.max(opts.delta_floor))
        .collect())
}

/// Estimates all band divergences of `f` at `r`. `f_of_r` is the already
/// computed unperturbed value; `f` must be deterministic for the estimate to
/// mean anything.
///
/// Probes are evaluated sequentially: external denoisers allow one request
/// in flight, and the heavy operators inside `f` already parallelize.
pub fn estimate_band_divergences<F>(
    f: F,
    r: &[Complex64],
    f_of_r: &[Complex64],
    layout: &SubbandLayout,
    opts: &ProbeOptions,
) -> Result<Vec<f64>>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
{
    opts.validate()?;
    let n = layout.len();
    if r.len() != n || f_of_r.len() != n {
        return Err(Error::DimensionMismatch {
            what: "divergence probe input",
            expected: n,
            got: r.len().max(f_of_r.len()),
        });
    }
    let deltas = band_deltas(r, layout, opts)?;
    let num_bands = layout.num_bands();
    let mut acc = vec![0.0; num_bands];

    match opts.mode {
        ProbeMode::PerBand => {
            for l in 0..num_bands {
                let band = layout.band(l);
                let delta = deltas[l];
                for p in 0..opts.probes_per_band {
                    let mut probe = vec![Complex64::ZERO; band.len()];
                    fill_standard_normal_real(&mut opts.rng(l, p), &mut probe);
                    let mut perturbed = r.to_vec();
                    for (dst, q) in perturbed[band.range()].iter_mut().zip(&probe) {
                        *dst += delta * q;
                    }
                    let shifted = f(&perturbed)?;
                    let mut inner = 0.0;
                    for ((q, s), base) in probe
                        .iter()
                        .zip(&shifted[band.range()])
                        .zip(&f_of_r[band.range()])
                    {
                        inner += q.re * (s - base).re;
                    }
                    acc[l] += inner / (delta * band.len() as f64);
                }
            }
        }
        ProbeMode::Shared => {
            for p in 0..opts.probes_per_band {
                let mut probe = vec![Complex64::ZERO; n];
                for l in 0..num_bands {
                    fill_standard_normal_real(
                        &mut opts.rng(l, p),
                        &mut probe[layout.band(l).range()],
                    );
                }
                let mut perturbed = r.to_vec();
                for (l, band) in layout.bands().iter().enumerate() {
                    let delta = deltas[l];
                    for (dst, q) in perturbed[band.range()]
                        .iter_mut()
                        .zip(&probe[band.range()])
                    {
                        *dst += delta * q;
                    }
                }
                let shifted = f(&perturbed)?;
                for (l, band) in layout.bands().iter().enumerate() {
                    let mut inner = 0.0;
                    for ((q, s), base) in probe[band.range()]
                        .iter()
                        .zip(&shifted[band.range()])
                        .zip(&f_of_r[band.range()])
                    {
                        inner += q.re * (s - base).re;
                    }
                    acc[l] += inner / (deltas[l] * band.len() as f64);
                }
            }
        }
    }

    let probes = opts.probes_per_band as f64;
    Ok(acc.into_iter().map(|a| a / probes).collect())
}
