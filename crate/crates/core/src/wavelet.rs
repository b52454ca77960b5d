//! Orthonormal 2-D Haar wavelet transform with a canonical flat coefficient
//! ordering.
//!
//! Depth `D` produces `L = 3 D + 1` subbands. The flat vector stores the
//! coarsest approximation band first, then the three detail bands of each
//! scale from coarse to fine. Within a band, coefficients are row-major.
//! Scales are numbered so that scale 1 is the finest; labels use `X Y` with
//! `X` the vertical filter and `Y` the horizontal filter, so `Lh` is low-pass
//! vertical, high-pass horizontal.
//!
//! Depth 0 is the identity transform with a single band covering everything,
//! which lets the solvers run directly in the signal domain.

use num_complex::Complex64;
use serde::Serialize;

use crate::{Error, Result};

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BandLabel {
    Ll,
    Lh,
    Hl,
    Hh,
}

impl BandLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            BandLabel::Ll => "LL",
            BandLabel::Lh => "LH",
            BandLabel::Hl => "HL",
            BandLabel::Hh => "HH",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Subband {
    pub label: BandLabel,
    /// 1 = finest scale, `depth` = coarsest.
    pub scale: usize,
    pub rows: usize,
    pub cols: usize,
    /// Top-left corner of the band in the nested 2-D arrangement.
    pub row0: usize,
    pub col0: usize,
    /// Start of the band in the canonical flat vector.
    pub offset: usize,
}

impl Subband {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SubbandLayout {
    height: usize,
    width: usize,
    depth: usize,
    bands: Vec<Subband>,
}

impl SubbandLayout {
    pub fn new(height: usize, width: usize, depth: usize) -> Result<Self> {
        let div = 1usize << depth;
        if height == 0 || width == 0 || height % div != 0 || width % div != 0 {
            return Err(Error::InvalidParameter(format!(
                "grid {height}x{width} is not divisible by 2^{depth}"
            )));
        }

        let mut bands = Vec::with_capacity(3 * depth + 1);
        let mut offset = 0;
        let (ll_rows, ll_cols) = (height >> depth, width >> depth);
        bands.push(Subband {
            label: BandLabel::Ll,
            scale: depth.max(1),
            rows: ll_rows,
            cols: ll_cols,
            row0: 0,
            col0: 0,
            offset,
        });
        offset += ll_rows * ll_cols;

        // Detail bands, coarsest scale first.
        for scale in (1..=depth).rev() {
            let rows = height >> scale;
            let cols = width >> scale;
            for label in [BandLabel::Lh, BandLabel::Hl, BandLabel::Hh] {
                let (row0, col0) = match label {
                    BandLabel::Lh => (0, cols),
                    BandLabel::Hl => (rows, 0),
                    BandLabel::Hh => (rows, cols),
                    BandLabel::Ll => unreachable!(),
                };
                bands.push(Subband {
                    label,
                    scale,
                    rows,
                    cols,
                    row0,
                    col0,
                    offset,
                });
                offset += rows * cols;
            }
        }
        debug_assert_eq!(offset, height * width);

        Ok(Self {
            height,
            width,
            depth,
            bands,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Total coefficient count `N = H * W`.
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `L = 3 * depth + 1`.
    pub fn num_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn bands(&self) -> &[Subband] {
        &self.bands
    }

    pub fn band(&self, l: usize) -> &Subband {
        &self.bands[l]
    }

    pub fn band_sizes(&self) -> Vec<usize> {
        self.bands.iter().map(|b| b.len()).collect()
    }

    /// Expands one value per band into a full-length vector.
    pub fn expand(&self, per_band: &[f64]) -> Result<Vec<f64>> {
        if per_band.len() != self.num_bands() {
            return Err(Error::DimensionMismatch {
                what: "per-band vector",
                expected: self.num_bands(),
                got: per_band.len(),
            });
        }
        let mut out = vec![0.0; self.len()];
        for (band, &v) in self.bands.iter().zip(per_band) {
            out[band.range()].fill(v);
        }
        Ok(out)
    }

    /// Checks that another layout describes the same geometry.
    pub fn same_geometry(&self, other: &SubbandLayout) -> bool {
        self.height == other.height && self.width == other.width && self.depth == other.depth
    }
}

fn haar_rows_forward(buf: &mut [Complex64], stride: usize, rows: usize, cols: usize) {
    let half = cols / 2;
    let mut tmp = vec![Complex64::ZERO; cols];
    for r in 0..rows {
        let row = &mut buf[r * stride..r * stride + cols];
        for j in 0..half {
            let a = row[2 * j];
            let b = row[2 * j + 1];
            tmp[j] = (a + b) * SQRT_HALF;
            tmp[half + j] = (a - b) * SQRT_HALF;
        }
        row.copy_from_slice(&tmp);
    }
}

fn haar_cols_forward(buf: &mut [Complex64], stride: usize, rows: usize, cols: usize) {
    let half = rows / 2;
    let mut tmp = vec![Complex64::ZERO; rows];
    for c in 0..cols {
        for i in 0..half {
            let a = buf[(2 * i) * stride + c];
            let b = buf[(2 * i + 1) * stride + c];
            tmp[i] = (a + b) * SQRT_HALF;
            tmp[half + i] = (a - b) * SQRT_HALF;
        }
        for i in 0..rows {
            buf[i * stride + c] = tmp[i];
        }
    }
}

fn haar_rows_inverse(buf: &mut [Complex64], stride: usize, rows: usize, cols: usize) {
    let half = cols / 2;
    let mut tmp = vec![Complex64::ZERO; cols];
    for r in 0..rows {
        let row = &mut buf[r * stride..r * stride + cols];
        for j in 0..half {
            let lo = row[j];
            let hi = row[half + j];
            tmp[2 * j] = (lo + hi) * SQRT_HALF;
            tmp[2 * j + 1] = (lo - hi) * SQRT_HALF;
        }
        row.copy_from_slice(&tmp);
    }
}

fn haar_cols_inverse(buf: &mut [Complex64], stride: usize, rows: usize, cols: usize) {
    let half = rows / 2;
    let mut tmp = vec![Complex64::ZERO; rows];
    for c in 0..cols {
        for i in 0..half {
            let lo = buf[i * stride + c];
            let hi = buf[(half + i) * stride + c];
            tmp[2 * i] = (lo + hi) * SQRT_HALF;
            tmp[2 * i + 1] = (lo - hi) * SQRT_HALF;
        }
        for i in 0..rows {
            buf[i * stride + c] = tmp[i];
        }
    }
}

/// Forward transform of a row-major `H x W` grid into the canonical flat
/// coefficient ordering.
pub fn dwt(data: &[Complex64], layout: &SubbandLayout) -> Result<Vec<Complex64>> {
    if data.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            what: "dwt input",
            expected: layout.len(),
            got: data.len(),
        });
    }
    let (h, w) = (layout.height(), layout.width());
    let mut buf = data.to_vec();
    for level in 0..layout.depth() {
        let rows = h >> level;
        let cols = w >> level;
        haar_rows_forward(&mut buf, w, rows, cols);
        haar_cols_forward(&mut buf, w, rows, cols);
    }
    // Serialize the nested arrangement into band order.
    let mut out = vec![Complex64::ZERO; layout.len()];
    for band in layout.bands() {
        for r in 0..band.rows {
            let src = (band.row0 + r) * w + band.col0;
            let dst = band.offset + r * band.cols;
            out[dst..dst + band.cols].copy_from_slice(&buf[src..src + band.cols]);
        }
    }
    Ok(out)
}

/// Inverse transform from canonical flat coefficients back to the image grid.
pub fn idwt(coeffs: &[Complex64], layout: &SubbandLayout) -> Result<Vec<Complex64>> {
    if coeffs.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            what: "idwt input",
            expected: layout.len(),
            got: coeffs.len(),
        });
    }
    let (h, w) = (layout.height(), layout.width());
    let mut buf = vec![Complex64::ZERO; layout.len()];
    for band in layout.bands() {
        for r in 0..band.rows {
            let dst = (band.row0 + r) * w + band.col0;
            let src = band.offset + r * band.cols;
            buf[dst..dst + band.cols].copy_from_slice(&coeffs[src..src + band.cols]);
        }
    }
    for level in (0..layout.depth()).rev() {
        let rows = h >> level;
        let cols = w >> level;
        haar_cols_inverse(&mut buf, w, rows, cols);
        haar_rows_inverse(&mut buf, w, rows, cols);
    }
    Ok(buf)
}

/// Per-band first and second moments of a coefficient vector, usually a
/// difference against a reference.
#[derive(Clone, Debug, Serialize)]
pub struct BandStats {
    pub band: usize,
    pub label: &'static str,
    pub scale: usize,
    pub n: usize,
    pub mean_re: f64,
    pub mean_im: f64,
    /// `sqrt(mean |v|^2)`.
    pub sd: f64,
    /// `sqrt(mean re(v)^2)`.
    pub sd_real: f64,
}

pub fn subband_stats(coeffs: &[Complex64], layout: &SubbandLayout) -> Result<Vec<BandStats>> {
    if coeffs.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            what: "subband stats input",
            expected: layout.len(),
            got: coeffs.len(),
        });
    }
    Ok(layout
        .bands()
        .iter()
        .enumerate()
        .map(|(l, band)| {
            let slice = &coeffs[band.range()];
            let n = slice.len() as f64;
            let mut sum = Complex64::ZERO;
            let mut sq = 0.0;
            let mut sq_re = 0.0;
            for v in slice {
                sum += v;
                sq += v.norm_sqr();
                sq_re += v.re * v.re;
            }
            BandStats {
                band: l,
                label: band.label.as_str(),
                scale: band.scale,
                n: slice.len(),
                mean_re: sum.re / n,
                mean_im: sum.im / n,
                sd: (sq / n).sqrt(),
                sd_real: (sq_re / n).sqrt(),
            }
        })
        .collect())
}

/// Maps per-band values onto every coefficient, in canonical order.
pub fn expand_subband_vector(layout: &SubbandLayout, per_band: &[f64]) -> Result<Vec<f64>> {
    layout.expand(per_band)
}
