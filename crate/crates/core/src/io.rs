//! File formats: raw complex grids, grayscale image input, mask and pyramid
//! exports.
//!
//! Raw complex format ("CPLX"): 16-byte header of magic `CPLX`, `u32` height,
//! `u32` width, `u32` flags (bit 0 set when the payload is real-valued), all
//! little endian, followed by `H * W` coefficients as interleaved `f64`
//! real/imaginary pairs, row-major, little endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::model::{Image, SamplingMask};
use crate::wavelet::SubbandLayout;
use crate::{Error, Result};

pub const RAW_MAGIC: &[u8; 4] = b"CPLX";
pub const RAW_FLAG_REAL: u32 = 1;

pub fn write_raw_image<W: Write>(mut w: W, img: &Image) -> Result<()> {
    let flags = if img.is_real() { RAW_FLAG_REAL } else { 0 };
    w.write_all(RAW_MAGIC)?;
    w.write_all(&(img.height() as u32).to_le_bytes())?;
    w.write_all(&(img.width() as u32).to_le_bytes())?;
    w.write_all(&flags.to_le_bytes())?;
    for v in img.data() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_raw_image_file<P: AsRef<Path>>(path: P, img: &Image) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_raw_image(&mut w, img)?;
    w.flush()?;
    Ok(())
}

pub fn read_raw_image<R: Read>(mut r: R) -> Result<Image> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[0..4] != RAW_MAGIC {
        return Err(Error::ImageFormat("bad magic in raw complex file".into()));
    }
    let height = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let n = height
        .checked_mul(width)
        .ok_or_else(|| Error::ImageFormat("raw dimensions overflow".into()))?;
    let mut payload = vec![0u8; n * 16];
    r.read_exact(&mut payload)?;
    let data = payload
        .chunks_exact(16)
        .map(|b| {
            Complex64::new(
                f64::from_le_bytes(b[0..8].try_into().unwrap()),
                f64::from_le_bytes(b[8..16].try_into().unwrap()),
            )
        })
        .collect();
    Image::new(height, width, data)
}

pub fn read_raw_image_file<P: AsRef<Path>>(path: P) -> Result<Image> {
    read_raw_image(BufReader::new(File::open(path)?))
}

/// Loads a grayscale PNG or PGM (or a raw complex file, by extension) into
/// the 0-255 float range. 16-bit samples are scaled by `255 / 65535`.
pub fn load_image_file<P: AsRef<Path>>(path: P) -> Result<Image> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("cplx") | Some("raw") | Some("bin") => return read_raw_image_file(path),
        _ => {}
    }
    let dynimg = image::open(path)
        .map_err(|e| Error::ImageFormat(format!("{}: {e}", path.display())))?;
    let (values, h, w): (Vec<f64>, usize, usize) = match dynimg {
        image::DynamicImage::ImageLuma8(img) => {
            let (w, h) = img.dimensions();
            (
                img.pixels().map(|p| p.0[0] as f64).collect(),
                h as usize,
                w as usize,
            )
        }
        image::DynamicImage::ImageLuma16(img) => {
            let (w, h) = img.dimensions();
            (
                img.pixels()
                    .map(|p| p.0[0] as f64 * (255.0 / 65535.0))
                    .collect(),
                h as usize,
                w as usize,
            )
        }
        other => {
            // Accept color inputs by converting to 8-bit grayscale.
            let img = other.to_luma8();
            let (w, h) = img.dimensions();
            (
                img.pixels().map(|p| p.0[0] as f64).collect(),
                h as usize,
                w as usize,
            )
        }
    };
    Image::from_real(h, w, &values)
}

/// Writes the real part clamped to `[0, 255]` as an 8-bit grayscale PNG.
pub fn write_image_png8<P: AsRef<Path>>(path: P, img: &Image) -> Result<()> {
    let buf: Vec<u8> = img
        .data()
        .iter()
        .map(|v| v.re.clamp(0.0, 255.0).round() as u8)
        .collect();
    let out =
        image::GrayImage::from_raw(img.width() as u32, img.height() as u32, buf).unwrap();
    out.save(path.as_ref())
        .map_err(|e| Error::ImageFormat(format!("{}: {e}", path.as_ref().display())))
}

/// Writes non-negative values as a 16-bit grayscale PNG, mapping `[0, peak]`
/// to the full sample range. Returns the peak used.
pub fn write_values_png16<P: AsRef<Path>>(
    path: P,
    height: usize,
    width: usize,
    values: &[f64],
    peak: Option<f64>,
) -> Result<f64> {
    if values.len() != height * width {
        return Err(Error::DimensionMismatch {
            what: "png16 values",
            expected: height * width,
            got: values.len(),
        });
    }
    let peak = peak.unwrap_or_else(|| values.iter().cloned().fold(0.0, f64::max));
    let scale = if peak > 0.0 { 65535.0 / peak } else { 0.0 };
    let buf: Vec<u16> = values
        .iter()
        .map(|&v| (v.max(0.0) * scale).min(65535.0).round() as u16)
        .collect();
    let out = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(
        width as u32,
        height as u32,
        buf,
    )
    .unwrap();
    out.save(path.as_ref())
        .map_err(|e| Error::ImageFormat(format!("{}: {e}", path.as_ref().display())))?;
    Ok(peak)
}

/// Centered (DC in the middle) view of an unshifted grid index.
fn fftshift_index(i: usize, n: usize) -> usize {
    (i + n / 2) % n
}

/// Writes the mask as a PNG in the centered k-space view: white = sampled.
pub fn write_mask_png<P: AsRef<Path>>(path: P, mask: &SamplingMask) -> Result<()> {
    let (h, w) = (mask.height(), mask.width());
    let mut buf = vec![0u8; h * w];
    for u in 0..h {
        for v in 0..w {
            if mask.is_selected(u * w + v) {
                let su = fftshift_index(u, h);
                let sv = fftshift_index(v, w);
                buf[su * w + sv] = 255;
            }
        }
    }
    let out = image::GrayImage::from_raw(w as u32, h as u32, buf).unwrap();
    out.save(path.as_ref())
        .map_err(|e| Error::ImageFormat(format!("{}: {e}", path.as_ref().display())))
}

/// Writes the selected flat indices (unshifted row-major grid), one per line.
pub fn write_mask_csv<W: Write>(mut w: W, mask: &SamplingMask) -> Result<()> {
    writeln!(w, "index")?;
    for &i in mask.indices() {
        writeln!(w, "{i}")?;
    }
    Ok(())
}

pub fn write_mask_csv_file<P: AsRef<Path>>(path: P, mask: &SamplingMask) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_mask_csv(&mut w, mask)?;
    w.flush()?;
    Ok(())
}

/// Renders a coefficient vector as the nested pyramid image using bounded
/// log-magnitude normalization `log(1 + |c|) / log(1 + max |c|)`, and writes
/// a JSON sidecar describing the band layout.
pub fn write_pyramid_png<P: AsRef<Path>>(
    path: P,
    coeffs: &[Complex64],
    layout: &SubbandLayout,
) -> Result<()> {
    if coeffs.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            what: "pyramid coefficients",
            expected: layout.len(),
            got: coeffs.len(),
        });
    }
    let (h, w) = (layout.height(), layout.width());
    let max = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let denom = (1.0 + max).ln();
    let mut buf = vec![0u8; h * w];
    for band in layout.bands() {
        for r in 0..band.rows {
            for c in 0..band.cols {
                let v = coeffs[band.offset + r * band.cols + c].norm();
                let t = if denom > 0.0 {
                    (1.0 + v).ln() / denom
                } else {
                    0.0
                };
                buf[(band.row0 + r) * w + band.col0 + c] = (t * 255.0).round() as u8;
            }
        }
    }
    let out = image::GrayImage::from_raw(w as u32, h as u32, buf).unwrap();
    let path = path.as_ref();
    out.save(path)
        .map_err(|e| Error::ImageFormat(format!("{}: {e}", path.display())))?;

    let sidecar = path.with_extension("layout.json");
    let json = serde_json::to_string_pretty(layout)
        .map_err(|e| Error::ImageFormat(format!("layout sidecar: {e}")))?;
    std::fs::write(sidecar, json)?;
    Ok(())
}
