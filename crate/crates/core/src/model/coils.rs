//! Receive-coil sensitivity maps from discretized current loops.
//!
//! Each coil is a circular loop facing the image center, placed at equal
//! angles around the field of view. The raw sensitivity at a pixel is the
//! magnitude of the Biot-Savart field of the loop, discretized into straight
//! segments; the phase is left at zero. Maps are then jointly normalized so
//! the per-pixel sum of squares is exactly one.

use num_complex::Complex64;

use crate::{Error, Result};

/// Number of straight segments per loop.
const LOOP_SEGMENTS: usize = 64;

#[derive(Clone, Debug)]
pub struct CoilMaps {
    coils: usize,
    height: usize,
    width: usize,
    /// Coil-major storage: map `c` occupies `[c * h * w, (c + 1) * h * w)`.
    maps: Vec<Complex64>,
}

impl CoilMaps {
    pub fn from_maps(coils: usize, height: usize, width: usize, maps: Vec<Complex64>) -> Result<Self> {
        if maps.len() != coils * height * width {
            return Err(Error::DimensionMismatch {
                what: "coil map storage",
                expected: coils * height * width,
                got: maps.len(),
            });
        }
        Ok(Self {
            coils,
            height,
            width,
            maps,
        })
    }

    pub fn num_coils(&self) -> usize {
        self.coils
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn map(&self, c: usize) -> &[Complex64] {
        let n = self.height * self.width;
        &self.maps[c * n..(c + 1) * n]
    }

    /// Per-pixel sum of squared magnitudes over coils.
    pub fn sos(&self, flat: usize) -> f64 {
        (0..self.coils)
            .map(|c| self.map(c)[flat].norm_sqr())
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct CoilOptions {
    /// Loop radius in field-of-view units (the image spans `[-0.5, 0.5]`).
    pub loop_radius: f64,
    /// Distance of each loop center from the image center, same units.
    pub loop_distance: f64,
}

impl Default for CoilOptions {
    fn default() -> Self {
        Self {
            loop_radius: 0.25,
            loop_distance: 0.7,
        }
    }
}

/// Biot-Savart field of a segmented loop at point `p`. Arbitrary units; the
/// overall scale cancels in the joint normalization.
fn loop_field(p: [f64; 3], center: [f64; 3], axis_u: [f64; 3], axis_v: [f64; 3], radius: f64) -> f64 {
    let mut b = [0.0f64; 3];
    for k in 0..LOOP_SEGMENTS {
        let t0 = 2.0 * std::f64::consts::PI * k as f64 / LOOP_SEGMENTS as f64;
        let t1 = 2.0 * std::f64::consts::PI * (k + 1) as f64 / LOOP_SEGMENTS as f64;
        let w0 = loop_point(center, axis_u, axis_v, radius, t0);
        let w1 = loop_point(center, axis_u, axis_v, radius, t1);
        let mid = [
            0.5 * (w0[0] + w1[0]),
            0.5 * (w0[1] + w1[1]),
            0.5 * (w0[2] + w1[2]),
        ];
        let dl = [w1[0] - w0[0], w1[1] - w0[1], w1[2] - w0[2]];
        let r = [p[0] - mid[0], p[1] - mid[1], p[2] - mid[2]];
        let r_norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        let r3 = r_norm * r_norm * r_norm;
        b[0] += (dl[1] * r[2] - dl[2] * r[1]) / r3;
        b[1] += (dl[2] * r[0] - dl[0] * r[2]) / r3;
        b[2] += (dl[0] * r[1] - dl[1] * r[0]) / r3;
    }
    (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt()
}

fn loop_point(center: [f64; 3], u: [f64; 3], v: [f64; 3], radius: f64, t: f64) -> [f64; 3] {
    let (s, c) = t.sin_cos();
    [
        center[0] + radius * (c * u[0] + s * v[0]),
        center[1] + radius * (c * u[1] + s * v[1]),
        center[2] + radius * (c * u[2] + s * v[2]),
    ]
}

/// Pixel center in FOV coordinates; pixel (0, 0) is the top-left corner and
/// the image spans `[-0.5, 0.5]` in both axes.
pub(crate) fn pixel_coords(row: usize, col: usize, height: usize, width: usize) -> [f64; 3] {
    [
        (col as f64 + 0.5) / width as f64 - 0.5,
        (row as f64 + 0.5) / height as f64 - 0.5,
        0.0,
    ]
}

/// Center of coil `c` of `coils`, in the image plane.
pub(crate) fn loop_center(c: usize, coils: usize, distance: f64) -> [f64; 3] {
    let theta = 2.0 * std::f64::consts::PI * c as f64 / coils as f64;
    [distance * theta.cos(), distance * theta.sin(), 0.0]
}

/// Raw (pre-normalization) sensitivity magnitudes for one coil.
fn raw_map(c: usize, coils: usize, height: usize, width: usize, opts: &CoilOptions) -> Vec<f64> {
    let center = loop_center(c, coils, opts.loop_distance);
    // Loop plane contains z and the in-plane tangential direction, so the
    // loop axis points at the image center.
    let norm = (center[0] * center[0] + center[1] * center[1]).sqrt();
    let radial = [center[0] / norm, center[1] / norm, 0.0];
    let axis_u = [0.0, 0.0, 1.0];
    let axis_v = [-radial[1], radial[0], 0.0];
    let mut out = vec![0.0; height * width];
    for row in 0..height {
        for col in 0..width {
            let p = pixel_coords(row, col, height, width);
            out[row * width + col] = loop_field(p, center, axis_u, axis_v, opts.loop_radius);
        }
    }
    out
}

/// Builds jointly normalized sensitivity maps for `coils` loops. A single
/// coil yields the exact all-ones map.
pub fn biot_savart_maps(
    height: usize,
    width: usize,
    coils: usize,
    opts: &CoilOptions,
) -> Result<CoilMaps> {
    if coils == 0 {
        return Err(Error::InvalidParameter("coil count must be >= 1".into()));
    }
    if height == 0 || width == 0 {
        return Err(Error::InvalidParameter("coil map grid must be non-empty".into()));
    }
    let n = height * width;
    if coils == 1 {
        return CoilMaps::from_maps(1, height, width, vec![Complex64::ONE; n]);
    }
    if opts.loop_distance <= 0.0 {
        return Err(Error::InvalidParameter(
            "loop placement degenerate: loop_distance must be > 0".into(),
        ));
    }
    if opts.loop_radius <= 0.0 {
        return Err(Error::InvalidParameter("loop_radius must be > 0".into()));
    }

    let raw: Vec<Vec<f64>> = crate::par::map_indices(coils, |c| raw_map(c, coils, height, width, opts));

    let mut maps = vec![Complex64::ZERO; coils * n];
    for i in 0..n {
        let sos: f64 = raw.iter().map(|m| m[i] * m[i]).sum();
        let scale = 1.0 / sos.sqrt();
        for (c, m) in raw.iter().enumerate() {
            maps[c * n + i] = Complex64::new(m[i] * scale, 0.0);
        }
    }
    CoilMaps::from_maps(coils, height, width, maps)
}
