//! The `selftest` subcommand: fast independent checks of the numerical
//! core, each validated against an oracle that shares no code with the
//! implementation it checks (explicit DFT matrices, dense direct solves,
//! analytic divergence counts).
//!
//! `--corrupt-dft` is a negative control: it perturbs the operator's DFT
//! scaling through a test hook and the dense-matrix suite must then fail,
//! proving the checks can actually catch a broken operator. The corruption
//! scales forward and adjoint consistently, which is exactly why the
//! adjoint identity alone is not enough and the dense oracle exists.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use dgec_core::denoise::{
    self, soft_threshold_divergence, DenoiserRequest, EchoDenoiser, SubbandSoftThreshold,
};
use dgec_core::gec::{estimate_band_divergences, solve_f1, ProbeOptions, WaveletizedOp};
use dgec_core::linalg;
use dgec_core::linop::{standard_complex_normal, LinearOperator};
use dgec_core::model::{CoilOptions, ForwardOp, MaskOptions};
use dgec_core::wavelet::{self, SubbandLayout};

use crate::CliResult;

pub struct SelftestArgs {
    /// Negative control: break the DFT scaling and expect a failure.
    pub corrupt_dft: bool,
}

pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub millis: f64,
}

pub fn cmd_selftest(args: &SelftestArgs) -> CliResult<Vec<SuiteResult>> {
    let suites: Vec<(&'static str, Box<dyn Fn() -> Result<(), String>>)> = vec![
        ("adjoint-identity", Box::new(suite_adjoint)),
        (
            "dense-operator-oracle",
            Box::new({
                let corrupt = args.corrupt_dft;
                move || suite_dense_oracle(corrupt)
            }),
        ),
        ("dense-solve-oracle", Box::new(suite_dense_solve)),
        ("divergence-oracle", Box::new(suite_divergence)),
        ("wavelet-round-trip", Box::new(suite_wavelet)),
        ("bridge-round-trip", Box::new(suite_bridge)),
    ];

    let mut results = Vec::with_capacity(suites.len());
    for (name, suite) in suites {
        let start = Instant::now();
        let outcome = suite();
        let millis = start.elapsed().as_secs_f64() * 1e3;
        results.push(SuiteResult {
            name,
            passed: outcome.is_ok(),
            detail: outcome.err().unwrap_or_default(),
            millis,
        });
    }
    Ok(results)
}

fn random_vec(rng: &mut ChaCha12Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| standard_complex_normal(rng)).collect()
}

/// `<Ax, y> = <x, A^H y>` on random vectors, for the measurement operator
/// and its wavelet-domain composition.
fn suite_adjoint() -> Result<(), String> {
    let op = build_op(16, 2, 2.0, 3)?;
    let layout = SubbandLayout::new(16, 16, 2).map_err(|e| e.to_string())?;
    let b_op = WaveletizedOp {
        inner: &op,
        layout: &layout,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(100);
    for trial in 0..8 {
        for (label, target) in [("A", &op as &dyn LinearOperator), ("B", &b_op)] {
            let x = random_vec(&mut rng, target.cols());
            let y = random_vec(&mut rng, target.rows());
            let lhs = linalg::dot(&y, &target.apply(&x));
            let rhs = linalg::dot(&target.apply_adjoint(&y), &x);
            let scale = linalg::norm(&x) * linalg::norm(&y);
            let gap = (lhs - rhs).norm() / scale;
            if gap > 1e-10 {
                return Err(format!(
                    "adjoint identity violated for {label} (trial {trial}): gap {gap:.3e}"
                ));
            }
        }
    }
    Ok(())
}

fn build_op(n: usize, coils: usize, reduction: f64, seed: u64) -> Result<ForwardOp, String> {
    ForwardOp::build(
        n,
        n,
        coils,
        &MaskOptions {
            reduction,
            seed,
            ..MaskOptions::default()
        },
        &CoilOptions::default(),
    )
    .map_err(|e| e.to_string())
}

/// The operator against an explicitly constructed matrix: row `(c, k)` is
/// the `k`-th sampled DFT row scaled by coil profile `c`,
/// `exp(-2 pi i (k_u p_u / H + k_v p_v / W)) s_c[p] / sqrt(HW)`.
fn suite_dense_oracle(corrupt: bool) -> Result<(), String> {
    let (h, w, coils) = (8usize, 8usize, 2usize);
    let mut op = build_op(h, coils, 2.0, 5)?;
    if corrupt {
        op.corrupt_dft_scale(1.0 + 1e-6);
    }
    let n = h * w;
    let m = op.num_samples();
    let rows = coils * m;

    let mut dense = vec![Complex64::new(0.0, 0.0); rows * n];
    let scale = 1.0 / (n as f64).sqrt();
    for c in 0..coils {
        let profile = op.coil_maps().map(c);
        for (ki, &k) in op.mask().indices().iter().enumerate() {
            let (ku, kv) = (k / w, k % w);
            let row = c * m + ki;
            for p in 0..n {
                let (pu, pv) = (p / w, p % w);
                let angle = -2.0 * PI
                    * (ku as f64 * pu as f64 / h as f64 + kv as f64 * pv as f64 / w as f64);
                dense[row * n + p] =
                    Complex64::from_polar(scale, angle) * profile[p];
            }
        }
    }

    let apply_dense = |x: &[Complex64]| -> Vec<Complex64> {
        (0..rows)
            .map(|r| (0..n).map(|p| dense[r * n + p] * x[p]).sum())
            .collect()
    };
    let adjoint_dense = |y: &[Complex64]| -> Vec<Complex64> {
        (0..n)
            .map(|p| (0..rows).map(|r| dense[r * n + p].conj() * y[r]).sum())
            .collect()
    };

    let mut rng = ChaCha12Rng::seed_from_u64(101);
    for trial in 0..6 {
        let x = random_vec(&mut rng, n);
        let forward_gap = linalg::rel_err(&op.apply(&x), &apply_dense(&x));
        if forward_gap > 1e-10 {
            return Err(format!(
                "forward disagrees with the dense DFT matrix (trial {trial}): {forward_gap:.3e}"
            ));
        }
        let y = random_vec(&mut rng, rows);
        let adjoint_gap = linalg::rel_err(&op.apply_adjoint(&y), &adjoint_dense(&y));
        if adjoint_gap > 1e-10 {
            return Err(format!(
                "adjoint disagrees with the dense DFT matrix (trial {trial}): {adjoint_gap:.3e}"
            ));
        }
    }
    Ok(())
}

/// The regularized quadratic solve against a dense LU factorization of the
/// same normal equations.
fn suite_dense_solve() -> Result<(), String> {
    use nalgebra::DMatrix;

    let (h, w, coils, depth) = (8usize, 8usize, 2usize, 1usize);
    let op = build_op(h, coils, 2.0, 7)?;
    let layout = SubbandLayout::new(h, w, depth).map_err(|e| e.to_string())?;
    let b_op = WaveletizedOp {
        inner: &op,
        layout: &layout,
    };
    let n = layout.len();
    let rows = b_op.rows();

    // Dense B by columns.
    let mut b = DMatrix::<Complex64>::zeros(rows, n);
    for j in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[j] = Complex64::new(1.0, 0.0);
        let col = b_op.apply(&e);
        for i in 0..rows {
            b[(i, j)] = col[i];
        }
    }

    let gamma_w = 3.0;
    let gamma: Vec<f64> = (0..layout.num_bands())
        .map(|l| 0.5 + 0.3 * l as f64)
        .collect();
    let gamma_full = layout.expand(&gamma).map_err(|e| e.to_string())?;

    let mut rng = ChaCha12Rng::seed_from_u64(102);
    let y = random_vec(&mut rng, rows);
    let r = random_vec(&mut rng, n);

    // gamma_w B^H B + diag(gamma), solved directly.
    let mut normal = b.adjoint() * &b * Complex64::new(gamma_w, 0.0);
    for j in 0..n {
        normal[(j, j)] += Complex64::new(gamma_full[j], 0.0);
    }
    let yv = DMatrix::from_column_slice(rows, 1, &y);
    let rv = DMatrix::from_column_slice(n, 1, &r);
    let rhs = b.adjoint() * yv * Complex64::new(gamma_w, 0.0)
        + DMatrix::from_fn(n, 1, |i, _| rv[(i, 0)] * Complex64::new(gamma_full[i], 0.0));
    let direct = normal
        .lu()
        .solve(&rhs)
        .ok_or("dense normal equations are singular")?;

    let cg = solve_f1(&b_op, &y, gamma_w, &layout, &gamma, &r, None, 1e-12, 2000)
        .map_err(|e| e.to_string())?;
    let direct_vec: Vec<Complex64> = direct.iter().copied().collect();
    let gap = linalg::rel_err(&cg.solution, &direct_vec);
    if gap > 1e-8 {
        return Err(format!(
            "iterative solve is {gap:.3e} from the dense solution (cg iterations {})",
            cg.iterations
        ));
    }
    Ok(())
}

/// Monte-Carlo band divergences against the exact count-based expression
/// for complex soft-thresholding.
fn suite_divergence() -> Result<(), String> {
    let layout = SubbandLayout::new(64, 64, 2).map_err(|e| e.to_string())?;
    let denoiser = SubbandSoftThreshold::default();
    let mut rng = ChaCha12Rng::seed_from_u64(103);
    let pyramid = random_vec(&mut rng, layout.len());
    let sds = vec![0.8; layout.num_bands()];

    let req = DenoiserRequest {
        pyramid: &pyramid,
        band_sds: &sds,
        layout: &layout,
    };
    let exact = soft_threshold_divergence(&req, &denoiser).map_err(|e| e.to_string())?;

    let apply = |x: &[Complex64]| {
        denoise::Denoiser::denoise(
            &denoiser,
            &DenoiserRequest {
                pyramid: x,
                band_sds: &sds,
                layout: &layout,
            },
        )
    };
    let f_of_r = apply(&pyramid).map_err(|e| e.to_string())?;
    let mc = estimate_band_divergences(
        apply,
        &pyramid,
        &f_of_r,
        &layout,
        &ProbeOptions {
            probes_per_band: 64,
            seed: 9,
            ..ProbeOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;

    for (band, (&e, &m)) in exact.iter().zip(&mc).enumerate() {
        let gap = (m - e).abs();
        if gap > 0.05 * e.max(0.05) {
            return Err(format!(
                "band {band}: probe estimate {m:.4} vs exact divergence {e:.4}"
            ));
        }
    }
    Ok(())
}

/// Analysis-synthesis round trip at machine precision, and the band count
/// `3 depth + 1`.
fn suite_wavelet() -> Result<(), String> {
    let mut rng = ChaCha12Rng::seed_from_u64(104);
    for depth in 1..=4usize {
        let layout = SubbandLayout::new(32, 32, depth).map_err(|e| e.to_string())?;
        if layout.num_bands() != 3 * depth + 1 {
            return Err(format!(
                "depth {depth}: {} bands, expected {}",
                layout.num_bands(),
                3 * depth + 1
            ));
        }
        let x = random_vec(&mut rng, layout.len());
        let back =
            wavelet::idwt(&wavelet::dwt(&x, &layout).map_err(|e| e.to_string())?, &layout)
                .map_err(|e| e.to_string())?;
        let gap = linalg::rel_err(&back, &x);
        if gap > 1e-12 {
            return Err(format!("depth {depth}: round-trip error {gap:.3e}"));
        }
    }
    Ok(())
}

/// Wire encoding is bit-exact through a full request/serve/response cycle.
fn suite_bridge() -> Result<(), String> {
    use dgec_core::denoise as bridge;

    let layout = SubbandLayout::new(16, 16, 1).map_err(|e| e.to_string())?;
    let mut rng = ChaCha12Rng::seed_from_u64(105);
    let pyramid = random_vec(&mut rng, layout.len());
    let sds = vec![0.1, 0.2, 0.3, 0.4];
    let req = DenoiserRequest {
        pyramid: &pyramid,
        band_sds: &sds,
        layout: &layout,
    };

    let encoded = bridge::encode_request(&req);
    let (parsed_layout, parsed_sds, parsed_coeffs) =
        bridge::parse_request(&encoded).map_err(|e| e.to_string())?;
    if !parsed_layout.same_geometry(&layout) {
        return Err("request round trip changed the layout".into());
    }
    let bits = |v: &[Complex64]| -> Vec<(u64, u64)> {
        v.iter().map(|c| (c.re.to_bits(), c.im.to_bits())).collect()
    };
    if parsed_sds.iter().map(|s| s.to_bits()).collect::<Vec<_>>()
        != sds.iter().map(|s| s.to_bits()).collect::<Vec<_>>()
    {
        return Err("request round trip changed the band SDs".into());
    }
    if bits(&parsed_coeffs) != bits(&pyramid) {
        return Err("request round trip changed the coefficients".into());
    }

    // A served echo must hand back the exact input bits.
    let mut input = Vec::new();
    bridge::write_frame(&mut input, &encoded).map_err(|e| e.to_string())?;
    let mut output = Vec::new();
    bridge::serve_stream(&input[..], &mut output, &EchoDenoiser).map_err(|e| e.to_string())?;
    let frame = bridge::read_frame(&mut &output[..], false)
        .map_err(|e| e.to_string())?
        .ok_or("no response frame")?;
    let response = bridge::parse_response(&frame, &layout).map_err(|e| e.to_string())?;
    if bits(&response) != bits(&pyramid) {
        return Err("served echo is not bit-identical".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass_on_a_healthy_build() {
        let results = cmd_selftest(&SelftestArgs { corrupt_dft: false }).unwrap();
        assert_eq!(results.len(), 6);
        for r in &results {
            assert!(r.passed, "{} failed: {}", r.name, r.detail);
        }
    }

    #[test]
    fn corrupted_dft_is_caught_by_the_dense_oracle() {
        let results = cmd_selftest(&SelftestArgs { corrupt_dft: true }).unwrap();
        let dense = results
            .iter()
            .find(|r| r.name == "dense-operator-oracle")
            .unwrap();
        assert!(
            !dense.passed,
            "negative control failed to fail: the corrupted operator passed"
        );
        // A consistent rescaling keeps A and its coded adjoint a true
        // adjoint pair, so this suite stays green; only the absolute
        // reference can see the corruption.
        let adjoint = results.iter().find(|r| r.name == "adjoint-identity").unwrap();
        assert!(adjoint.passed);
        let wavelet = results.iter().find(|r| r.name == "wavelet-round-trip").unwrap();
        assert!(wavelet.passed);
    }
}
