//! Independent brute-force reference implementations used to verify the fast
//! paths: naive DFT/convolution, literal covariance sums, and the two
//! analytic identities relating rectified covariances to wavelet moments.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{sample_gaussian_image, ImagePlane, Seed, Texture};
use crate::representation::{
    phase_grid, phase_harmonic, rectifier_fourier_coefficient,
};
use crate::statistics::{
    build_index_set, compute_statistics, covariance_entry, Boundary, ObsMeans, Variant,
};
use crate::wavelets::{build_filter_bank, wavelet_transform, FilterBank, WaveletFamily};

const MAX_NAIVE_SIDE: usize = 32;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleReport {
    fn new(name: &str, max_abs_err: f64, scale: f64, tolerance: f64) -> Self {
        let max_rel_err = max_abs_err / scale.max(1e-300);
        Self {
            name: name.to_string(),
            max_abs_err,
            max_rel_err,
            tolerance,
            passed: max_rel_err <= tolerance,
        }
    }
}

fn guard_side(n: usize) -> Result<()> {
    if n > MAX_NAIVE_SIDE {
        return Err(Error::InvalidConfig(format!(
            "naive reference limited to side {MAX_NAIVE_SIDE}, got {n}"
        )));
    }
    Ok(())
}

/// O(n^4) inverse DFT, written directly from the definition.
pub fn naive_inverse_dft(hat: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    guard_side(n)?;
    let mut out = vec![Complex64::default(); n * n];
    let two_pi = 2.0 * std::f64::consts::PI;
    for uy in 0..n {
        for ux in 0..n {
            let mut acc = Complex64::default();
            for ky in 0..n {
                for kx in 0..n {
                    let phase =
                        two_pi * (ux as f64 * kx as f64 + uy as f64 * ky as f64) / n as f64;
                    acc += hat[ky * n + kx] * Complex64::from_polar(1.0, phase);
                }
            }
            out[uy * n + ux] = acc / (n * n) as f64;
        }
    }
    Ok(out)
}

/// Literal circular convolution: out(u) = sum_v x(v) psi(u - v).
pub fn naive_convolution(x: &[f64], psi: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    guard_side(n)?;
    let mut out = vec![Complex64::default(); n * n];
    for uy in 0..n {
        for ux in 0..n {
            let mut acc = Complex64::default();
            for vy in 0..n {
                for vx in 0..n {
                    let dy = (uy + n - vy) % n;
                    let dx = (ux + n - vx) % n;
                    acc += x[vy * n + vx] * psi[dy * n + dx];
                }
            }
            out[uy * n + ux] = acc;
        }
    }
    Ok(out)
}

/// Literal centered covariance: (1/n^2) sum_u (a(u)-mu_a)(b(u-tau)-mu_b).
pub fn naive_covariance(
    a: &[f64],
    b: &[f64],
    n: usize,
    tau: (i32, i32),
    mu_a: f64,
    mu_b: f64,
) -> f64 {
    let ni = n as i32;
    let mut acc = 0.0;
    for uy in 0..ni {
        for ux in 0..ni {
            let sy = (uy - tau.1).rem_euclid(ni) as usize;
            let sx = (ux - tau.0).rem_euclid(ni) as usize;
            acc += (a[(uy * ni + ux) as usize] - mu_a) * (b[sy * n + sx] - mu_b);
        }
    }
    acc / (n * n) as f64
}

/// Compares the FFT wavelet transform against naive convolution with the
/// naively inverse-transformed filters.
pub fn check_wavelet_transform(x: &ImagePlane, bank: &FilterBank, tol: f64) -> Result<OracleReport> {
    let n = bank.n();
    guard_side(n)?;
    let fast = wavelet_transform(x, bank)?;
    let mut max_err = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..bank.j_max() {
        for l in 0..bank.l_count() {
            let psi = naive_inverse_dft(bank.band_pass(j, l), n)?;
            let slow = naive_convolution(x.as_slice(), &psi, n)?;
            for (a, b) in fast.plane(j, l).iter().zip(&slow) {
                max_err = max_err.max((a - b).norm());
                scale = scale.max(b.norm());
            }
        }
    }
    let phi = naive_inverse_dft(bank.low_pass(), n)?;
    let slow = naive_convolution(x.as_slice(), &phi, n)?;
    for (a, b) in fast.low_pass.iter().zip(&slow) {
        max_err = max_err.max((a - b).norm());
        scale = scale.max(b.norm());
    }
    Ok(OracleReport::new("wavelet-transform", max_err, scale, tol))
}

/// Compares the fast statistics pipeline against the literal covariance sum
/// over every entry of a small index set.
pub fn check_statistics(
    x: &ImagePlane,
    bank: &FilterBank,
    variant: Variant,
    alpha_count: usize,
    tol: f64,
) -> Result<OracleReport> {
    let n = bank.n();
    guard_side(n)?;
    let set = build_index_set(variant, bank.j_max(), bank.l_count(), alpha_count)?;
    let tex = Texture::Gray(x.clone());
    let stats = compute_statistics(&tex, bank, &set, None, Boundary::Periodic)?;
    // Independent recomputation of the rectified planes.
    let w = wavelet_transform(x, bank)?;
    let alphas = phase_grid(alpha_count);
    let mut planes: Vec<Vec<f64>> = Vec::new();
    for j in 0..bank.j_max() {
        for l in 0..bank.l_count() {
            for &alpha in &alphas {
                planes.push(
                    w.plane(j, l)
                        .iter()
                        .map(|z| (alpha.cos() * z.re - alpha.sin() * z.im).max(0.0))
                        .collect(),
                );
            }
        }
    }
    let means: Vec<f64> = planes
        .iter()
        .map(|p| p.iter().sum::<f64>() / (n * n) as f64)
        .collect();
    let mut max_err = 0.0f64;
    let mut scale = 0.0f64;
    for (i, &m) in means.iter().enumerate() {
        max_err = max_err.max((stats.values[i] - m).abs());
        scale = scale.max(m.abs());
    }
    for (i, e) in set.entries.iter().enumerate() {
        let p1 = set.plane_index(e.g1);
        let p2 = set.plane_index(e.g2);
        let slow = naive_covariance(&planes[p1], &planes[p2], n, e.tau, means[p1], means[p2]);
        let fast = stats.values[set.len_means() + i];
        max_err = max_err.max((fast - slow).abs());
        scale = scale.max(slow.abs());
    }
    let lp: Vec<f64> = w.low_pass.iter().map(|z| z.re).collect();
    for (i, &(_, tau)) in set.lowpass_entries.iter().enumerate() {
        let slow = naive_covariance(&lp, &lp, n, tau, 0.0, 0.0);
        let fast = stats.values[set.len_means() + set.entries.len() + i];
        max_err = max_err.max((fast - slow).abs());
        scale = scale.max(slow.abs());
    }
    Ok(OracleReport::new("statistics", max_err, scale, tol))
}

/// Verifies the four-phase identity: the weighted combination of rectified
/// covariances at phases {0, pi/2, pi, 3pi/2} with zeroed averages recovers
/// the raw complex wavelet correlation.
pub fn check_four_phase_identity(
    x: &ImagePlane,
    bank: &FilterBank,
    tol: f64,
) -> Result<OracleReport> {
    let n = bank.n();
    let w = wavelet_transform(x, bank)?;
    let alphas = phase_grid(4);
    let wa = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    let wb = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ];
    let rect = |plane: &[Complex64], alpha: f64| -> Vec<f64> {
        plane
            .iter()
            .map(|z| (alpha.cos() * z.re - alpha.sin() * z.im).max(0.0))
            .collect()
    };
    let mut max_err = 0.0f64;
    let mut scale = 0.0f64;
    let taus = [(0, 0), (1, 0), (0, 1), (2, -1), (-3, 2)];
    for j1 in 0..bank.j_max() {
        for j2 in j1..bank.j_max() {
            for l1 in 0..bank.l_count() {
                for l2 in 0..bank.l_count() {
                    let p1 = w.plane(j1, l1);
                    let p2 = w.plane(j2, l2);
                    let r1: Vec<Vec<f64>> = alphas.iter().map(|&a| rect(p1, a)).collect();
                    let r2: Vec<Vec<f64>> = alphas.iter().map(|&a| rect(p2, a)).collect();
                    for &tau in &taus {
                        let mut lhs = Complex64::default();
                        for a1 in 0..4 {
                            for a2 in 0..4 {
                                let c = covariance_entry(&r1[a1], &r2[a2], n, tau, 0.0, 0.0);
                                lhs += wa[a1] * wb[a2] * c;
                            }
                        }
                        lhs *= (n * n) as f64;
                        let mut rhs = Complex64::default();
                        for uy in 0..n {
                            let sy = (uy as i32 - tau.1).rem_euclid(n as i32) as usize;
                            for ux in 0..n {
                                let sx = (ux as i32 - tau.0).rem_euclid(n as i32) as usize;
                                rhs += p1[uy * n + ux] * p2[sy * n + sx].conj();
                            }
                        }
                        max_err = max_err.max((lhs - rhs).norm());
                        scale = scale.max(rhs.norm());
                    }
                }
            }
        }
    }
    Ok(OracleReport::new("four-phase-identity", max_err, scale, tol))
}

/// Verifies the expansion of rectified covariances into phase-harmonic
/// covariances: C^rect(alpha, alpha') (zero-centered) against
/// sum_{|k|,|k'| <= K} c_k conj(c_k') C^harm_{k,k'} e^{i(k alpha - k' alpha')}.
#[allow(clippy::too_many_arguments)]
pub fn prop1_check(
    x: &ImagePlane,
    bank: &FilterBank,
    j1: usize,
    l1: usize,
    j2: usize,
    l2: usize,
    tau: (i32, i32),
    alpha_count: usize,
    k_max: i32,
    tol: f64,
) -> Result<OracleReport> {
    let n = bank.n();
    guard_side(n)?;
    let w = wavelet_transform(x, bank)?;
    let p1 = w.plane(j1, l1);
    let p2 = w.plane(j2, l2);
    let ks: Vec<i32> = (-k_max..=k_max).collect();
    let cks: Vec<Complex64> = ks
        .iter()
        .map(|&k| rectifier_fourier_coefficient(k, 4 * k.unsigned_abs() as usize + 64))
        .collect();
    let harmonics = |plane: &[Complex64]| -> Vec<Vec<Complex64>> {
        ks.iter()
            .map(|&k| plane.iter().map(|z| phase_harmonic(*z, k)).collect())
            .collect()
    };
    let h1 = harmonics(p1);
    let h2 = harmonics(p2);
    // Raw harmonic covariances C^harm_{k,k'}(tau), uncentered.
    let nk = ks.len();
    let mut charm = vec![Complex64::default(); nk * nk];
    for a in 0..nk {
        for b in 0..nk {
            let mut acc = Complex64::default();
            for uy in 0..n {
                let sy = (uy as i32 - tau.1).rem_euclid(n as i32) as usize;
                for ux in 0..n {
                    let sx = (ux as i32 - tau.0).rem_euclid(n as i32) as usize;
                    acc += h1[a][uy * n + ux] * h2[b][sy * n + sx].conj();
                }
            }
            charm[a * nk + b] = acc / (n * n) as f64;
        }
    }
    let alphas = phase_grid(alpha_count);
    let mut max_err = 0.0f64;
    let mut scale = 0.0f64;
    for &al in &alphas {
        for &al2 in &alphas {
            let r1: Vec<f64> = p1
                .iter()
                .map(|z| (al.cos() * z.re - al.sin() * z.im).max(0.0))
                .collect();
            let r2: Vec<f64> = p2
                .iter()
                .map(|z| (al2.cos() * z.re - al2.sin() * z.im).max(0.0))
                .collect();
            let direct = covariance_entry(&r1, &r2, n, tau, 0.0, 0.0);
            let mut series = Complex64::default();
            for (a, &k) in ks.iter().enumerate() {
                for (b, &k2) in ks.iter().enumerate() {
                    series += cks[a]
                        * cks[b].conj()
                        * charm[a * nk + b]
                        * Complex64::from_polar(1.0, k as f64 * al - k2 as f64 * al2);
                }
            }
            max_err = max_err.max((series - direct).norm());
            scale = scale.max(direct.abs());
        }
    }
    Ok(OracleReport::new("harmonic-covariance", max_err, scale, tol))
}

/// Verifies shift invariance of the periodic statistics.
pub fn check_shift_invariance(
    x: &ImagePlane,
    bank: &FilterBank,
    variant: Variant,
    alpha_count: usize,
    tol: f64,
) -> Result<OracleReport> {
    let set = build_index_set(variant, bank.j_max(), bank.l_count(), alpha_count)?;
    let a = compute_statistics(&Texture::Gray(x.clone()), bank, &set, None, Boundary::Periodic)?;
    let shifted = x.circular_shift(3, 7);
    let b = compute_statistics(&Texture::Gray(shifted), bank, &set, None, Boundary::Periodic)?;
    let mut max_err = 0.0f64;
    let mut scale = 0.0f64;
    for (u, v) in a.values.iter().zip(&b.values) {
        max_err = max_err.max((u - v).abs());
        scale = scale.max(v.abs());
    }
    Ok(OracleReport::new("shift-invariance", max_err, scale, tol))
}

/// Verifies the synthesis gradient against central finite differences.
pub fn check_gradient(seed: Seed, tol: f64) -> Result<OracleReport> {
    use crate::synthesis::{ModelConfig, SynthesisContext};
    let n = 16;
    let obs = Texture::Gray(sample_gaussian_image(n, 0.5, 0.15, seed)?);
    let config = ModelConfig {
        variant: Variant::I,
        scales: 2,
        orientations: 2,
        phases: 4,
        ..Default::default()
    };
    let ctx = SynthesisContext::new(&obs, &config)?;
    let cand = sample_gaussian_image(n, 0.5, 0.15, Seed(seed.0.wrapping_add(1)))?;
    let x: Vec<f64> = cand.as_slice().to_vec();
    let (_, grad) = ctx.loss_and_gradient(&x)?;
    let scale = grad.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let h = 1e-6;
    let mut max_err = 0.0f64;
    for k in 0..16 {
        let i = (k * 7919) % x.len();
        let mut xp = x.clone();
        xp[i] += h;
        let (fp, _) = ctx.loss_and_gradient(&xp)?;
        xp[i] -= 2.0 * h;
        let (fm, _) = ctx.loss_and_gradient(&xp)?;
        max_err = max_err.max(((fp - fm) / (2.0 * h) - grad[i]).abs());
    }
    Ok(OracleReport::new("gradient", max_err, scale, tol))
}

/// Runs the full verification suite on deterministic inputs.
pub fn run_all(seed: Seed) -> Result<Vec<OracleReport>> {
    let n = 16;
    let bank = build_filter_bank(n, 2, 2, WaveletFamily::Morlet)?;
    let x = sample_gaussian_image(n, 0.5, 0.2, seed)?;
    let reports = vec![
        check_wavelet_transform(&x, &bank, 1e-10)?,
        check_statistics(&x, &bank, Variant::I, 2, 1e-10)?,
        check_four_phase_identity(&x, &bank, 1e-8)?,
        prop1_check(&x, &bank, 0, 0, 1, 1, (1, 0), 4, 64, 1e-3)?,
        check_shift_invariance(&x, &bank, Variant::I, 4, 1e-10)?,
        check_gradient(seed, 1e-4)?,
    ];
    Ok(reports)
}

/// Covariances computed with observation averages forced to zero, for use by
/// identity checks (re-exported convenience over the public entry point).
pub fn zeroed_means(plane_count: usize) -> ObsMeans {
    ObsMeans {
        full: vec![0.0; plane_count],
        windowed: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_inverse_dft_matches_fft() {
        let n = 8;
        let fft = crate::fft::Fft2::new(n);
        let x = sample_gaussian_image(n, 0.0, 1.0, Seed(1)).unwrap();
        let hat = fft.forward_real(x.as_slice());
        let slow = naive_inverse_dft(&hat, n).unwrap();
        for (a, b) in slow.iter().zip(x.as_slice()) {
            assert!((a.re - b).abs() < 1e-10 && a.im.abs() < 1e-10);
        }
    }

    #[test]
    fn naive_covariance_of_constants_is_zero() {
        let a = vec![0.7; 64];
        assert!(naive_covariance(&a, &a, 8, (3, 2), 0.7, 0.7).abs() < 1e-15);
    }

    #[test]
    fn naive_convolution_of_delta_is_the_filter() {
        let n = 8;
        let mut x = vec![0.0; n * n];
        x[0] = 1.0;
        let psi: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64).cos()))
            .collect();
        let out = naive_convolution(&x, &psi, n).unwrap();
        for (a, b) in out.iter().zip(&psi) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn naive_convolution_with_ones_filter_sums_input() {
        let n = 8;
        let x = sample_gaussian_image(n, 0.0, 1.0, Seed(2)).unwrap();
        let psi = vec![Complex64::new(1.0, 0.0); n * n];
        let total: f64 = x.as_slice().iter().sum();
        let out = naive_convolution(x.as_slice(), &psi, n).unwrap();
        for v in &out {
            assert!((v.re - total).abs() < 1e-10 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn naive_covariance_symmetry_and_variance() {
        let n = 8;
        let a = sample_gaussian_image(n, 0.0, 1.0, Seed(3)).unwrap();
        let b = sample_gaussian_image(n, 0.0, 1.0, Seed(4)).unwrap();
        let (ma, mb) = (a.mean(), b.mean());
        let tau = (2, -3);
        let fwd = naive_covariance(a.as_slice(), b.as_slice(), n, tau, ma, mb);
        let rev = naive_covariance(b.as_slice(), a.as_slice(), n, (-tau.0, -tau.1), mb, ma);
        assert!((fwd - rev).abs() < 1e-14);
        // tau = 0, same plane, centered: the mean square of the fluctuation.
        let var = naive_covariance(a.as_slice(), a.as_slice(), n, (0, 0), ma, ma);
        let ms: f64 = a
            .as_slice()
            .iter()
            .map(|v| (v - ma) * (v - ma))
            .sum::<f64>()
            / (n * n) as f64;
        assert!((var - ms).abs() < 1e-14);
    }

    #[test]
    fn heavy_truncation_fails_the_harmonic_check() {
        let n = 16;
        let bank = build_filter_bank(n, 2, 2, WaveletFamily::Morlet).unwrap();
        let x = sample_gaussian_image(n, 0.5, 0.2, Seed(42)).unwrap();
        let r = prop1_check(&x, &bank, 0, 0, 1, 1, (1, 0), 4, 0, 1e-3).unwrap();
        assert!(!r.passed, "K=0 should not reach 1e-3, got {}", r.max_rel_err);
    }

    #[test]
    fn harmonic_check_variance_term_real_nonnegative() {
        let n = 16;
        let bank = build_filter_bank(n, 2, 2, WaveletFamily::Morlet).unwrap();
        let x = sample_gaussian_image(n, 0.5, 0.2, Seed(5)).unwrap();
        let w = wavelet_transform(&x, &bank).unwrap();
        let p = w.plane(1, 0);
        let r: Vec<f64> = p.iter().map(|z| z.re.max(0.0)).collect();
        let c = covariance_entry(&r, &r, n, (0, 0), 0.0, 0.0);
        assert!(c >= 0.0);
    }

    #[test]
    fn full_suite_passes() {
        for r in run_all(Seed(42)).unwrap() {
            assert!(
                r.passed,
                "{}: rel err {} vs tol {}",
                r.name, r.max_rel_err, r.tolerance
            );
        }
    }

    #[test]
    fn side_guard_rejects_large_grids() {
        let hat = vec![Complex64::default(); 64 * 64];
        assert!(naive_inverse_dft(&hat, 64).is_err());
    }
}
