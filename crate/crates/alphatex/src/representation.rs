//! Pointwise nonlinearities (phase-shifted rectifier, phase harmonics) and
//! assembly of the rectified representation for gray and color images.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::image::Texture;
use crate::wavelets::{wavelet_transform, FilterBank, WaveletCoefficients};

/// rho_alpha(z) = max(0, Re(e^{i alpha} z)).
#[inline]
pub fn rectify(z: Complex64, alpha: f64) -> f64 {
    let (s, c) = alpha.sin_cos();
    (c * z.re - s * z.im).max(0.0)
}

/// Four-phase decomposition of a complex number:
/// z = rho_0(z) - rho_pi(z) - i (rho_{pi/2}(z) - rho_{3pi/2}(z)).
pub fn rectifier_decomposition_check(z: Complex64) -> Complex64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let re = rectify(z, 0.0) - rectify(z, PI);
    let im = rectify(z, FRAC_PI_2) - rectify(z, 3.0 * FRAC_PI_2);
    Complex64::new(re, -im)
}

/// Phase harmonic [z]^k = |z| e^{i k phi(z)}, with phi(0) = 0.
pub fn phase_harmonic(z: Complex64, k: i32) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        return Complex64::default();
    }
    Complex64::from_polar(r, k as f64 * z.arg())
}

/// Fourier coefficient c_k of h(alpha) = max(0, cos(alpha)), computed by
/// Gauss-Legendre quadrature over the support [-pi/2, pi/2].
pub fn rectifier_fourier_coefficient(k: i32, quadrature_points: usize) -> Complex64 {
    assert!(
        quadrature_points >= 4 * k.unsigned_abs() as usize + 64,
        "too few quadrature points for harmonic {k}"
    );
    let (nodes, weights) = gauss_legendre(quadrature_points);
    let half = std::f64::consts::FRAC_PI_2;
    let mut acc = Complex64::default();
    for (&t, &w) in nodes.iter().zip(&weights) {
        let alpha = half * t;
        let f = alpha.cos() * Complex64::from_polar(1.0, -(k as f64) * alpha);
        acc += w * f;
    }
    acc * half / (2.0 * std::f64::consts::PI)
}

/// Gauss-Legendre nodes/weights on [-1, 1] (Newton iteration on P_n).
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Initial guess (Chebyshev-like).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Raw rectified planes of all (channel, scale, orientation, phase) indices,
/// plus the spatial averages used for centering and the underlying wavelet
/// coefficients (kept for gradient computation).
pub struct RectifiedStack {
    pub n: usize,
    pub channels: usize,
    pub j_max: usize,
    pub l_count: usize,
    pub alphas: Vec<f64>,
    /// Index ((c * j_max + j) * l_count + l) * alphas.len() + a.
    pub planes: Vec<Vec<f64>>,
    /// Full-grid spatial average per plane; either the stack's own averages
    /// or the supplied observation averages.
    pub means: Vec<f64>,
    /// Real part of x * phi_J per channel.
    pub low_pass: Vec<Vec<f64>>,
    pub coeffs: Vec<WaveletCoefficients>,
}

impl RectifiedStack {
    #[inline]
    pub fn plane_index(&self, c: usize, j: usize, l: usize, a: usize) -> usize {
        ((c * self.j_max + j) * self.l_count + l) * self.alphas.len() + a
    }

    pub fn plane_count(&self) -> usize {
        self.planes.len()
    }
}

/// The uniform phase grid A_A = (2 pi / A) {0 .. A-1}.
pub fn phase_grid(alpha_count: usize) -> Vec<f64> {
    (0..alpha_count)
        .map(|a| 2.0 * std::f64::consts::PI * a as f64 / alpha_count as f64)
        .collect()
}

/// Applies the wavelet transform and the phase-shifted rectifier per channel.
/// When `means` is None this is the observation pass and the stack stores its
/// own spatial averages; otherwise the supplied averages are kept for
/// centering. Centering itself happens at covariance time.
pub fn compute_representation(
    x: &Texture,
    bank: &FilterBank,
    alphas: &[f64],
    means: Option<&[f64]>,
) -> Result<RectifiedStack> {
    let n = bank.n();
    if x.n() != n {
        return Err(Error::SizeMismatch("image does not match filter bank".into()));
    }
    let channels = x.channel_count();
    let a_count = alphas.len();
    let jl = bank.j_max() * bank.l_count();
    let mut planes: Vec<Vec<f64>> = Vec::with_capacity(channels * jl * a_count);
    let mut low_pass = Vec::with_capacity(channels);
    let mut coeffs = Vec::with_capacity(channels);
    for c in 0..channels {
        let w = wavelet_transform(x.channel(c), bank)?;
        for p in 0..jl {
            let wp = &w.planes[p];
            for &alpha in alphas {
                let (s, co) = alpha.sin_cos();
                planes.push(wp.iter().map(|z| (co * z.re - s * z.im).max(0.0)).collect());
            }
        }
        low_pass.push(w.low_pass.iter().map(|z| z.re).collect());
        coeffs.push(w);
    }
    let means = match means {
        Some(m) => {
            if m.len() != planes.len() {
                return Err(Error::SizeMismatch("means length mismatch".into()));
            }
            m.to_vec()
        }
        None => planes
            .iter()
            .map(|p| p.iter().sum::<f64>() / (n * n) as f64)
            .collect(),
    };
    Ok(RectifiedStack {
        n,
        channels,
        j_max: bank.j_max(),
        l_count: bank.l_count(),
        alphas: alphas.to_vec(),
        planes,
        means,
        low_pass,
        coeffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{sample_gaussian_image, ImagePlane, Seed};
    use crate::wavelets::build_filter_bank;
    use crate::wavelets::WaveletFamily;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn rectify_examples() {
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(rectify(one, 0.0), 1.0);
        assert_eq!(rectify(one, PI), 0.0);
        assert!((rectify(Complex64::new(0.0, -1.0), FRAC_PI_2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decomposition_identity() {
        let z = Complex64::new(2.0, 3.0);
        let d = rectifier_decomposition_check(z);
        assert!((d - z).norm() < 1e-14 * z.norm());
        assert_eq!(rectifier_decomposition_check(Complex64::default()), Complex64::default());
        let mut rng = Seed(42).rng();
        use rand::Rng;
        for _ in 0..1000 {
            let z = Complex64::new(rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0);
            let d = rectifier_decomposition_check(z);
            assert!((d - z).norm() < 1e-14 * z.norm().max(1e-30));
        }
    }

    #[test]
    fn phase_harmonic_examples() {
        let z = Complex64::new(0.3, -1.7);
        assert!((phase_harmonic(z, 1) - z).norm() < 1e-15);
        assert!((phase_harmonic(z, 0) - Complex64::new(z.norm(), 0.0)).norm() < 1e-15);
        let h = phase_harmonic(Complex64::new(1.0, 1.0), 2);
        assert!((h - Complex64::new(0.0, 2.0f64.sqrt())).norm() < 1e-14);
        assert_eq!(phase_harmonic(Complex64::default(), 3), Complex64::default());
    }

    #[test]
    fn fourier_coefficients_of_rectified_cosine() {
        let c1 = rectifier_fourier_coefficient(1, 128);
        assert!((c1.re - 0.25).abs() < 1e-10 && c1.im.abs() < 1e-10);
        let c0 = rectifier_fourier_coefficient(0, 128);
        assert!((c0.re - 1.0 / PI).abs() < 1e-10 && c0.im.abs() < 1e-10);
        let c3 = rectifier_fourier_coefficient(3, 128);
        assert!(c3.norm() < 1e-10);
        // Even harmonics: c_k = (1/pi) (-1)^{k/2+1} / (k^2 - 1).
        let c2 = rectifier_fourier_coefficient(2, 128);
        assert!((c2.re - 1.0 / (3.0 * PI)).abs() < 1e-10);
        let c4 = rectifier_fourier_coefficient(4, 128);
        assert!((c4.re + 1.0 / (15.0 * PI)).abs() < 1e-10);
    }

    #[test]
    fn constant_image_rectifies_to_zero() {
        let n = 16;
        let bank = build_filter_bank(n, 2, 2, WaveletFamily::Morlet).unwrap();
        let x = Texture::Gray(ImagePlane::constant(n, 0.4).unwrap());
        let stack = compute_representation(&x, &bank, &phase_grid(4), None).unwrap();
        for (p, &m) in stack.planes.iter().zip(&stack.means) {
            assert!(p.iter().all(|&v| v.abs() <= 1e-10 * 0.4));
            assert!(m.abs() <= 1e-10 * 0.4);
        }
    }

    #[test]
    fn centering_by_own_mean_is_exact() {
        let n = 16;
        let bank = build_filter_bank(n, 2, 2, WaveletFamily::Morlet).unwrap();
        let x = Texture::Gray(sample_gaussian_image(n, 0.0, 1.0, Seed(2)).unwrap());
        let stack = compute_representation(&x, &bank, &phase_grid(4), None).unwrap();
        for (p, &m) in stack.planes.iter().zip(&stack.means) {
            let centered: f64 = p.iter().map(|v| v - m).sum();
            assert!(centered.abs() < 1e-10);
        }
    }

    #[test]
    fn prop1_truncated_reconstruction_pointwise() {
        // Partial Fourier series in alpha converges to the rectifier.
        let n = 32;
        let bank = build_filter_bank(n, 2, 2, WaveletFamily::Morlet).unwrap();
        let x = sample_gaussian_image(n, 0.0, 1.0, Seed(7)).unwrap();
        let w = wavelet_transform(&x, &bank).unwrap();
        let plane = w.plane(1, 1);
        let max_mag = plane.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let k_max = 64i32;
        let cks: Vec<Complex64> = (-k_max..=k_max)
            .map(|k| rectifier_fourier_coefficient(k, 4 * k.unsigned_abs() as usize + 64))
            .collect();
        let alphas = phase_grid(16);
        let mut max_err = 0.0f64;
        for &alpha in &alphas {
            for z in plane.iter().take(128) {
                let mut series = Complex64::default();
                for (i, k) in (-k_max..=k_max).enumerate() {
                    series += cks[i]
                        * phase_harmonic(*z, k)
                        * Complex64::from_polar(1.0, k as f64 * alpha);
                }
                let direct = rectify(*z, alpha);
                max_err = max_err.max((series.re - direct).abs().max(series.im.abs()));
            }
        }
        // Uniform truncation bound: the coefficient tail sums to 1/((K+1) pi)
        // (attained only exactly at the rectifier kink).
        let tail = 1.0 / ((k_max as f64 + 1.0) * PI);
        assert!(
            max_err <= tail * max_mag,
            "err {max_err} vs bound {}",
            tail * max_mag
        );
    }

    proptest! {
        #[test]
        fn rectifier_positive_homogeneity(re in -2.0f64..2.0, im in -2.0f64..2.0,
                                          lambda in 0.01f64..10.0, alpha in 0.0f64..6.28) {
            let z = Complex64::new(re, im);
            let lhs = rectify(lambda * z, alpha);
            let rhs = lambda * rectify(z, alpha);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }

        #[test]
        fn rectifier_phase_rotation_covariance(re in -2.0f64..2.0, im in -2.0f64..2.0,
                                               alpha in 0.0f64..6.28, beta in 0.0f64..6.28) {
            let z = Complex64::new(re, im);
            let lhs = rectify(Complex64::from_polar(1.0, beta) * z, alpha);
            let rhs = rectify(z, alpha + beta);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * z.norm().max(1.0));
        }
    }
}
