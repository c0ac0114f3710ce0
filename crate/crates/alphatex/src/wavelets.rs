//! Oriented wavelet filter banks and the FFT-based wavelet transform with its
//! adjoint, under periodic boundary conditions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::image::ImagePlane;

/// Morlet parameters: central frequency, envelope width, aspect ratio 4/L.
const XI0: f64 = 3.0 * std::f64::consts::PI / 4.0;
const SIGMA0: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveletFamily {
    Morlet,
    BumpSteerable,
}

impl Default for WaveletFamily {
    fn default() -> Self {
        WaveletFamily::Morlet
    }
}

/// Fourier-domain oriented band-pass filters plus one Gaussian low-pass,
/// sampled on the periodic n-by-n frequency grid.
pub struct FilterBank {
    n: usize,
    j_max: usize,
    l_count: usize,
    family: WaveletFamily,
    /// J*L filters, index j * l_count + l.
    band_pass: Vec<Vec<Complex64>>,
    low_pass: Vec<Complex64>,
}

#[inline]
fn signed_coord(i: usize, n: usize) -> f64 {
    if i < n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

impl FilterBank {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn j_max(&self) -> usize {
        self.j_max
    }
    pub fn l_count(&self) -> usize {
        self.l_count
    }
    pub fn family(&self) -> WaveletFamily {
        self.family
    }
    pub fn band_pass(&self, j: usize, l: usize) -> &[Complex64] {
        &self.band_pass[j * self.l_count + l]
    }
    pub fn low_pass(&self) -> &[Complex64] {
        &self.low_pass
    }

    /// Spatial-domain filter (periodized), for inspection and oracles.
    pub fn band_pass_spatial(&self, j: usize, l: usize) -> Vec<Complex64> {
        let fft = Fft2::new(self.n);
        let mut buf = self.band_pass(j, l).to_vec();
        fft.inverse(&mut buf);
        buf
    }

    pub fn low_pass_spatial(&self) -> Vec<Complex64> {
        let fft = Fft2::new(self.n);
        let mut buf = self.low_pass.clone();
        fft.inverse(&mut buf);
        buf
    }
}

/// Builds the filter bank for grid side `n`, `j_max` scales and `l_count`
/// orientations per half turn.
pub fn build_filter_bank(
    n: usize,
    j_max: usize,
    l_count: usize,
    family: WaveletFamily,
) -> Result<FilterBank> {
    if !n.is_power_of_two() || n < 8 {
        return Err(Error::InvalidConfig(format!("grid side {n} must be a power of two >= 8")));
    }
    if j_max < 1 || (1usize << j_max) > n / 4 {
        return Err(Error::InvalidConfig(format!(
            "scale 2^{j_max} too large for grid side {n}"
        )));
    }
    if l_count < 1 {
        return Err(Error::InvalidConfig("need at least one orientation".into()));
    }
    let fft = Fft2::new(n);
    let mut band_pass = Vec::with_capacity(j_max * l_count);
    for j in 0..j_max {
        for l in 0..l_count {
            let theta = l as f64 * std::f64::consts::PI / l_count as f64;
            let filt = match family {
                WaveletFamily::Morlet => morlet_filter_hat(n, j, theta, l_count, &fft),
                WaveletFamily::BumpSteerable => bump_filter_hat(n, j, theta, l_count, &fft),
            };
            band_pass.push(filt);
        }
    }
    let low_pass = gaussian_low_pass_hat(n, j_max);
    Ok(FilterBank {
        n,
        j_max,
        l_count,
        family,
        band_pass,
        low_pass,
    })
}

/// Morlet wavelet at scale 2^j and orientation theta, built in the spatial
/// domain on a centered grid, periodized onto the torus, with the DC offset
/// removed exactly after discretization, L1-normalized, then FFT'd.
fn morlet_filter_hat(n: usize, j: usize, theta: f64, l_count: usize, fft: &Fft2) -> Vec<Complex64> {
    let s = (1u64 << j) as f64;
    let gamma = 4.0 / l_count as f64;
    let (ct, st) = (theta.cos(), theta.sin());
    let amp = 1.0 / (s * s);
    let mut osc = vec![Complex64::default(); n * n];
    let mut env = vec![0.0f64; n * n];
    let nn = n as f64;
    for iy in 0..n {
        let y0 = signed_coord(iy, n);
        for ix in 0..n {
            let x0 = signed_coord(ix, n);
            let mut osc_acc = Complex64::default();
            let mut env_acc = 0.0;
            // Sum over the 3x3 periodic replicas; the envelope decays fast
            // enough that farther replicas are negligible.
            for my in -1i32..=1 {
                for mx in -1i32..=1 {
                    let x = x0 + mx as f64 * nn;
                    let y = y0 + my as f64 * nn;
                    let v1 = (x * ct + y * st) / s;
                    let v2 = (-x * st + y * ct) / s;
                    let g = (-(v1 * v1 + gamma * gamma * v2 * v2) / (2.0 * SIGMA0 * SIGMA0)).exp();
                    if g > 0.0 {
                        env_acc += g;
                        osc_acc += Complex64::from_polar(g, XI0 * v1);
                    }
                }
            }
            osc[iy * n + ix] = amp * osc_acc;
            env[iy * n + ix] = amp * env_acc;
        }
    }
    let osc_sum: Complex64 = osc.iter().sum();
    let env_sum: f64 = env.iter().sum();
    let beta = osc_sum / env_sum;
    let mut psi: Vec<Complex64> = osc
        .iter()
        .zip(&env)
        .map(|(&o, &e)| o - beta * e)
        .collect();
    // Remove the floating-point residual of the mean so admissibility holds
    // to the last bit.
    let resid: Complex64 = psi.iter().sum::<Complex64>() / (n * n) as f64;
    for v in psi.iter_mut() {
        *v -= resid;
    }
    let l1: f64 = psi.iter().map(|v| v.norm()).sum();
    for v in psi.iter_mut() {
        *v /= l1;
    }
    let mut hat = psi;
    fft.forward(&mut hat);
    hat
}

/// Bump-steerable wavelet defined directly in the Fourier domain: a compactly
/// supported radial bump centered at XI0 * 2^-j with a cos^(L-1) angular
/// window. Zero DC by construction.
fn bump_filter_hat(n: usize, j: usize, theta: f64, l_count: usize, fft: &Fft2) -> Vec<Complex64> {
    let s = (1u64 << j) as f64;
    let mut hat = vec![Complex64::default(); n * n];
    let two_pi = 2.0 * std::f64::consts::PI;
    for iy in 0..n {
        let fy = signed_coord(iy, n) * two_pi / n as f64;
        for ix in 0..n {
            let fx = signed_coord(ix, n) * two_pi / n as f64;
            let r = (fx * fx + fy * fy).sqrt() * s;
            let t = (r - XI0) / (XI0);
            if t.abs() >= 1.0 || r == 0.0 {
                continue;
            }
            let radial = (-1.0 / (1.0 - t * t)).exp();
            let ang = fy.atan2(fx) - theta;
            let mut d = ang.rem_euclid(two_pi);
            if d > std::f64::consts::PI {
                d -= two_pi;
            }
            if d.abs() >= std::f64::consts::FRAC_PI_2 {
                continue;
            }
            let angular = d.cos().powi(l_count as i32 - 1);
            hat[iy * n + ix] = Complex64::new(radial * angular, 0.0);
        }
    }
    // Normalize so the spatial filter has unit L1 norm, matching the Morlet
    // convention.
    let mut spatial = hat.clone();
    fft.inverse(&mut spatial);
    let l1: f64 = spatial.iter().map(|v| v.norm()).sum();
    for v in hat.iter_mut() {
        *v /= l1;
    }
    hat
}

/// Isotropic Gaussian low-pass with std 0.8 * 2^J and unit DC gain, built in
/// the Fourier domain (exact periodization of the continuous Gaussian).
fn gaussian_low_pass_hat(n: usize, j_max: usize) -> Vec<Complex64> {
    let sigma = 0.8 * (1u64 << j_max) as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut hat = vec![Complex64::default(); n * n];
    for iy in 0..n {
        let fy = signed_coord(iy, n) * two_pi / n as f64;
        for ix in 0..n {
            let fx = signed_coord(ix, n) * two_pi / n as f64;
            let w2 = fx * fx + fy * fy;
            hat[iy * n + ix] = Complex64::new((-sigma * sigma * w2 / 2.0).exp(), 0.0);
        }
    }
    hat
}

/// The J*L complex band-pass planes plus the low-pass plane of one image.
pub struct WaveletCoefficients {
    pub n: usize,
    pub j_max: usize,
    pub l_count: usize,
    /// Index j * l_count + l.
    pub planes: Vec<Vec<Complex64>>,
    pub low_pass: Vec<Complex64>,
}

impl WaveletCoefficients {
    pub fn plane(&self, j: usize, l: usize) -> &[Complex64] {
        &self.planes[j * self.l_count + l]
    }

    pub fn zeros_like(bank: &FilterBank) -> Self {
        let n = bank.n();
        Self {
            n,
            j_max: bank.j_max(),
            l_count: bank.l_count(),
            planes: vec![vec![Complex64::default(); n * n]; bank.j_max() * bank.l_count()],
            low_pass: vec![Complex64::default(); n * n],
        }
    }
}

/// Circular convolution of `x` with every filter, via FFT.
pub fn wavelet_transform(x: &ImagePlane, bank: &FilterBank) -> Result<WaveletCoefficients> {
    if x.n() != bank.n() {
        return Err(Error::SizeMismatch(format!(
            "image side {} vs filter bank side {}",
            x.n(),
            bank.n()
        )));
    }
    let n = bank.n();
    let fft = Fft2::new(n);
    let xhat = fft.forward_real(x.as_slice());
    let convolve = |filter: &[Complex64]| {
        let mut buf: Vec<Complex64> = xhat.iter().zip(filter).map(|(a, b)| a * b).collect();
        fft.inverse(&mut buf);
        buf
    };
    let planes: Vec<Vec<Complex64>> = (0..bank.j_max() * bank.l_count())
        .map(|i| convolve(&bank.band_pass[i]))
        .collect();
    let low_pass = convolve(&bank.low_pass);
    Ok(WaveletCoefficients {
        n,
        j_max: bank.j_max(),
        l_count: bank.l_count(),
        planes,
        low_pass,
    })
}

/// Adjoint of `wavelet_transform` seen as a linear map from real images to
/// stacked complex planes with inner product Re<a,b> = sum Re(a * conj(b)).
pub fn adjoint_wavelet_transform(
    coeffs: &WaveletCoefficients,
    bank: &FilterBank,
) -> Result<ImagePlane> {
    if coeffs.n != bank.n()
        || coeffs.planes.len() != bank.band_pass.len()
    {
        return Err(Error::SizeMismatch("coefficients do not match filter bank".into()));
    }
    let n = bank.n();
    let fft = Fft2::new(n);
    let mut acc = vec![Complex64::default(); n * n];
    for (plane, filter) in coeffs.planes.iter().zip(&bank.band_pass) {
        let mut hat = plane.clone();
        fft.forward(&mut hat);
        for ((a, y), f) in acc.iter_mut().zip(&hat).zip(filter) {
            *a += y * f.conj();
        }
    }
    let mut hat = coeffs.low_pass.clone();
    fft.forward(&mut hat);
    for ((a, y), f) in acc.iter_mut().zip(&hat).zip(&bank.low_pass) {
        *a += y * f.conj();
    }
    fft.inverse(&mut acc);
    ImagePlane::new(n, acc.iter().map(|v| v.re).collect())
}
