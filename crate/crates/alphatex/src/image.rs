//! Image containers, deterministic sampling and histogram matching.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A square real-valued image on a power-of-two grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    n: usize,
    data: Vec<f64>,
}

impl ImagePlane {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::UnsupportedDimensions {
                width: n as u32,
                height: n as u32,
            });
        }
        if data.len() != n * n {
            return Err(Error::SizeMismatch(format!(
                "expected {} values, got {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image plane"));
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(n, vec![0.0; n * n])
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(n, vec![value; n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.n + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / (self.n * self.n) as f64
    }

    pub fn std(&self) -> f64 {
        let m = self.mean();
        let var = self
            .data
            .iter()
            .map(|v| {
                let d = v - m;
                d * d
            })
            .sum::<f64>()
            / (self.n * self.n) as f64;
        var.sqrt()
    }

    /// Circular translation: `out(u) = in(u - v)` with `v = (dx, dy)`.
    pub fn circular_shift(&self, dx: i32, dy: i32) -> Self {
        let n = self.n as i32;
        let mut out = vec![0.0; self.data.len()];
        for y in 0..n {
            let sy = (y - dy).rem_euclid(n) as usize;
            for x in 0..n {
                let sx = (x - dx).rem_euclid(n) as usize;
                out[(y * n + x) as usize] = self.data[sy * self.n + sx];
            }
        }
        Self { n: self.n, data: out }
    }
}

/// RGB image: three planes of identical side length.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    planes: [ImagePlane; 3],
}

impl ColorImage {
    pub fn new(planes: [ImagePlane; 3]) -> Result<Self> {
        let n = planes[0].n();
        if planes.iter().any(|p| p.n() != n) {
            return Err(Error::SizeMismatch(
                "color channels must share the same side length".into(),
            ));
        }
        Ok(Self { planes })
    }

    pub fn n(&self) -> usize {
        self.planes[0].n()
    }

    pub fn channels(&self) -> &[ImagePlane; 3] {
        &self.planes
    }

    pub fn channels_mut(&mut self) -> &mut [ImagePlane; 3] {
        &mut self.planes
    }
}

/// Either a gray-scale or a color texture image.
#[derive(Debug, Clone, PartialEq)]
pub enum Texture {
    Gray(ImagePlane),
    Color(ColorImage),
}

impl Texture {
    pub fn n(&self) -> usize {
        match self {
            Texture::Gray(p) => p.n(),
            Texture::Color(c) => c.n(),
        }
    }

    pub fn channel_count(&self) -> usize {
        match self {
            Texture::Gray(_) => 1,
            Texture::Color(_) => 3,
        }
    }

    pub fn channel(&self, c: usize) -> &ImagePlane {
        match self {
            Texture::Gray(p) => {
                assert_eq!(c, 0);
                p
            }
            Texture::Color(img) => &img.channels()[c],
        }
    }
}

/// Seed for the deterministic generator (ChaCha12, a documented counter-based
/// stream cipher RNG, reproducible across platforms).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl Seed {
    pub fn rng(self) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(self.0)
    }
}

/// I.i.d. normal image with the given mean and standard deviation.
/// Identical seeds produce bit-identical output.
pub fn sample_gaussian_image(n: usize, mean: f64, std: f64, seed: Seed) -> Result<ImagePlane> {
    if std < 0.0 {
        return Err(Error::InvalidConfig("negative standard deviation".into()));
    }
    if std == 0.0 {
        return ImagePlane::constant(n, mean);
    }
    let mut rng = seed.rng();
    let normal = Normal::new(mean, std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let data: Vec<f64> = (0..n * n).map(|_| normal.sample(&mut rng)).collect();
    ImagePlane::new(n, data)
}

/// Transplants the exact pixel-value multiset of `target` onto `synth` by rank
/// assignment. Ties in `synth` are broken by raster-scan index.
pub fn histogram_match(synth: &ImagePlane, target: &ImagePlane) -> Result<ImagePlane> {
    if synth.n() != target.n() {
        return Err(Error::SizeMismatch(
            "histogram_match requires equal side lengths".into(),
        ));
    }
    let len = synth.as_slice().len();
    let mut order: Vec<u32> = (0..len as u32).collect();
    let sdata = synth.as_slice();
    order.sort_unstable_by(|&a, &b| {
        sdata[a as usize]
            .total_cmp(&sdata[b as usize])
            .then(a.cmp(&b))
    });
    let mut tvals: Vec<f64> = target.as_slice().to_vec();
    tvals.sort_unstable_by(f64::total_cmp);
    let mut out = vec![0.0; len];
    for (rank, &idx) in order.iter().enumerate() {
        out[idx as usize] = tvals[rank];
    }
    ImagePlane::new(synth.n(), out)
}

/// Channel-wise histogram matching for color images.
pub fn histogram_match_color(synth: &ColorImage, target: &ColorImage) -> Result<ColorImage> {
    let planes = [
        histogram_match(&synth.channels()[0], &target.channels()[0])?,
        histogram_match(&synth.channels()[1], &target.channels()[1])?,
        histogram_match(&synth.channels()[2], &target.channels()[2])?,
    ];
    ColorImage::new(planes)
}
