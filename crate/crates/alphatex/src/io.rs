//! PNG and PGM/PPM input, PNG output with 8-bit quantization.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::image::{ColorImage, ImagePlane, Texture};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    Gray,
    Color,
}

/// Loads a raster image, scales pixel values to [0,1] and verifies the
/// power-of-two side length. Gray mode averages channels of color sources.
pub fn load_image(path: &Path, mode: LoadMode) -> Result<Texture> {
    let img = image::open(path).map_err(|e| Error::Image(e.to_string()))?;
    let (w, h) = (img.width(), img.height());
    if w != h || !w.is_power_of_two() || w < 8 {
        return Err(Error::UnsupportedDimensions { width: w, height: h });
    }
    let n = w as usize;
    match mode {
        LoadMode::Gray => {
            let rgb = img.to_rgb8();
            let data: Vec<f64> = rgb
                .pixels()
                .map(|p| (p.0[0] as f64 + p.0[1] as f64 + p.0[2] as f64) / (3.0 * 255.0))
                .collect();
            Ok(Texture::Gray(ImagePlane::new(n, data)?))
        }
        LoadMode::Color => {
            let rgb = img.to_rgb8();
            let mut planes = [vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n]];
            for (i, p) in rgb.pixels().enumerate() {
                for c in 0..3 {
                    planes[c][i] = p.0[c] as f64 / 255.0;
                }
            }
            let [r, g, b] = planes;
            Ok(Texture::Color(ColorImage::new([
                ImagePlane::new(n, r)?,
                ImagePlane::new(n, g)?,
                ImagePlane::new(n, b)?,
            ])?))
        }
    }
}

#[inline]
fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn save_gray_png(path: &Path, plane: &ImagePlane) -> Result<()> {
    let n = plane.n() as u32;
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_fn(n, n, |x, y| Luma([quantize(plane.get(y as usize, x as usize))]));
    DynamicImage::ImageLuma8(buf)
        .save(path)
        .map_err(|e| Error::Image(e.to_string()))
}

pub fn save_color_png(path: &Path, img: &ColorImage) -> Result<()> {
    let n = img.n() as u32;
    let ch = img.channels();
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_fn(n, n, |x, y| {
        Rgb([
            quantize(ch[0].get(y as usize, x as usize)),
            quantize(ch[1].get(y as usize, x as usize)),
            quantize(ch[2].get(y as usize, x as usize)),
        ])
    });
    DynamicImage::ImageRgb8(buf)
        .save(path)
        .map_err(|e| Error::Image(e.to_string()))
}

pub fn save_texture_png(path: &Path, tex: &Texture) -> Result<()> {
    match tex {
        Texture::Gray(p) => save_gray_png(path, p),
        Texture::Color(c) => save_color_png(path, c),
    }
}
