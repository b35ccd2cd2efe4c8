//! Minimal raster plots written with `image`.

use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::topomap::TopoMap;

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const GREY: Rgb<u8> = Rgb([160, 160, 160]);
pub const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
pub const BLUE: Rgb<u8> = Rgb([31, 119, 180]);
pub const RED: Rgb<u8> = Rgb([214, 39, 40]);

fn save_err(path: &Path, e: image::ImageError) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// One band of a map as grayscale, min-max scaled, upsampled by `scale`.
pub fn band_image(map: &TopoMap, band: usize, scale: u32) -> GrayImage {
    let g = map.grid();
    let plane = map.data.index_axis(ndarray::Axis(2), band);
    let (lo, hi) = plane.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    GrayImage::from_fn(g as u32 * scale, g as u32 * scale, |x, y| {
        let v = plane[[(y / scale) as usize, (x / scale) as usize]];
        Luma([(255.0 * (v - lo) / span).round() as u8])
    })
}

pub fn save_gray(img: &GrayImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| save_err(path, e))
}

struct Canvas {
    img: RgbImage,
    margin: u32,
}

impl Canvas {
    fn new(w: u32, h: u32) -> Self {
        let mut img = RgbImage::from_pixel(w, h, WHITE);
        let margin = 20;
        for x in margin..w - margin {
            img.put_pixel(x, h - margin, GREY);
            img.put_pixel(x, margin, GREY);
        }
        for y in margin..=h - margin {
            img.put_pixel(margin, y, GREY);
            img.put_pixel(w - margin, y, GREY);
        }
        Canvas { img, margin }
    }

    fn inner(&self) -> (f64, f64) {
        ((self.img.width() - 2 * self.margin) as f64, (self.img.height() - 2 * self.margin) as f64)
    }

    /// Unit-square coordinates, origin bottom left.
    fn to_px(&self, u: f64, v: f64) -> (f64, f64) {
        let (w, h) = self.inner();
        (self.margin as f64 + u * w, self.margin as f64 + (1.0 - v) * h)
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), c: Rgb<u8>) {
        let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let (x, y) = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
            let (x, y) = (x.round() as i64, y.round() as i64);
            if x >= 0 && y >= 0 && (x as u32) < self.img.width() && (y as u32) < self.img.height() {
                self.img.put_pixel(x as u32, y as u32, c);
            }
        }
    }

    fn rect(&mut self, a: (f64, f64), b: (f64, f64), c: Rgb<u8>) {
        let (x0, x1) = (a.0.min(b.0).round() as u32, a.0.max(b.0).round() as u32);
        let (y0, y1) = (a.1.min(b.1).round() as u32, a.1.max(b.1).round() as u32);
        for x in x0..=x1.min(self.img.width() - 1) {
            for y in y0..=y1.min(self.img.height() - 1) {
                self.img.put_pixel(x, y, c);
            }
        }
    }

    fn save(&self, path: &Path) -> Result<()> {
        self.img.save(path).map_err(|e| save_err(path, e))
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

/// Overlaid line series sharing one x axis.
pub fn line_plot(x: &[f64], series: &[(&[f64], Rgb<u8>)], path: &Path) -> Result<()> {
    let mut c = Canvas::new(800, 300);
    if x.len() < 2 {
        return c.save(path);
    }
    let (x0, x1) = range(x.iter().copied());
    let (y0, y1) = range(series.iter().flat_map(|(s, _)| s.iter().copied()));
    for (s, colour) in series {
        let pts: Vec<_> = x.iter().zip(s.iter()).map(|(&a, &b)| c.to_px((a - x0) / (x1 - x0), (b - y0) / (y1 - y0))).collect();
        for w in pts.windows(2) {
            c.line(w[0], w[1], *colour);
        }
    }
    c.save(path)
}

/// Bar histogram of `values` over `bins` equal bins.
pub fn histogram(values: &[f64], bins: usize, path: &Path) -> Result<Vec<usize>> {
    let mut c = Canvas::new(600, 300);
    let (lo, hi) = range(values.iter().copied());
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    for (i, &n) in counts.iter().enumerate() {
        let u0 = i as f64 / bins as f64;
        let u1 = (i + 1) as f64 / bins as f64;
        let a = c.to_px(u0 + 0.1 / bins as f64, 0.0);
        let b = c.to_px(u1 - 0.1 / bins as f64, n as f64 / top);
        if n > 0 {
            c.rect(a, b, BLUE);
        }
    }
    c.save(path)?;
    Ok(counts)
}
