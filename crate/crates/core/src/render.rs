//! Raster output: power and phase-difference maps, response grids, and the
//! Middlebury color coding of flow fields.

use std::path::Path;

use image::{imageops, GrayImage, Luma, Rgb, RgbImage};

use crate::aperture::FlowMap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::PhaseMap;

const MASK_COLOR: Rgb<u8> = Rgb([200, 0, 0]);

fn shape_of<T>(map: &PhaseMap<T>) -> Result<(usize, usize)> {
    map.shape
        .ok_or_else(|| Error::Image("phase map has no 2-D layout; use a lattice plane".into()))
}

/// Row-major values scaled so the maximum is white; non-positive maximum gives black.
pub fn grayscale(values: &[f64], (rows, cols): (usize, usize)) -> GrayImage {
    let max = values.iter().cloned().fold(0.0, f64::max);
    GrayImage::from_fn(cols as u32, rows as u32, |x, y| {
        let v = values[y as usize * cols + x as usize];
        Luma([if max > 0.0 { (v.max(0.0) / max * 255.0).round() as u8 } else { 0 }])
    })
}

/// Filter amplitude `A_q` per frequency.
pub fn power_image<T: Scalar>(map: &PhaseMap<T>) -> Result<GrayImage> {
    let values: Vec<f64> = map.entries.iter().map(|e| e.power.as_f64()).collect();
    Ok(grayscale(&values, shape_of(map)?))
}

/// ψ as darkness (0 white, π black) with masked frequencies in red.
pub fn psi_image<T: Scalar>(map: &PhaseMap<T>) -> Result<RgbImage> {
    let (rows, cols) = shape_of(map)?;
    Ok(RgbImage::from_fn(cols as u32, rows as u32, |x, y| {
        let e = &map.entries[y as usize * cols + x as usize];
        match e.psi {
            Some(psi) => {
                let g = ((1.0 - psi.as_f64() / std::f64::consts::PI) * 255.0).round() as u8;
                Rgb([g, g, g])
            }
            None => MASK_COLOR,
        }
    }))
}

/// Rectified responses per frequency.
pub fn response_image<T: Scalar>(map: &PhaseMap<T>) -> Result<GrayImage> {
    let values: Vec<f64> = map.entries.iter().map(|e| e.response.as_f64()).collect();
    Ok(grayscale(&values, shape_of(map)?))
}

/// Nearest-neighbour enlargement so small lattices stay legible.
pub fn enlarge<P: image::Pixel + 'static>(img: &image::ImageBuffer<P, Vec<P::Subpixel>>, factor: u32) -> image::ImageBuffer<P, Vec<P::Subpixel>> {
    imageops::resize(img, img.width() * factor, img.height() * factor, imageops::FilterType::Nearest)
}

pub fn save_png<P: image::PixelWithColorType>(img: &image::ImageBuffer<P, Vec<P::Subpixel>>, path: &Path) -> Result<()>
where
    [P::Subpixel]: image::EncodableLayout,
{
    img.save(path)?;
    Ok(())
}

/// Hue segments of the Middlebury color wheel: red–yellow–green–cyan–blue–magenta.
fn color_wheel() -> Vec<[f64; 3]> {
    // (steps, channel that changes, rising)
    const SEGMENTS: [(usize, usize, bool); 6] =
        [(15, 1, true), (6, 0, false), (4, 2, true), (11, 1, false), (13, 0, true), (6, 2, false)];
    let mut wheel = Vec::with_capacity(55);
    let mut c = [255.0, 0.0, 0.0];
    for (n, ch, rising) in SEGMENTS {
        for i in 0..n {
            let ramp = (255.0 * i as f64 / n as f64).floor();
            c[ch] = if rising { ramp } else { 255.0 - ramp };
            wheel.push(c);
        }
        c[ch] = if rising { 255.0 } else { 0.0 };
    }
    wheel
}

/// One flow vector, already divided by the normalization radius.
pub fn flow_color(u: f64, v: f64) -> Rgb<u8> {
    let wheel = color_wheel();
    let n = wheel.len() as f64;
    let rad = u.hypot(v);
    let a = (-v).atan2(-u) / std::f64::consts::PI;
    let fk = (a + 1.0) / 2.0 * (n - 1.0);
    let k0 = fk.floor() as usize % wheel.len();
    let k1 = (k0 + 1) % wheel.len();
    let f = fk - fk.floor();
    let mut out = [0u8; 3];
    for ch in 0..3 {
        let col = ((1.0 - f) * wheel[k0][ch] + f * wheel[k1][ch]) / 255.0;
        let col = if rad <= 1.0 { 1.0 - rad * (1.0 - col) } else { col * 0.75 };
        out[ch] = (255.0 * col).round() as u8;
    }
    Rgb(out)
}

/// Color-coded flow; saturation reaches full at `max_flow` (the map's largest
/// magnitude when `None`).
pub fn flow_image(flow: &FlowMap, max_flow: Option<f64>) -> RgbImage {
    let max = max_flow.unwrap_or_else(|| {
        flow.data
            .iter()
            .map(|&[u, v]| (u as f64).hypot(v as f64))
            .fold(0.0, f64::max)
    });
    let norm = if max > 0.0 { max } else { 1.0 };
    RgbImage::from_fn(flow.width as u32, flow.height as u32, |x, y| {
        let [u, v] = flow.get(x as usize, y as usize);
        flow_color(u as f64 / norm, v as f64 / norm)
    })
}
