//! Discrete space-time signals on a pixel grid.
//!
//! Samples are stored frame-major, then row-major: index `(t * H + y) * W + x`.
//! On a centered extent the spatial coordinate of column `i` is `i - (W-1)/2`
//! (likewise for rows), so an odd size has a unique center pixel at `(0, 0)`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const VOLUME_MAGIC: &[u8; 4] = b"STVL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Extent {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    centered: bool,
}

impl Extent {
    /// A centered extent; width and height must be odd.
    pub fn new(width: usize, height: usize, frames: usize) -> Result<Self> {
        let bad = |reason| Error::InvalidExtent {
            width,
            height,
            frames,
            reason,
        };
        if width == 0 || height == 0 || frames == 0 {
            return Err(bad("all dimensions must be positive"));
        }
        if width % 2 == 0 || height % 2 == 0 {
            return Err(bad("width and height must be odd"));
        }
        Ok(Self {
            width,
            height,
            frames,
            centered: true,
        })
    }

    /// A pixel-indexed canvas (no center pixel required), used for image-like stimuli.
    pub fn canvas(width: usize, height: usize, frames: usize) -> Result<Self> {
        if width == 0 || height == 0 || frames == 0 {
            return Err(Error::InvalidExtent {
                width,
                height,
                frames,
                reason: "all dimensions must be positive",
            });
        }
        Ok(Self {
            width,
            height,
            frames,
            centered: false,
        })
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn len(&self) -> usize {
        self.width * self.height * self.frames
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.frames)
    }

    /// Spatial coordinate of column `i`.
    pub fn x_coord(&self, i: usize) -> i64 {
        if self.centered {
            i as i64 - (self.width as i64 - 1) / 2
        } else {
            i as i64
        }
    }

    /// Spatial coordinate of row `j`.
    pub fn y_coord(&self, j: usize) -> i64 {
        if self.centered {
            j as i64 - (self.height as i64 - 1) / 2
        } else {
            j as i64
        }
    }

    /// Half the spatial width, i.e. the largest `|x|` on a centered grid.
    pub fn half_width(&self) -> usize {
        (self.width - 1) / 2
    }

    /// Temporal midpoint `(T-1)/2`.
    pub fn temporal_center<T: Scalar>(&self) -> T {
        T::from_usize_lossy(self.frames - 1) / T::lit(2.0)
    }

    pub fn index(&self, ix: usize, iy: usize, t: usize) -> usize {
        (t * self.height + iy) * self.width + ix
    }

    pub fn ensure_same(&self, other: &Extent) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::ExtentMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    extent: Extent,
    data: Vec<T>,
}

impl<T: Scalar> Volume<T> {
    pub fn zeros(extent: Extent) -> Self {
        Self {
            extent,
            data: vec![T::zero(); extent.len()],
        }
    }

    pub fn from_vec(extent: Extent, data: Vec<T>) -> Result<Self> {
        if data.len() != extent.len() {
            return Err(Error::InvalidParameter(format!(
                "sample count {} does not match extent {:?}",
                data.len(),
                extent.dims()
            )));
        }
        Ok(Self { extent, data })
    }

    /// Samples `f(x, y, t)` at every grid point, with `x`, `y` in grid
    /// coordinates and `t` the frame index.
    pub fn from_fn(extent: Extent, mut f: impl FnMut(T, T, T) -> T) -> Self {
        let mut data = Vec::with_capacity(extent.len());
        for t in 0..extent.frames {
            let tt = T::from_usize_lossy(t);
            for iy in 0..extent.height {
                let y = T::from_i64(extent.y_coord(iy)).unwrap();
                for ix in 0..extent.width {
                    let x = T::from_i64(extent.x_coord(ix)).unwrap();
                    data.push(f(x, y, tt));
                }
            }
        }
        Self { extent, data }
    }

    pub fn extent(&self) -> Extent {
        self.extent
    }

    pub fn samples(&self) -> &[T] {
        &self.data
    }

    pub fn samples_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_samples(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, ix: usize, iy: usize, t: usize) -> T {
        self.data[self.extent.index(ix, iy, t)]
    }

    pub fn set(&mut self, ix: usize, iy: usize, t: usize, v: T) {
        let i = self.extent.index(ix, iy, t);
        self.data[i] = v;
    }

    /// Sample at centered coordinates; `None` outside the grid.
    pub fn at(&self, x: i64, y: i64, t: usize) -> Option<T> {
        let ix = x - self.extent.x_coord(0);
        let iy = y - self.extent.y_coord(0);
        if ix < 0
            || iy < 0
            || ix as usize >= self.extent.width
            || iy as usize >= self.extent.height
            || t >= self.extent.frames
        {
            return None;
        }
        Some(self.get(ix as usize, iy as usize, t))
    }

    pub fn frame(&self, t: usize) -> &[T] {
        let n = self.extent.width * self.extent.height;
        &self.data[t * n..(t + 1) * n]
    }

    /// Full dot product over all samples.
    pub fn dot(&self, other: &Volume<T>) -> Result<T> {
        self.extent.ensure_same(&other.extent)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn energy(&self) -> T {
        dot(&self.data, &self.data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            extent: self.extent,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Volume<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.extent.ensure_same(&other.extent)?;
        Ok(Self {
            extent: self.extent,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Writes the flat binary format: `STVL`, `u32` W, H, T (little-endian),
    /// then `f32` samples in `(t, y, x)` order.
    pub fn write_stvl<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(VOLUME_MAGIC)?;
        for d in [self.extent.width, self.extent.height, self.extent.frames] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in &self.data {
            let f = v.to_f32().unwrap_or(f32::NAN);
            w.write_all(&f.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_stvl<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != VOLUME_MAGIC {
            return Err(Error::InvalidVolumeFile(format!("bad magic {magic:?}")));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *d = u32::from_le_bytes(b) as usize;
        }
        let extent = if dims[0] % 2 == 1 && dims[1] % 2 == 1 {
            Extent::new(dims[0], dims[1], dims[2])?
        } else {
            Extent::canvas(dims[0], dims[1], dims[2])?
        };
        let mut bytes = vec![0u8; extent.len() * 4];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::InvalidVolumeFile(format!("truncated samples: {e}")))?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| T::from_f32(f32::from_le_bytes([c[0], c[1], c[2], c[3]])).unwrap())
            .collect::<Vec<_>>();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidVolumeFile("non-finite sample".into()));
        }
        Ok(Self { extent, data })
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    // four accumulators keep the reduction order fixed and vectorizable
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            acc[k] = acc[k] + a[4 * c + k] * b[4 * c + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s = s + a[i] * b[i];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extent_requires_odd_spatial_size() {
        assert!(Extent::new(4, 5, 2).is_err());
        assert!(Extent::new(5, 5, 0).is_err());
        let e = Extent::new(5, 3, 2).unwrap();
        assert_eq!(e.x_coord(0), -2);
        assert_eq!(e.x_coord(2), 0);
        assert_eq!(e.y_coord(2), 1);
        assert!(Extent::canvas(512, 384, 2).is_ok());
    }

    #[test]
    fn from_fn_uses_centered_coordinates() {
        let e = Extent::new(3, 3, 2).unwrap();
        let v = Volume::<f64>::from_fn(e, |x, y, t| x + 10.0 * y + 100.0 * t);
        assert_eq!(v.at(0, 0, 0), Some(0.0));
        assert_eq!(v.at(-1, 1, 1), Some(109.0));
        assert_eq!(v.at(2, 0, 0), None);
    }

    #[test]
    fn stvl_round_trip() {
        let e = Extent::new(5, 3, 2).unwrap();
        let v = Volume::<f32>::from_fn(e, |x, y, t| (x * 0.3 + y - t).sin());
        let mut buf = Vec::new();
        v.write_stvl(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"STVL");
        assert_eq!(u32::from_le_bytes([buf[4], buf[5], buf[6], buf[7]]), 5);
        assert_eq!(buf.len(), 16 + 4 * 30);
        let back = Volume::<f32>::read_stvl(&buf[..]).unwrap();
        assert_eq!(back, v);
        assert!(Volume::<f32>::read_stvl(&buf[..20]).is_err());
    }

    #[test]
    fn dot_matches_naive_sum() {
        let e = Extent::new(7, 5, 3).unwrap();
        let a = Volume::<f64>::from_fn(e, |x, y, t| x * 0.1 + y * t);
        let b = Volume::<f64>::from_fn(e, |x, y, t| (x - y + t).cos());
        let naive: f64 = a.samples().iter().zip(b.samples()).map(|(p, q)| p * q).sum();
        assert!((a.dot(&b).unwrap() - naive).abs() < 1e-12);
    }
}
