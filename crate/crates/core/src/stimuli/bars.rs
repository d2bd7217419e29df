use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::volume::{Extent, Volume};

/// Canvas used for aperture stimuli, matching a 512x384 network input.
pub const APERTURE_CANVAS: (usize, usize) = (512, 384);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BarDirection {
    UpRight,
    DownLeft,
}

impl BarDirection {
    pub const ALL: [BarDirection; 2] = [BarDirection::UpRight, BarDirection::DownLeft];

    pub fn as_str(&self) -> &'static str {
        match self {
            BarDirection::UpRight => "up_right",
            BarDirection::DownLeft => "down_left",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "up_right" => Some(BarDirection::UpRight),
            "down_left" => Some(BarDirection::DownLeft),
            _ => None,
        }
    }

    /// Unit vector in image coordinates (y grows downward).
    pub fn unit(&self) -> (f64, f64) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            BarDirection::UpRight => (s, -s),
            BarDirection::DownLeft => (-s, s),
        }
    }

    /// Motion vector of the given magnitude along this direction.
    pub fn motion(&self, magnitude: f64) -> (f64, f64) {
        let (x, y) = self.unit();
        (x * magnitude, y * magnitude)
    }
}

/// Dense two-channel displacement field in full-resolution pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    /// Row-major `(u, v)` pairs.
    pub data: Vec<[f64; 2]>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![[0.0; 2]; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 2] {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: [f64; 2]) {
        self.data[y * self.width + x] = v;
    }
}

/// A two-frame moving bar and its ground truth.
#[derive(Debug, Clone)]
pub struct BarSequence<T> {
    /// Frames on a pixel-indexed canvas, `T = 2`.
    pub frames: Volume<T>,
    pub gt_flow: FlowField,
    /// Bar center in the first frame, pixel coordinates.
    pub center: (i64, i64),
    pub motion: (f64, f64),
    /// Integer displacement actually applied between the frames.
    pub shift: (i64, i64),
    pub scale: f64,
    pub width: f64,
}

impl<T> BarSequence<T> {
    /// Unit vector along the bar's long axis (the up-right diagonal).
    pub fn axis(&self) -> (f64, f64) {
        BarDirection::UpRight.unit()
    }

    /// End points of the bar axis in the first frame.
    pub fn end_points(&self) -> [(f64, f64); 2] {
        let (ax, ay) = self.axis();
        let h = self.scale / 2.0;
        let (cx, cy) = (self.center.0 as f64, self.center.1 as f64);
        [(cx + ax * h, cy + ay * h), (cx - ax * h, cy - ay * h)]
    }
}

/// Default bar width for a given length: `scale / 6`, at least 3 px.
pub fn default_bar_width(scale: f64) -> f64 {
    (scale / 6.0).round().max(3.0)
}

fn in_bar(px: f64, py: f64, cx: f64, cy: f64, scale: f64, width: f64) -> bool {
    let (ax, ay) = BarDirection::UpRight.unit();
    let (dx, dy) = (px - cx, py - cy);
    let along = dx * ax + dy * ay;
    let across = -dx * ay + dy * ax;
    along.abs() <= scale / 2.0 && across.abs() <= width / 2.0
}

/// A 45° bar of length `scale` translating by `u` between two frames.
///
/// The bar is placed so that the midpoint of its trajectory sits at the canvas
/// center. Frame two is frame one shifted by `round(u)`.
pub fn gen_bar_sequence<T: Scalar>(
    scale: f64,
    width: f64,
    u: (f64, f64),
    canvas: Extent,
) -> Result<BarSequence<T>> {
    if !(scale > 0.0) || !(width > 0.0) {
        return Err(Error::InvalidParameter("bar scale and width must be positive".into()));
    }
    let (w, h) = (canvas.width, canvas.height);
    if canvas.frames != 2 {
        return Err(Error::InvalidParameter("bar sequences have exactly two frames".into()));
    }
    let half_min = w.min(h) as f64 / 2.0;
    if (u.0 * u.0 + u.1 * u.1).sqrt() >= half_min {
        return Err(Error::InvalidParameter(format!(
            "motion magnitude must stay below {half_min} px"
        )));
    }
    let shift = (u.0.round() as i64, u.1.round() as i64);
    let center = (
        (w / 2) as i64 - shift.0.div_euclid(2),
        (h / 2) as i64 - shift.1.div_euclid(2),
    );

    // every rectangle corner of both frames must lie on the canvas
    let (ax, ay) = BarDirection::UpRight.unit();
    let (nx, ny) = (-ay, ax);
    for (ox, oy) in [(0, 0), shift] {
        for sa in [-1.0, 1.0] {
            for sn in [-1.0, 1.0] {
                let x = (center.0 + ox) as f64 + sa * ax * scale / 2.0 + sn * nx * width / 2.0;
                let y = (center.1 + oy) as f64 + sa * ay * scale / 2.0 + sn * ny * width / 2.0;
                if x < 0.0 || y < 0.0 || x > (w - 1) as f64 || y > (h - 1) as f64 {
                    return Err(Error::InvalidParameter(format!(
                        "bar of scale {scale} and width {width} exceeds the {w}x{h} frame"
                    )));
                }
            }
        }
    }

    let mut frames = Volume::zeros(canvas);
    let mut gt_flow = FlowField::zeros(w, h);
    let (cx, cy) = (center.0 as f64, center.1 as f64);
    for py in 0..h {
        for px in 0..w {
            let (fx, fy) = (px as f64, py as f64);
            let first = in_bar(fx, fy, cx, cy, scale, width);
            let second = in_bar(fx - shift.0 as f64, fy - shift.1 as f64, cx, cy, scale, width);
            if first {
                frames.set(px, py, 0, T::one());
            }
            if second {
                frames.set(px, py, 1, T::one());
            }
            if first || second {
                gt_flow.set(px, py, [u.0, u.1]);
            }
        }
    }
    Ok(BarSequence {
        frames,
        gt_flow,
        center,
        motion: u,
        shift,
        scale,
        width,
    })
}
