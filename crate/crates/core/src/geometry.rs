//! 3D box math used by association and feature extraction.
//!
//! Overlap is computed on the axis-aligned extents of each box: `length`
//! runs along x, `width` along y and `height` along z. `yaw` is carried for
//! downstream consumers but does not enter [`iou3d`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box extent `{axis}` must be positive and finite, got {value}")]
    BadExtent { axis: &'static str, value: f64 },
    #[error("box center must be finite, got {0:?}")]
    BadCenter([f64; 3]),
    #[error("box yaw must be finite and within [-pi, pi], got {0}")]
    BadYaw(f64),
}

/// An oriented 3D bounding box in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct Box3D {
    center: [f64; 3],
    size: [f64; 3],
    yaw: f64,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    center: [f64; 3],
    size: [f64; 3],
    yaw: f64,
}

impl TryFrom<RawBox> for Box3D {
    type Error = GeometryError;

    fn try_from(raw: RawBox) -> Result<Self, Self::Error> {
        Box3D::new(raw.center, raw.size, raw.yaw)
    }
}

impl From<Box3D> for RawBox {
    fn from(b: Box3D) -> Self {
        RawBox {
            center: b.center,
            size: b.size,
            yaw: b.yaw,
        }
    }
}

impl Box3D {
    /// `size` is `(length, width, height)`.
    pub fn new(center: [f64; 3], size: [f64; 3], yaw: f64) -> Result<Self, GeometryError> {
        if center.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::BadCenter(center));
        }
        for (axis, value) in ["length", "width", "height"].into_iter().zip(size) {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeometryError::BadExtent { axis, value });
            }
        }
        if !yaw.is_finite() || yaw.abs() > std::f64::consts::PI {
            return Err(GeometryError::BadYaw(yaw));
        }
        Ok(Box3D { center, size, yaw })
    }

    /// Axis-aligned box with zero yaw.
    pub fn axis_aligned(center: [f64; 3], size: [f64; 3]) -> Result<Self, GeometryError> {
        Self::new(center, size, 0.0)
    }

    pub fn center(&self) -> [f64; 3] {
        self.center
    }

    pub fn size(&self) -> [f64; 3] {
        self.size
    }

    pub fn length(&self) -> f64 {
        self.size[0]
    }

    pub fn width(&self) -> f64 {
        self.size[1]
    }

    pub fn height(&self) -> f64 {
        self.size[2]
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn volume(&self) -> f64 {
        volume(self)
    }

    /// Lower and upper corner along each axis.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for i in 0..3 {
            lo[i] = self.center[i] - 0.5 * self.size[i];
            hi[i] = self.center[i] + 0.5 * self.size[i];
        }
        (lo, hi)
    }

    pub fn translated(&self, offset: [f64; 3]) -> Result<Self, GeometryError> {
        let c = self.center;
        Self::new(
            [c[0] + offset[0], c[1] + offset[1], c[2] + offset[2]],
            self.size,
            self.yaw,
        )
    }

    /// Scales every extent by `factor` about the center.
    pub fn scaled(&self, factor: f64) -> Result<Self, GeometryError> {
        let s = self.size;
        Self::new(
            self.center,
            [s[0] * factor, s[1] * factor, s[2] * factor],
            self.yaw,
        )
    }
}

/// `length * width * height`.
pub fn volume(b: &Box3D) -> f64 {
    b.size[0] * b.size[1] * b.size[2]
}

/// Overlap of the two boxes' axis-aligned extents, in cubic meters.
pub fn intersection_volume(a: &Box3D, b: &Box3D) -> f64 {
    let mut inter = 1.0;
    for i in 0..3 {
        let lo = (a.center[i] - 0.5 * a.size[i]).max(b.center[i] - 0.5 * b.size[i]);
        let hi = (a.center[i] + 0.5 * a.size[i]).min(b.center[i] + 0.5 * b.size[i]);
        if hi <= lo {
            return 0.0;
        }
        inter *= hi - lo;
    }
    inter
}

/// Intersection over union of the axis-aligned extents (yaw ignored).
///
/// Symmetric in its arguments bit for bit, and always within `[0, 1]`.
pub fn iou3d(a: &Box3D, b: &Box3D) -> f64 {
    let inter = intersection_volume(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = volume(a) + volume(b) - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Euclidean distance between box centers.
pub fn center_distance(a: &Box3D, b: &Box3D) -> f64 {
    point_distance(a.center, b.center)
}

pub fn point_distance(p: [f64; 3], q: [f64; 3]) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    let dz = p[2] - q[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}
