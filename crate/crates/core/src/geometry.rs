//! Axis-aligned pixel boxes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("degenerate box [{xmin}, {ymin}, {xmax}, {ymax}]")]
pub struct DegenerateBox {
    pub xmin: u32,
    pub ymin: u32,
    pub xmax: u32,
    pub ymax: u32,
}

/// A box in page pixel coordinates, origin top-left. Always non-empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    xmin: u32,
    ymin: u32,
    xmax: u32,
    ymax: u32,
}

impl BBox {
    pub fn new(xmin: u32, ymin: u32, xmax: u32, ymax: u32) -> Result<Self, DegenerateBox> {
        if xmin < xmax && ymin < ymax {
            Ok(Self { xmin, ymin, xmax, ymax })
        } else {
            Err(DegenerateBox { xmin, ymin, xmax, ymax })
        }
    }

    pub fn xmin(&self) -> u32 {
        self.xmin
    }
    pub fn ymin(&self) -> u32 {
        self.ymin
    }
    pub fn xmax(&self) -> u32 {
        self.xmax
    }
    pub fn ymax(&self) -> u32 {
        self.ymax
    }

    pub fn width(&self) -> u32 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> u32 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (f64::from(self.xmin) + f64::from(self.xmax)) / 2.0,
            (f64::from(self.ymin) + f64::from(self.ymax)) / 2.0,
        )
    }

    /// Closed containment test for a point.
    pub fn contains_point(&self, (x, y): (f64, f64)) -> bool {
        x >= f64::from(self.xmin)
            && x <= f64::from(self.xmax)
            && y >= f64::from(self.ymin)
            && y <= f64::from(self.ymax)
    }

    pub fn intersection_area(&self, other: &BBox) -> u64 {
        let w = self.xmax.min(other.xmax).saturating_sub(self.xmin.max(other.xmin));
        let h = self.ymax.min(other.ymax).saturating_sub(self.ymin.max(other.ymin));
        u64::from(w) * u64::from(h)
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        inter as f64 / union as f64
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            xmin: self.xmin.min(other.xmin),
            ymin: self.ymin.min(other.ymin),
            xmax: self.xmax.max(other.xmax),
            ymax: self.ymax.max(other.ymax),
        }
    }

    pub fn translate(&self, dx: u32, dy: u32) -> BBox {
        BBox {
            xmin: self.xmin + dx,
            ymin: self.ymin + dy,
            xmax: self.xmax + dx,
            ymax: self.ymax + dy,
        }
    }

    /// Length of the overlap between `[xmin, xmax]` and `[lo, hi]`.
    pub fn horizontal_overlap(&self, lo: f64, hi: f64) -> f64 {
        (f64::from(self.xmax).min(hi) - f64::from(self.xmin).max(lo)).max(0.0)
    }

    pub fn center_distance(&self, other: &BBox) -> f64 {
        let (ax, ay) = self.center();
        let (bx, by) = other.center();
        (ax - bx).hypot(ay - by)
    }

    /// Shortest distance between the two boxes' edges; zero when they touch or overlap.
    pub fn edge_distance(&self, other: &BBox) -> f64 {
        let dx = f64::from(other.xmin.saturating_sub(self.xmax).max(self.xmin.saturating_sub(other.xmax)));
        let dy = f64::from(other.ymin.saturating_sub(self.ymax).max(self.ymin.saturating_sub(other.ymax)));
        dx.hypot(dy)
    }

    /// Clamp into `[0, width] x [0, height]`. `None` when nothing remains.
    pub fn clamp_to(&self, width: u32, height: u32) -> Option<BBox> {
        BBox::new(
            self.xmin.min(width),
            self.ymin.min(height),
            self.xmax.min(width),
            self.ymax.min(height),
        )
        .ok()
    }

    pub fn to_array(self) -> [u32; 4] {
        [self.xmin, self.ymin, self.xmax, self.ymax]
    }
}

impl TryFrom<[u32; 4]> for BBox {
    type Error = DegenerateBox;

    fn try_from([xmin, ymin, xmax, ymax]: [u32; 4]) -> Result<Self, Self::Error> {
        BBox::new(xmin, ymin, xmax, ymax)
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}
