//! Axis-aligned rectangles and possibly half-open regions in the plane.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

/// Closed axis-aligned rectangle `[x0, x1] × [y0, y1]`. Degenerate sides are allowed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
            return invalid("rectangle coordinates must be finite");
        }
        if x0 > x1 || y0 > y1 {
            return invalid(format!("malformed rectangle [{x0},{x1}]x[{y0},{y1}]"));
        }
        Ok(Rect { x0, y0, x1, y1 })
    }

    /// Rectangle with positive width and height.
    pub fn nondegenerate(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let r = Self::new(x0, y0, x1, y1)?;
        if r.width() <= 0.0 || r.height() <= 0.0 {
            return invalid("rectangle must have positive width and height");
        }
        Ok(r)
    }

    pub fn unit_square() -> Self {
        Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        if !self.intersects(other) {
            return None;
        }
        Some(Rect {
            x0: self.x0.max(other.x0),
            y0: self.y0.max(other.y0),
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
        })
    }

    pub fn shrink(&self, d: f64) -> Option<Rect> {
        Rect::new(self.x0 + d, self.y0 + d, self.x1 - d, self.y1 - d).ok()
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }

    /// Parses `x0,y0,x1,y1`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| crate::Error::InvalidArgument(format!("bad window '{s}': {e}")))?;
        if parts.len() != 4 {
            return invalid(format!("window needs four numbers, got '{s}'"));
        }
        Self::nondegenerate(parts[0], parts[1], parts[2], parts[3])
    }
}

/// One-dimensional interval with independently open or closed ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_open: false, hi_open: false }
    }

    /// `(lo, hi]`
    pub fn open_closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_open: true, hi_open: false }
    }

    /// `[lo, hi)`
    pub fn closed_open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_open: false, hi_open: true }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_open: true, hi_open: true }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && (self.lo_open || self.hi_open))
    }

    pub fn contains(&self, t: f64) -> bool {
        let above = if self.lo_open { t > self.lo } else { t >= self.lo };
        let below = if self.hi_open { t < self.hi } else { t <= self.hi };
        above && below
    }

    /// Whether the closed interval `[a, b]` shares a point with `self`.
    pub fn meets_closed(&self, a: f64, b: f64) -> bool {
        if self.is_empty() || a > b {
            return false;
        }
        let left_ok = if self.hi_open { a < self.hi } else { a <= self.hi };
        let right_ok = if self.lo_open { b > self.lo } else { b >= self.lo };
        left_ok && right_ok
    }

    /// Whether `self ⊆ [a, b]`.
    pub fn within_closed(&self, a: f64, b: f64) -> bool {
        self.is_empty() || (self.lo >= a && self.hi <= b)
    }
}

/// Product of two intervals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub x: Interval,
    pub y: Interval,
}

impl Region {
    pub fn new(x: Interval, y: Interval) -> Self {
        Region { x, y }
    }

    pub fn closed(r: &Rect) -> Self {
        Region { x: Interval::closed(r.x0, r.x1), y: Interval::closed(r.y0, r.y1) }
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty() || self.y.is_empty()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.x.contains(p[0]) && self.y.contains(p[1])
    }

    pub fn meets_rect(&self, r: &Rect) -> bool {
        self.x.meets_closed(r.x0, r.x1) && self.y.meets_closed(r.y0, r.y1)
    }

    pub fn within_rect(&self, r: &Rect) -> bool {
        self.is_empty() || (self.x.within_closed(r.x0, r.x1) && self.y.within_closed(r.y0, r.y1))
    }

    /// Closure as a rectangle; `None` when empty.
    pub fn closure(&self) -> Option<Rect> {
        if self.is_empty() {
            return None;
        }
        Some(Rect { x0: self.x.lo, y0: self.y.lo, x1: self.x.hi, y1: self.y.hi })
    }

    /// Exchange the two coordinates.
    pub fn transpose(&self) -> Self {
        Region { x: self.y, y: self.x }
    }
}
