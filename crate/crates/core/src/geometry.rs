use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn distance_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn distance(self, other: Point) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

/// Rectangular service area with its origin at (0, 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Default for Area {
    fn default() -> Self {
        Area {
            width: 2000.0,
            height: 2000.0,
        }
    }
}

impl Area {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(Error::config(format!(
                "area must have positive finite sides, got {width} x {height}"
            )));
        }
        Ok(Area { width, height })
    }

    pub fn km2(&self) -> f64 {
        self.width * self.height / 1.0e6
    }

    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    /// Clamp a point onto the closed area; returns the point and whether it moved.
    #[inline]
    pub fn clip(&self, p: Point) -> (Point, bool) {
        let q = Point::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height));
        (q, q != p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_moves_only_outside_points() {
        let a = Area::default();
        assert_eq!(a.clip(Point::new(10.0, 20.0)), (Point::new(10.0, 20.0), false));
        assert_eq!(a.clip(Point::new(2500.0, -3.0)), (Point::new(2000.0, 0.0), true));
    }

    #[test]
    fn rejects_degenerate_area() {
        assert!(Area::new(0.0, 10.0).is_err());
        assert!(Area::new(10.0, f64::NAN).is_err());
        assert_eq!(Area::default().km2(), 4.0);
    }
}
