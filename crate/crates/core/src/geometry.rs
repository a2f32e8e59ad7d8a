//! Planar vectors, rectangles and axis-aligned segments.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Unit vector in the same direction, or zero when the norm is below `eps`.
    #[inline]
    pub fn normalized_or_zero(self, eps: f64) -> Vec2 {
        let n = self.norm();
        if n > eps {
            self / n
        } else {
            Vec2::ZERO
        }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangle given by its lower-left and upper-right corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Rect { min, max }
    }

    pub fn from_center(center: Vec2, half: Vec2) -> Self {
        Rect::new(center - half, center + half)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.width() + self.height())
    }

    /// Closed containment.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_strict(&self, p: Vec2) -> bool {
        p.x > self.min.x && p.x < self.max.x && p.y > self.min.y && p.y < self.max.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    /// True when the interiors overlap.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min.x < other.max.x && other.min.x < self.max.x && self.min.y < other.max.y && other.min.y < self.max.y
    }

    /// Euclidean distance from `p` to the rectangle (0 inside).
    pub fn distance(&self, p: Vec2) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        (dx * dx + dy * dy).sqrt()
    }

    /// Distance from `p` to the rectangle boundary together with the outward
    /// direction: the nearest-face normal for points inside or on the boundary,
    /// the unit vector from the nearest boundary point for points outside.
    pub fn boundary_distance_and_normal(&self, p: Vec2) -> (f64, Vec2) {
        if self.contains(p) {
            let (_, n, _) = self.nearest_face(p);
            (0.0, n)
        } else {
            let q = Vec2::new(p.x.clamp(self.min.x, self.max.x), p.y.clamp(self.min.y, self.max.y));
            let d = p - q;
            let len = d.norm();
            (len, d / len)
        }
    }

    /// Nearest face for a point inside: (distance to face, outward normal, projected point).
    pub fn nearest_face(&self, p: Vec2) -> (f64, Vec2, Vec2) {
        let candidates = [
            (p.x - self.min.x, Vec2::new(-1.0, 0.0), Vec2::new(self.min.x, p.y)),
            (self.max.x - p.x, Vec2::new(1.0, 0.0), Vec2::new(self.max.x, p.y)),
            (p.y - self.min.y, Vec2::new(0.0, -1.0), Vec2::new(p.x, self.min.y)),
            (self.max.y - p.y, Vec2::new(0.0, 1.0), Vec2::new(p.x, self.max.y)),
        ];
        let mut best = candidates[0];
        for c in &candidates[1..] {
            if c.0 < best.0 {
                best = *c;
            }
        }
        best
    }

    /// True when the open segment `a`-`b` passes through the interior of the
    /// rectangle shrunk by `tol` (Liang-Barsky clipping).
    pub fn segment_crosses_interior(&self, a: Vec2, b: Vec2, tol: f64) -> bool {
        let min = self.min + Vec2::new(tol, tol);
        let max = self.max - Vec2::new(tol, tol);
        if min.x >= max.x || min.y >= max.y {
            return false;
        }
        let d = b - a;
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        let checks = [
            (-d.x, a.x - min.x),
            (d.x, max.x - a.x),
            (-d.y, a.y - min.y),
            (d.y, max.y - a.y),
        ];
        for (p, q) in checks {
            if p == 0.0 {
                if q <= 0.0 {
                    return false;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    if r > t1 {
                        return false;
                    }
                    t0 = t0.max(r);
                } else {
                    if r < t0 {
                        return false;
                    }
                    t1 = t1.min(r);
                }
            }
        }
        t0 < t1
    }
}

/// Side of the rectangular domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    /// Outward unit normal of the domain side.
    pub fn outward_normal(self) -> Vec2 {
        match self {
            Side::Left => Vec2::new(-1.0, 0.0),
            Side::Right => Vec2::new(1.0, 0.0),
            Side::Bottom => Vec2::new(0.0, -1.0),
            Side::Top => Vec2::new(0.0, 1.0),
        }
    }
}

/// Axis-aligned wall segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: Vec2,
    pub to: Vec2,
}

impl Segment {
    pub fn new(from: Vec2, to: Vec2) -> Self {
        Segment { from, to }
    }

    pub fn length(&self) -> f64 {
        (self.to - self.from).norm()
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.from.x == self.to.x || self.from.y == self.to.y
    }

    pub fn is_horizontal(&self) -> bool {
        self.from.y == self.to.y
    }

    /// `n + 1` equally spaced points with `n = ceil(length / spacing)`.
    pub fn sample(&self, spacing: f64) -> Vec<Vec2> {
        let len = self.length();
        let n = ((len / spacing).ceil() as usize).max(1);
        (0..=n)
            .map(|k| self.from + (self.to - self.from) * (k as f64 / n as f64))
            .collect()
    }
}
