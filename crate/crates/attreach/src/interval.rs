//! Minimal interval arithmetic for the tube-bounding step of reach-set
//! propagation. Outward correctness here relies on the usual argument that
//! f64 arithmetic errors are orders of magnitude below the inflation
//! margins applied by the caller; no directed rounding is performed.

use crate::so3::Vec3;
use std::ops::{Add, Mul, Neg, Sub};

/// Closed interval [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval bounds out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn centered(mid: f64, half_width: f64) -> Self {
        assert!(half_width >= 0.0);
        Interval {
            lo: mid - half_width,
            hi: mid + half_width,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn inflate(&self, margin: f64) -> Interval {
        assert!(margin >= 0.0);
        Interval {
            lo: self.lo - margin,
            hi: self.hi + margin,
        }
    }

    /// Largest absolute value attained on the interval.
    pub fn abs_max(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn scale(&self, k: f64) -> Interval {
        if k >= 0.0 {
            Interval {
                lo: k * self.lo,
                hi: k * self.hi,
            }
        } else {
            Interval {
                lo: k * self.hi,
                hi: k * self.lo,
            }
        }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval {
            lo: self.lo + rhs.lo,
            hi: self.hi + rhs.hi,
        }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval {
            lo: self.lo - rhs.hi,
            hi: self.hi - rhs.lo,
        }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let c = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        Interval {
            lo: c.iter().cloned().fold(f64::INFINITY, f64::min),
            hi: c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Componentwise interval vector in R3 (an axis-aligned box).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalVec3 {
    pub x: Interval,
    pub y: Interval,
    pub z: Interval,
}

impl IntervalVec3 {
    pub fn new(x: Interval, y: Interval, z: Interval) -> Self {
        IntervalVec3 { x, y, z }
    }

    pub fn point(v: &Vec3) -> Self {
        IntervalVec3 {
            x: Interval::point(v.x),
            y: Interval::point(v.y),
            z: Interval::point(v.z),
        }
    }

    pub fn centered(mid: &Vec3, half_widths: &Vec3) -> Self {
        IntervalVec3 {
            x: Interval::centered(mid.x, half_widths.x),
            y: Interval::centered(mid.y, half_widths.y),
            z: Interval::centered(mid.z, half_widths.z),
        }
    }

    pub fn component(&self, k: usize) -> Interval {
        match k {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("component index {k} out of range"),
        }
    }

    pub fn contains(&self, v: &Vec3) -> bool {
        self.x.contains(v.x) && self.y.contains(v.y) && self.z.contains(v.z)
    }

    pub fn contains_box(&self, other: &IntervalVec3) -> bool {
        self.x.contains_interval(&other.x)
            && self.y.contains_interval(&other.y)
            && self.z.contains_interval(&other.z)
    }

    pub fn hull(&self, other: &IntervalVec3) -> IntervalVec3 {
        IntervalVec3 {
            x: self.x.hull(&other.x),
            y: self.y.hull(&other.y),
            z: self.z.hull(&other.z),
        }
    }

    pub fn hull_point(&self, v: &Vec3) -> IntervalVec3 {
        self.hull(&IntervalVec3::point(v))
    }

    pub fn inflate(&self, margin: f64) -> IntervalVec3 {
        IntervalVec3 {
            x: self.x.inflate(margin),
            y: self.y.inflate(margin),
            z: self.z.inflate(margin),
        }
    }

    pub fn midpoint(&self) -> Vec3 {
        Vec3::new(self.x.midpoint(), self.y.midpoint(), self.z.midpoint())
    }

    pub fn max_width(&self) -> f64 {
        self.x.width().max(self.y.width()).max(self.z.width())
    }

    /// The 8 corner points.
    pub fn corners(&self) -> [Vec3; 8] {
        let xs = [self.x.lo, self.x.hi];
        let ys = [self.y.lo, self.y.hi];
        let zs = [self.z.lo, self.z.hi];
        let mut out = [Vec3::zeros(); 8];
        let mut k = 0;
        for &x in &xs {
            for &y in &ys {
                for &z in &zs {
                    out[k] = Vec3::new(x, y, z);
                    k += 1;
                }
            }
        }
        out
    }

    pub fn cross(&self, rhs: &IntervalVec3) -> IntervalVec3 {
        IntervalVec3 {
            x: self.y * rhs.z - self.z * rhs.y,
            y: self.z * rhs.x - self.x * rhs.z,
            z: self.x * rhs.y - self.y * rhs.x,
        }
    }

    /// Interval image of a fixed matrix acting on the box.
    pub fn matrix_image(&self, m: &crate::so3::Mat3) -> IntervalVec3 {
        let row = |i: usize| {
            self.x.scale(m[(i, 0)]) + self.y.scale(m[(i, 1)]) + self.z.scale(m[(i, 2)])
        };
        IntervalVec3 {
            x: row(0),
            y: row(1),
            z: row(2),
        }
    }
}

impl Add for IntervalVec3 {
    type Output = IntervalVec3;
    fn add(self, rhs: IntervalVec3) -> IntervalVec3 {
        IntervalVec3 {
            x: self.x + rhs.x,
            y: self.y + rhs.y,
            z: self.z + rhs.z,
        }
    }
}

impl Neg for IntervalVec3 {
    type Output = IntervalVec3;
    fn neg(self) -> IntervalVec3 {
        IntervalVec3 {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}
