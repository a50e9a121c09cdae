//! Small fixed-size vector type and axis-aligned boxes used by the mesh and
//! cluster tree.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.0[1]
    }

    #[inline]
    pub fn z(&self) -> f64 {
        self.0[2]
    }

    #[inline]
    pub fn dot(&self, o: &Vec3) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    #[inline]
    pub fn cross(&self, o: &Vec3) -> Vec3 {
        Vec3([
            self.0[1] * o.0[2] - self.0[2] * o.0[1],
            self.0[2] * o.0[0] - self.0[0] * o.0[2],
            self.0[0] * o.0[1] - self.0[1] * o.0[0],
        ])
    }

    #[inline]
    pub fn norm_sqr(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Vec3 {
        *self * (1.0 / self.norm())
    }

    #[inline]
    pub fn distance(&self, o: &Vec3) -> f64 {
        (*self - *o).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        for i in 0..3 {
            self.0[i] += o.0[i];
        }
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        for i in 0..3 {
            self.0[i] -= o.0[i];
        }
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3([f64::INFINITY; 3]),
            max: Vec3([f64::NEG_INFINITY; 3]),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.insert(p);
        }
        b
    }

    pub fn insert(&mut self, p: &Vec3) {
        for i in 0..3 {
            self.min.0[i] = self.min.0[i].min(p.0[i]);
            self.max.0[i] = self.max.0[i].max(p.0[i]);
        }
    }

    pub fn merge(&mut self, o: &Aabb) {
        self.insert(&o.min);
        self.insert(&o.max);
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min.0[i] > self.max.0[i])
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn diameter(&self) -> f64 {
        self.extent().norm()
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Index of the longest side.
    pub fn longest_axis(&self) -> usize {
        let e = self.extent();
        let mut ax = 0;
        for i in 1..3 {
            if e.0[i] > e.0[ax] {
                ax = i;
            }
        }
        ax
    }

    /// Euclidean distance between the closest points of two boxes; zero when
    /// they overlap or touch.
    pub fn distance(&self, o: &Aabb) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let gap = (o.min.0[i] - self.max.0[i]).max(self.min.0[i] - o.max.0[i]);
            if gap > 0.0 {
                d2 += gap * gap;
            }
        }
        d2.sqrt()
    }

    pub fn contains(&self, p: &Vec3, slack: f64) -> bool {
        (0..3).all(|i| p.0[i] >= self.min.0[i] - slack && p.0[i] <= self.max.0[i] + slack)
    }
}
