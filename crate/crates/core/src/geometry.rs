//! Small fixed-size 3D vector algebra.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<T>(pub [T; 3]);

/// Row-major 3x3 matrix; `m[i][j] = d(out_i)/d(in_j)` when used as a Jacobian.
pub type Mat3<T> = [[T; 3]; 3];

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3([x, y, z])
    }

    #[inline]
    pub fn zero() -> Self {
        Vec3([T::zero(); 3])
    }

    #[inline]
    pub fn x(&self) -> T {
        self.0[0]
    }

    #[inline]
    pub fn y(&self) -> T {
        self.0[1]
    }

    #[inline]
    pub fn z(&self) -> T {
        self.0[2]
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> T {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    #[inline]
    pub fn cross(&self, o: &Self) -> Self {
        Vec3([
            self.0[1] * o.0[2] - self.0[2] * o.0[1],
            self.0[2] * o.0[0] - self.0[0] * o.0[2],
            self.0[0] * o.0[1] - self.0[1] * o.0[0],
        ])
    }

    #[inline]
    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction; the zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            *self * (T::one() / n)
        } else {
            *self
        }
    }

    #[inline]
    pub fn distance(&self, o: &Self) -> T {
        (*self - *o).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// `m * self`.
    pub fn transform(&self, m: &Mat3<T>) -> Self {
        Vec3(std::array::from_fn(|i| {
            m[i][0] * self.0[0] + m[i][1] * self.0[1] + m[i][2] * self.0[2]
        }))
    }

    pub fn cast<U: Real>(&self) -> Vec3<U> {
        Vec3(self.0.map(|c| U::lit(c.to_f64_lossy())))
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

pub(crate) fn determinant<T: Real>(m: &Mat3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse of a 3x3 matrix, `None` when the determinant vanishes.
pub(crate) fn inverse<T: Real>(m: &Mat3<T>) -> Option<Mat3<T>> {
    let det = determinant(m);
    if det == T::zero() || !det.is_finite() {
        return None;
    }
    let inv = T::one() / det;
    let c = |a: usize, b: usize, c: usize, d: usize| m[a][b] * m[c][d];
    Some([
        [
            (c(1, 1, 2, 2) - c(1, 2, 2, 1)) * inv,
            (c(0, 2, 2, 1) - c(0, 1, 2, 2)) * inv,
            (c(0, 1, 1, 2) - c(0, 2, 1, 1)) * inv,
        ],
        [
            (c(1, 2, 2, 0) - c(1, 0, 2, 2)) * inv,
            (c(0, 0, 2, 2) - c(0, 2, 2, 0)) * inv,
            (c(0, 2, 1, 0) - c(0, 0, 1, 2)) * inv,
        ],
        [
            (c(1, 0, 2, 1) - c(1, 1, 2, 0)) * inv,
            (c(0, 1, 2, 0) - c(0, 0, 2, 1)) * inv,
            (c(0, 0, 1, 1) - c(0, 1, 1, 0)) * inv,
        ],
    ])
}

/// Barycentric coordinates of the orthogonal projection of `x` onto the
/// affine hull of `pts` (a segment or a triangle), together with the projected
/// point. Returns `None` for degenerate simplices.
pub(crate) fn project_onto_simplex<T: Real>(
    x: Vec3<T>,
    pts: &[Vec3<T>],
) -> Option<(Vec<T>, Vec3<T>)> {
    match pts.len() {
        2 => {
            let e = pts[1] - pts[0];
            let ee = e.norm_squared();
            if ee == T::zero() {
                return None;
            }
            let s = (x - pts[0]).dot(&e) / ee;
            Some((vec![T::one() - s, s], pts[0] + e * s))
        }
        3 => {
            let e1 = pts[1] - pts[0];
            let e2 = pts[2] - pts[0];
            let r = x - pts[0];
            let a11 = e1.dot(&e1);
            let a12 = e1.dot(&e2);
            let a22 = e2.dot(&e2);
            let det = a11 * a22 - a12 * a12;
            if det <= T::zero() {
                return None;
            }
            let b1 = r.dot(&e1);
            let b2 = r.dot(&e2);
            let s = (b1 * a22 - b2 * a12) / det;
            let t = (a11 * b2 - a12 * b1) / det;
            Some((vec![T::one() - s - t, s, t], pts[0] + e1 * s + e2 * t))
        }
        _ => None,
    }
}
