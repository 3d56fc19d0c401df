//! Space-time fields evaluated analytically: level sets, velocities, sources.

use crate::geometry::{Mat3, Vec3};
use crate::scalar::Real;

pub trait ScalarField<T>: Sync {
    fn value(&self, x: Vec3<T>, t: T) -> T;
}

pub trait VectorField<T: Real>: Sync {
    fn value(&self, x: Vec3<T>, t: T) -> Vec3<T>;

    /// Spatial Jacobian `J[i][j] = d w_i / d x_j`. The default uses central
    /// differences with a step scaled to the type's precision.
    fn jacobian(&self, x: Vec3<T>, t: T) -> Mat3<T> {
        let step = T::epsilon().cbrt() * (T::one() + x.norm());
        let mut jac = [[T::zero(); 3]; 3];
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp.0[j] += step;
            xm.0[j] -= step;
            let d = (self.value(xp, t) - self.value(xm, t)) * (T::one() / (step + step));
            for (i, row) in jac.iter_mut().enumerate() {
                row[j] = d[i];
            }
        }
        jac
    }
}

/// Adapter turning a closure into a field.
#[derive(Clone, Copy)]
pub struct Analytic<F>(pub F);

impl<T, F> ScalarField<T> for Analytic<F>
where
    F: Fn(Vec3<T>, T) -> T + Sync,
{
    fn value(&self, x: Vec3<T>, t: T) -> T {
        (self.0)(x, t)
    }
}

impl<T: Real, F> VectorField<T> for Analytic<F>
where
    F: Fn(Vec3<T>, T) -> Vec3<T> + Sync,
{
    fn value(&self, x: Vec3<T>, t: T) -> Vec3<T> {
        (self.0)(x, t)
    }
}

/// Constant-in-space velocity with zero Jacobian.
#[derive(Debug, Clone, Copy)]
pub struct UniformVelocity<T>(pub Vec3<T>);

impl<T: Real> VectorField<T> for UniformVelocity<T> {
    fn value(&self, _x: Vec3<T>, _t: T) -> Vec3<T> {
        self.0
    }

    fn jacobian(&self, _x: Vec3<T>, _t: T) -> Mat3<T> {
        [[T::zero(); 3]; 3]
    }
}

/// Linear velocity `w(x, t) = A(t) x` with an analytic Jacobian.
pub struct LinearVelocity<F>(pub F);

impl<T: Real, F> VectorField<T> for LinearVelocity<F>
where
    F: Fn(T) -> Mat3<T> + Sync,
{
    fn value(&self, x: Vec3<T>, t: T) -> Vec3<T> {
        x.transform(&(self.0)(t))
    }

    fn jacobian(&self, _x: Vec3<T>, t: T) -> Mat3<T> {
        (self.0)(t)
    }
}

/// Exact surface solution extended off the surface (value and ambient gradient
/// of the extension), used for error norms.
pub trait ExactSolution<T>: Sync {
    fn value(&self, x: Vec3<T>, t: T) -> T;
    fn gradient(&self, x: Vec3<T>, t: T) -> Vec3<T>;
}

/// Surface divergence `tr((I - n n^T) J)` of a field with Jacobian `J`.
pub fn surface_divergence<T: Real>(jac: &Mat3<T>, n: &Vec3<T>) -> T {
    let trace = jac[0][0] + jac[1][1] + jac[2][2];
    trace - n.dot(&n.transform(jac))
}
