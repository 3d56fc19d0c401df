//! Benchmark problems on moving surfaces: geometry, velocity, data and,
//! where known, exact solutions.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::{
    Analytic, ExactSolution, LinearVelocity, ScalarField, UniformVelocity, VectorField,
};
use crate::geometry::{Mat3, Vec3};
use crate::integrator::{
    run_transient, StepView, TransientConfig, TransientProblem, TransientResult,
};
use crate::mesh::Aabb;

type Scalar = Box<dyn ScalarField<f64> + Send>;
type Vector = Box<dyn VectorField<f64> + Send>;
type Exact = Box<dyn ExactSolution<f64> + Send>;

/// Problem definition for one numbered experiment.
pub struct Experiment {
    pub id: u32,
    pub bounds: Aabb<f64>,
    pub final_time: f64,
    pub level_set: Scalar,
    pub velocity: Vector,
    pub source: Scalar,
    /// Initial datum, interpolated at the vertices of the first cut strip.
    pub initial: Scalar,
    pub exact: Option<Exact>,
    /// Conserved total mass when known.
    pub reference_mass: Option<f64>,
}

impl Experiment {
    pub fn new(id: u32) -> Result<Self> {
        match id {
            1 => Ok(translating_sphere()),
            2 => Ok(rotating_sphere()),
            3 => Ok(shrinking_sphere()),
            4 => Ok(deforming_surface()),
            5 => Ok(merging_balls()),
            _ => Err(Error::UnknownExperiment(id)),
        }
    }

    pub fn initial_value(&self, x: Vec3<f64>) -> f64 {
        self.initial.value(x, 0.0)
    }

    /// Number of steps of size `dt` reaching `final_time`; errors if `dt`
    /// does not divide it.
    pub fn steps_for(&self, dt: f64, final_time: f64) -> Result<usize> {
        let n = (final_time / dt).round();
        if !(dt > 0.0) || n < 0.0 || (n * dt - final_time).abs() > 1e-9 * final_time.max(1.0) {
            return Err(Error::Config(format!(
                "final time {final_time} is not an integer multiple of dt = {dt}"
            )));
        }
        Ok(n as usize)
    }

    /// Runs the experiment with the given discretization.
    pub fn run<O>(&self, config: &TransientConfig<f64>, observer: O) -> Result<TransientResult<f64>>
    where
        O: FnMut(&StepView<'_, '_, f64>) -> Result<()>,
    {
        let init = |x: Vec3<f64>| self.initial_value(x);
        let problem = TransientProblem {
            bounds: self.bounds,
            level_set: self.level_set.as_ref(),
            velocity: self.velocity.as_ref(),
            source: self.source.as_ref(),
            initial: &init,
            exact: self.exact.as_deref().map(|e| e as &dyn ExactSolution<f64>),
        };
        run_transient(&problem, config, observer)
    }
}

fn zero_source() -> Scalar {
    Box::new(Analytic(|_x: Vec3<f64>, _t: f64| 0.0))
}

/// Exact solution on a moving sphere, extended constantly along normals.
pub struct SphereSolution {
    pub center: fn(f64) -> Vec3<f64>,
    pub radius: fn(f64) -> f64,
    /// Solution formula and its ambient gradient, evaluated on the sphere.
    pub value: fn(Vec3<f64>, f64) -> f64,
    pub gradient: fn(Vec3<f64>, f64) -> Vec3<f64>,
}

impl SphereSolution {
    fn closest_point(&self, x: Vec3<f64>, t: f64) -> (Vec3<f64>, Vec3<f64>, f64) {
        let c = (self.center)(t);
        let d = x - c;
        let r = d.norm();
        let n = if r > 0.0 {
            d * (1.0 / r)
        } else {
            Vec3::new(1.0, 0.0, 0.0)
        };
        (c + n * (self.radius)(t), n, r)
    }
}

impl ExactSolution<f64> for SphereSolution {
    fn value(&self, x: Vec3<f64>, t: f64) -> f64 {
        let (p, _, _) = self.closest_point(x, t);
        (self.value)(p, t)
    }

    fn gradient(&self, x: Vec3<f64>, t: f64) -> Vec3<f64> {
        let (p, n, r) = self.closest_point(x, t);
        if r == 0.0 {
            return Vec3::zero();
        }
        let g = (self.gradient)(p, t);
        (g - n * n.dot(&g)) * ((self.radius)(t) / r)
    }
}

fn translating_sphere() -> Experiment {
    let center = |t: f64| Vec3::new(0.2 * t, 0.0, 0.0);
    Experiment {
        id: 1,
        bounds: Aabb::cube(-2.0, 2.0),
        final_time: 1.0,
        level_set: Box::new(Analytic(move |x: Vec3<f64>, t: f64| {
            (x - center(t)).norm() - 1.0
        })),
        velocity: Box::new(UniformVelocity(Vec3::new(0.2, 0.0, 0.0))),
        source: zero_source(),
        initial: Box::new(Analytic(|x: Vec3<f64>, _t: f64| {
            1.0 + x.x() + x.y() + x.z()
        })),
        exact: Some(Box::new(SphereSolution {
            center,
            radius: |_| 1.0,
            value: |x, t| 1.0 + (x.x() + x.y() + x.z() - 0.2 * t) * (-2.0 * t).exp(),
            gradient: |_x, t| Vec3::new(1.0, 1.0, 1.0) * (-2.0 * t).exp(),
        })),
        reference_mass: None,
    }
}

fn rotation(t: f64) -> (f64, f64) {
    let a = 2.0 * PI * t;
    (a.cos(), a.sin())
}

fn rotating_sphere() -> Experiment {
    let center = |t: f64| {
        let (c, s) = rotation(t);
        Vec3::new(0.5 * c, 0.5 * s, 0.0)
    };
    Experiment {
        id: 2,
        bounds: Aabb::cube(-2.0, 2.0),
        final_time: 1.0,
        level_set: Box::new(Analytic(move |x: Vec3<f64>, t: f64| {
            (x - center(t)).norm() - 1.0
        })),
        velocity: Box::new(LinearVelocity(|_t: f64| -> Mat3<f64> {
            [[0.0, -2.0 * PI, 0.0], [2.0 * PI, 0.0, 0.0], [0.0, 0.0, 0.0]]
        })),
        source: zero_source(),
        initial: Box::new(Analytic(|x: Vec3<f64>, _t: f64| {
            1.0 + (x.x() - 0.5) + x.y() + x.z()
        })),
        exact: Some(Box::new(SphereSolution {
            center,
            radius: |_| 1.0,
            value: |x, t| {
                let (c, s) = rotation(t);
                1.0 + (x.x() * (c - s) + x.y() * (c + s) + x.z() - 0.5) * (-2.0 * t).exp()
            },
            gradient: |_x, t| {
                let (c, s) = rotation(t);
                Vec3::new(c - s, c + s, 1.0) * (-2.0 * t).exp()
            },
        })),
        reference_mass: None,
    }
}

/// Radial velocity `-(1/2) e^{-t/2} x/|x|` with its exact Jacobian.
struct ShrinkingVelocity;

impl VectorField<f64> for ShrinkingVelocity {
    fn value(&self, x: Vec3<f64>, t: f64) -> Vec3<f64> {
        let r = x.norm();
        if r == 0.0 {
            return Vec3::zero();
        }
        x * (-0.5 * (-0.5 * t).exp() / r)
    }

    fn jacobian(&self, x: Vec3<f64>, t: f64) -> Mat3<f64> {
        let r = x.norm();
        if r == 0.0 {
            return [[0.0; 3]; 3];
        }
        let n = x * (1.0 / r);
        let s = -0.5 * (-0.5 * t).exp() / r;
        std::array::from_fn(|i| {
            std::array::from_fn(|j| s * (f64::from(u8::from(i == j)) - n[i] * n[j]))
        })
    }
}

fn shrinking_sphere() -> Experiment {
    Experiment {
        id: 3,
        bounds: Aabb::cube(-2.0, 2.0),
        final_time: 1.0,
        level_set: Box::new(Analytic(|x: Vec3<f64>, t: f64| x.norm() - (-0.5 * t).exp())),
        velocity: Box::new(ShrinkingVelocity),
        source: Box::new(Analytic(|x: Vec3<f64>, t: f64| {
            (-1.5 * t.exp() + 12.0 * (2.0 * t).exp()) * x.x() * x.y() * x.z()
        })),
        initial: Box::new(Analytic(|x: Vec3<f64>, _t: f64| {
            1.0 + x.x() * x.y() * x.z()
        })),
        exact: Some(Box::new(SphereSolution {
            center: |_| Vec3::zero(),
            radius: |t| (-0.5 * t).exp(),
            value: |x, t| (1.0 + x.x() * x.y() * x.z()) * t.exp(),
            gradient: |x, t| Vec3::new(x.y() * x.z(), x.x() * x.z(), x.x() * x.y()) * t.exp(),
        })),
        reference_mass: None,
    }
}

/// Diagonal of the backward characteristic map `x -> X0(x, t)`.
pub fn deforming_backward_scale(t: f64) -> [f64; 3] {
    [
        (-0.1 * t.sin()).exp(),
        (-0.2 * (1.0 - t.cos())).exp(),
        (-0.2 * t.sin()).exp(),
    ]
}

pub fn deforming_initial_level_set(y: Vec3<f64>) -> f64 {
    let a = y.x() - y.z() * y.z();
    a * a + y.y() * y.y() + y.z() * y.z() - 1.0
}

fn deforming_surface() -> Experiment {
    Experiment {
        id: 4,
        bounds: Aabb::cube(-2.0, 2.0),
        final_time: 6.0,
        level_set: Box::new(Analytic(|x: Vec3<f64>, t: f64| {
            let s = deforming_backward_scale(t);
            deforming_initial_level_set(Vec3::new(x.x() * s[0], x.y() * s[1], x.z() * s[2]))
        })),
        velocity: Box::new(LinearVelocity(|t: f64| -> Mat3<f64> {
            [
                [0.1 * t.cos(), 0.0, 0.0],
                [0.0, 0.2 * t.sin(), 0.0],
                [0.0, 0.0, 0.2 * t.cos()],
            ]
        })),
        source: zero_source(),
        initial: Box::new(Analytic(|x: Vec3<f64>, _t: f64| {
            1.0 + x.x() * x.y() * x.z()
        })),
        exact: None,
        reference_mass: Some(13.6083),
    }
}

/// Smallest center distance used in the merging-balls level set, keeping it
/// finite at grid points that coincide with a center.
const MIN_CENTER_DISTANCE: f64 = 1e-8;

pub fn merging_centers(t: f64) -> (Vec3<f64>, Vec3<f64>) {
    let c = Vec3::new(1.5 * (t - 1.0), 0.0, 0.0);
    (c, -c)
}

fn merging_parts(x: Vec3<f64>, t: f64) -> [(Vec3<f64>, f64, Vec3<f64>); 2] {
    let (cp, cm) = merging_centers(t);
    let rate = Vec3::new(1.5, 0.0, 0.0);
    [(cp, 1.0, rate), (cm, -1.0, rate)].map(|(c, sign, v)| {
        let d = x - c;
        let r = d.norm().max(MIN_CENTER_DISTANCE);
        (d, r, v * sign)
    })
}

pub fn merging_level_set(x: Vec3<f64>, t: f64) -> f64 {
    1.0 - merging_parts(x, t)
        .iter()
        .map(|(_, r, _)| r.powi(-3))
        .sum::<f64>()
}

/// Normal velocity `-(d_t phi / |grad phi|^2) grad phi` of the merging balls.
pub fn merging_velocity(x: Vec3<f64>, t: f64) -> Vec3<f64> {
    let mut grad = Vec3::zero();
    let mut dt = 0.0;
    for (d, r, cdot) in merging_parts(x, t) {
        let k = 3.0 * r.powi(-5);
        grad += d * k;
        dt -= k * d.dot(&cdot);
    }
    let g2 = grad.norm_squared();
    if !(g2 > f64::MIN_POSITIVE) || !g2.is_finite() {
        return Vec3::zero();
    }
    grad * (-dt / g2)
}

fn merging_balls() -> Experiment {
    Experiment {
        id: 5,
        bounds: Aabb::new(Vec3::new(-3.0, -2.0, -2.0), Vec3::new(3.0, 2.0, 2.0)),
        final_time: 1.0,
        level_set: Box::new(Analytic(merging_level_set)),
        velocity: Box::new(Analytic(merging_velocity)),
        source: zero_source(),
        initial: Box::new(Analytic(
            |x: Vec3<f64>, _t: f64| if x.x() >= 0.0 { 3.0 - x.x() } else { 0.0 },
        )),
        exact: None,
        reference_mass: None,
    }
}
