//! Full-gradient trace finite element operators on a discrete surface.
//!
//! Unknowns are the nodal values of the bulk P1 space on the vertices of the
//! cut tetrahedra. All integrals run over the planar surface triangles with the
//! degree-5 rule, evaluating bulk basis functions through the barycentric
//! coordinates of the quadrature points inside the parent tetrahedron.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{surface_divergence, ExactSolution, ScalarField, VectorField};
use crate::geometry::Vec3;
use crate::level_set::SurfaceTriangulation;
use crate::mesh::BackgroundMesh;
use crate::quadrature::SurfaceQuadrature;
use crate::scalar::Real;
use crate::solver::{self, GmresOptions, SolveReport};
use crate::sparse::CsrMatrix;

/// Global vertex id <-> dense unknown index for the active vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    vertices: Vec<usize>,
}

impl DofMap {
    /// `vertices` must be sorted and unique.
    pub fn new(vertices: Vec<usize>) -> Self {
        debug_assert!(vertices.windows(2).all(|w| w[0] < w[1]));
        DofMap { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn index(&self, vertex: usize) -> Option<usize> {
        self.vertices.binary_search(&vertex).ok()
    }
}

/// Bilinear forms available on the surface.
#[derive(Clone, Copy)]
pub enum SurfaceOperator<'w, T: Real> {
    /// `int u v`.
    Mass,
    /// `int grad u . grad v` with full bulk gradients.
    Stiffness,
    /// `-int (w . grad v) u`, the integrated-by-parts transport term for
    /// tangential velocities.
    Convection(Option<&'w dyn VectorField<T>>),
    /// `int (w . grad u) v + (div_Gamma_h w) u v`, the transport term that
    /// stays consistent when `w` has a normal component.
    Advection(Option<&'w dyn VectorField<T>>),
}

struct QuadPoint<T> {
    x: Vec3<T>,
    lambda: [T; 4],
    weight: T,
}

struct TriangleData<T> {
    dofs: [usize; 4],
    verts: [usize; 4],
    grads: [Vec3<T>; 4],
    normal: Vec3<T>,
    area: T,
    points: Vec<QuadPoint<T>>,
}

/// Precomputed geometry of one discrete surface for repeated assembly.
pub struct TraceSpace<'m, T> {
    mesh: &'m BackgroundMesh<T>,
    dofs: DofMap,
    triangles: Vec<TriangleData<T>>,
}

impl<'m, T: Real> TraceSpace<'m, T> {
    /// Active vertices are those of the parent tetrahedra of `surf`.
    pub fn new(mesh: &'m BackgroundMesh<T>, surf: &SurfaceTriangulation<T>) -> Result<Self> {
        let mut verts: Vec<usize> = surf.cells.iter().flat_map(|c| mesh.tet(c.tet)).collect();
        verts.sort_unstable();
        verts.dedup();
        Self::with_dofs(mesh, surf, DofMap::new(verts))
    }

    pub fn with_dofs(
        mesh: &'m BackgroundMesh<T>,
        surf: &SurfaceTriangulation<T>,
        dofs: DofMap,
    ) -> Result<Self> {
        let quad = SurfaceQuadrature::<T>::degree5();
        let triangles = surf
            .triangles
            .par_iter()
            .map(|tri| {
                let verts = mesh.tet(tri.tet);
                let grads = mesh.p1_basis_gradients(tri.tet)?;
                let mut local = [0usize; 4];
                for (slot, &v) in local.iter_mut().zip(&verts) {
                    *slot = dofs.index(v).ok_or(Error::DimensionMismatch {
                        expected: dofs.len(),
                        got: v,
                    })?;
                }
                let points = quad
                    .points
                    .iter()
                    .zip(&quad.weights)
                    .map(|(b, &w)| {
                        let x = tri.points[0] * b[0] + tri.points[1] * b[1] + tri.points[2] * b[2];
                        let lambda = std::array::from_fn(|k| {
                            tri.bary[0][k] * b[0] + tri.bary[1][k] * b[1] + tri.bary[2][k] * b[2]
                        });
                        QuadPoint {
                            x,
                            lambda,
                            weight: w * tri.area,
                        }
                    })
                    .collect();
                Ok(TriangleData {
                    dofs: local,
                    verts,
                    grads,
                    normal: tri.normal,
                    area: tri.area,
                    points,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TraceSpace {
            mesh,
            dofs,
            triangles,
        })
    }

    pub fn mesh(&self) -> &'m BackgroundMesh<T> {
        self.mesh
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn area(&self) -> T {
        self.triangles.iter().map(|t| t.area).sum()
    }

    /// Sparse matrix of `op` over the active unknowns; `t` is the time at
    /// which velocities are evaluated.
    pub fn assemble(&self, op: SurfaceOperator<'_, T>, t: T) -> Result<CsrMatrix<T>> {
        self.assemble_combination(&[(T::one(), op)], t)
    }

    /// `sum_k c_k * op_k`, assembled in one pass.
    pub fn assemble_combination(
        &self,
        terms: &[(T, SurfaceOperator<'_, T>)],
        t: T,
    ) -> Result<CsrMatrix<T>> {
        for (_, op) in terms {
            if let SurfaceOperator::Convection(None) | SurfaceOperator::Advection(None) = op {
                return Err(Error::MissingVelocity);
            }
        }
        let triplets: Vec<(usize, usize, T)> = self
            .triangles
            .par_iter()
            .flat_map_iter(|tri| {
                let mut local = [[T::zero(); 4]; 4];
                for &(coef, op) in terms {
                    add_local(&mut local, tri, coef, op, t);
                }
                (0..16).map(move |k| (tri.dofs[k / 4], tri.dofs[k % 4], local[k / 4][k % 4]))
            })
            .collect();
        CsrMatrix::from_triplets(self.dofs.len(), triplets)
    }

    /// `rhs_i = int f v_i` for an analytic `f`.
    pub fn load<F: ScalarField<T> + ?Sized>(&self, f: &F, t: T) -> Vec<T> {
        self.load_with(|qp| f.value(qp.x, t))
    }

    /// `rhs_i = int u_h v_i` where `u_h` is the P1 function with the given
    /// value at each global vertex of the parent tetrahedra.
    pub fn load_nodal<F: Fn(usize) -> T + Sync>(&self, values: F) -> Vec<T> {
        let local: Vec<[T; 4]> = self
            .triangles
            .iter()
            .map(|tri| tri.verts.map(&values))
            .collect();
        self.load_indexed(|i, qp| (0..4).map(|k| qp.lambda[k] * local[i][k]).sum())
    }

    fn load_with<F: Fn(&QuadPoint<T>) -> T + Sync>(&self, f: F) -> Vec<T> {
        self.load_indexed(|_, qp| f(qp))
    }

    fn load_indexed<F: Fn(usize, &QuadPoint<T>) -> T + Sync>(&self, f: F) -> Vec<T> {
        let parts: Vec<[T; 4]> = self
            .triangles
            .par_iter()
            .enumerate()
            .map(|(i, tri)| {
                let mut acc = [T::zero(); 4];
                for qp in &tri.points {
                    let fv = f(i, qp) * qp.weight;
                    for k in 0..4 {
                        acc[k] += fv * qp.lambda[k];
                    }
                }
                acc
            })
            .collect();
        let mut rhs = vec![T::zero(); self.dofs.len()];
        for (tri, acc) in self.triangles.iter().zip(parts) {
            for k in 0..4 {
                rhs[tri.dofs[k]] += acc[k];
            }
        }
        rhs
    }

    /// `int u_h ds_h` for a coefficient vector over the active unknowns.
    pub fn integrate(&self, u: &[T]) -> T {
        self.triangles
            .iter()
            .map(|tri| {
                tri.points
                    .iter()
                    .map(|qp| qp.weight * (0..4).map(|k| qp.lambda[k] * u[tri.dofs[k]]).sum::<T>())
                    .sum::<T>()
            })
            .sum()
    }

    /// Squared `L2(Gamma_h)` error and squared tangential-gradient error of
    /// `u` against `exact` at time `t`.
    pub fn error_squared<E: ExactSolution<T> + ?Sized>(&self, u: &[T], exact: &E, t: T) -> (T, T) {
        self.triangles
            .par_iter()
            .map(|tri| {
                let grad_h =
                    (0..4).fold(Vec3::zero(), |acc, k| acc + tri.grads[k] * u[tri.dofs[k]]);
                let n = tri.normal;
                let mut l2 = T::zero();
                let mut h1 = T::zero();
                for qp in &tri.points {
                    let uh: T = (0..4).map(|k| qp.lambda[k] * u[tri.dofs[k]]).sum();
                    let e = exact.value(qp.x, t) - uh;
                    let g = exact.gradient(qp.x, t) - grad_h;
                    let gt = g - n * n.dot(&g);
                    l2 += qp.weight * e * e;
                    h1 += qp.weight * gt.norm_squared();
                }
                (l2, h1)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((T::zero(), T::zero()), |a, b| (a.0 + b.0, a.1 + b.1))
    }

    /// Value of the P1 function `u` at every surface triangle corner, in
    /// triangle order (used for visualization).
    pub fn corner_values(&self, surf: &SurfaceTriangulation<T>, u: &[T]) -> Vec<[T; 3]> {
        surf.triangles
            .iter()
            .zip(&self.triangles)
            .map(|(s, tri)| {
                std::array::from_fn(|c| (0..4).map(|k| s.bary[c][k] * u[tri.dofs[k]]).sum())
            })
            .collect()
    }

    /// Largest `|w|` over the active vertices at time `t`.
    pub fn max_speed<W: VectorField<T> + ?Sized>(&self, w: &W, t: T) -> T {
        self.dofs
            .vertices()
            .iter()
            .map(|&v| w.value(self.mesh.vertex(v), t).norm())
            .fold(T::zero(), T::max)
    }
}

fn add_local<T: Real>(
    local: &mut [[T; 4]; 4],
    tri: &TriangleData<T>,
    coef: T,
    op: SurfaceOperator<'_, T>,
    t: T,
) {
    match op {
        SurfaceOperator::Mass => {
            for qp in &tri.points {
                let w = coef * qp.weight;
                for i in 0..4 {
                    for j in 0..4 {
                        local[i][j] += w * qp.lambda[i] * qp.lambda[j];
                    }
                }
            }
        }
        SurfaceOperator::Stiffness => {
            let w = coef * tri.area;
            for i in 0..4 {
                for j in 0..4 {
                    local[i][j] += w * tri.grads[i].dot(&tri.grads[j]);
                }
            }
        }
        SurfaceOperator::Convection(Some(vel)) => {
            for qp in &tri.points {
                let wv = vel.value(qp.x, t);
                let w = coef * qp.weight;
                for i in 0..4 {
                    let wg = wv.dot(&tri.grads[i]);
                    for j in 0..4 {
                        local[i][j] -= w * wg * qp.lambda[j];
                    }
                }
            }
        }
        SurfaceOperator::Advection(Some(vel)) => {
            for qp in &tri.points {
                let wv = vel.value(qp.x, t);
                let div = surface_divergence(&vel.jacobian(qp.x, t), &tri.normal);
                let w = coef * qp.weight;
                for j in 0..4 {
                    let trial = wv.dot(&tri.grads[j]) + div * qp.lambda[j];
                    for i in 0..4 {
                        local[i][j] += w * trial * qp.lambda[i];
                    }
                }
            }
        }
        SurfaceOperator::Convection(None) | SurfaceOperator::Advection(None) => {}
    }
}

/// Steady trace-FEM solution over the active vertices.
#[derive(Debug, Clone)]
pub struct SteadySolution<T> {
    pub dofs: DofMap,
    pub values: Vec<T>,
    pub report: SolveReport<T>,
}

/// Parameters of `alpha u + w . grad u + (div_Gamma w) u - nu Laplace_Gamma u = f`
/// for a velocity tangential to the surface.
pub struct SteadyProblem<'a, T: Real> {
    pub alpha: T,
    pub nu: T,
    pub velocity: Option<&'a dyn VectorField<T>>,
    pub source: &'a dyn ScalarField<T>,
    pub time: T,
}

/// Solves `(alpha M + nu A + N) u = rhs` on the given surface.
pub fn solve_steady<T: Real>(
    problem: &SteadyProblem<'_, T>,
    surf: &SurfaceTriangulation<T>,
    mesh: &BackgroundMesh<T>,
    opts: &GmresOptions,
) -> Result<SteadySolution<T>> {
    if !(problem.alpha > T::zero()) {
        return Err(Error::Config(format!(
            "alpha must be positive, got {}",
            problem.alpha
        )));
    }
    if surf.is_empty() {
        return Err(Error::EmptySurface);
    }
    let space = TraceSpace::new(mesh, surf)?;
    let mut terms = vec![
        (problem.alpha, SurfaceOperator::Mass),
        (problem.nu, SurfaceOperator::Stiffness),
    ];
    if let Some(w) = problem.velocity {
        terms.push((T::one(), SurfaceOperator::Advection(Some(w))));
    }
    let a = space.assemble_combination(&terms, problem.time)?;
    let b = space.load(problem.source, problem.time);
    let report = solver::solve(&a, &b, opts)?;
    Ok(SteadySolution {
        dofs: space.dofs().clone(),
        values: report.x.clone(),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Analytic;
    use crate::level_set::LevelSetField;
    use crate::mesh::Aabb;

    fn sphere(h: f64) -> (BackgroundMesh<f64>, SurfaceTriangulation<f64>) {
        let mesh = BackgroundMesh::kuhn(Aabb::cube(-2.0, 2.0), h).unwrap();
        let surf = LevelSetField::interpolate(
            &Analytic(|x: Vec3<f64>, _t: f64| x.norm() - 1.0),
            &mesh,
            0.0,
        )
        .unwrap()
        .extract_surface();
        (mesh, surf)
    }

    #[test]
    fn mass_sums_to_area_and_stiffness_kills_constants() {
        let (mesh, surf) = sphere(0.5);
        let space = TraceSpace::new(&mesh, &surf).unwrap();
        let m = space.assemble(SurfaceOperator::Mass, 0.0).unwrap();
        let ones = vec![1.0; space.dofs().len()];
        let total: f64 = m.mul_vec(&ones).iter().sum();
        assert!((total - surf.total_area).abs() < 1e-12 * surf.total_area);
        let a = space.assemble(SurfaceOperator::Stiffness, 0.0).unwrap();
        assert!(a.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        assert!(m.asymmetry() < 1e-12 && a.asymmetry() < 1e-12);
        assert!(m.pattern_is_symmetric());
    }

    #[test]
    fn loads_of_constants_agree() {
        let (mesh, surf) = sphere(0.5);
        let space = TraceSpace::new(&mesh, &surf).unwrap();
        let f1 = space.load(&Analytic(|_x: Vec3<f64>, _t: f64| 1.0), 0.0);
        let f2 = space.load_nodal(|_| 1.0);
        assert!((f1.iter().sum::<f64>() - surf.total_area).abs() < 1e-12);
        for (a, b) in f1.iter().zip(&f2) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn convection_requires_velocity() {
        let (mesh, surf) = sphere(0.5);
        let space = TraceSpace::new(&mesh, &surf).unwrap();
        assert!(matches!(
            space.assemble(SurfaceOperator::Convection(None), 0.0),
            Err(Error::MissingVelocity)
        ));
        assert!(matches!(
            space.assemble(SurfaceOperator::Advection(None), 0.0),
            Err(Error::MissingVelocity)
        ));
    }

    #[test]
    fn constants_solve_exactly() {
        let (mesh, surf) = sphere(0.5);
        let c = 2.5;
        let src = Analytic(move |_x: Vec3<f64>, _t: f64| 3.0 * c);
        let problem = SteadyProblem {
            alpha: 3.0,
            nu: 1.0,
            velocity: None,
            source: &src,
            time: 0.0,
        };
        let sol = solve_steady(&problem, &surf, &mesh, &GmresOptions::default()).unwrap();
        assert!(
            sol.values.iter().all(|v| (v - c).abs() < 1e-5),
            "{:?}",
            &sol.values[..4]
        );
    }
}
