//! Piecewise-linear level-set fields and the discrete surface they define.
//!
//! The zero level of the P1 interpolant inside each tetrahedron is planar: a
//! triangle when one vertex is separated from the other three, a
//! quadrilateral (split into two triangles) for a 2-vs-2 sign pattern.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::geometry::Vec3;
use crate::mesh::BackgroundMesh;
use crate::scalar::Real;

/// Relative threshold (in units of `h`) below which nodal values are pushed
/// off zero.
pub const SIGN_CLEANUP: f64 = 1e-12;

/// Intersection point, its parent barycentric coordinates and the cut edge.
type EdgePoint<T> = (Vec3<T>, [T; 4], (usize, usize));

#[derive(Debug, Clone)]
pub struct LevelSetField<'m, T> {
    mesh: &'m BackgroundMesh<T>,
    values: Vec<T>,
    time: T,
}

impl<'m, T: Real> LevelSetField<'m, T> {
    /// Nodal interpolant of an analytic level set at time `t`.
    pub fn interpolate<F>(phi: &F, mesh: &'m BackgroundMesh<T>, t: T) -> Result<Self>
    where
        F: ScalarField<T> + ?Sized,
    {
        let values: Vec<T> = (0..mesh.num_vertices())
            .into_par_iter()
            .map(|v| phi.value(mesh.vertex(v), t))
            .collect();
        Self::from_values(mesh, values, t)
    }

    pub fn from_values(mesh: &'m BackgroundMesh<T>, mut values: Vec<T>, t: T) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_vertices(),
                got: values.len(),
            });
        }
        if let Some((vertex, value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteLevelSet {
                vertex,
                value: value.to_f64_lossy(),
            });
        }
        let eps = T::lit(SIGN_CLEANUP) * mesh.h();
        for v in values.iter_mut() {
            if v.abs() < eps {
                *v = eps;
            }
        }
        Ok(LevelSetField {
            mesh,
            values,
            time: t,
        })
    }

    pub fn mesh(&self) -> &'m BackgroundMesh<T> {
        self.mesh
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn time(&self) -> T {
        self.time
    }

    /// Constant gradient of the interpolant on `tet`.
    pub fn gradient(&self, tet: usize) -> Result<Vec3<T>> {
        let g = self.mesh.p1_basis_gradients(tet)?;
        let ids = self.mesh.tet(tet);
        Ok((0..4).fold(Vec3::zero(), |acc, i| acc + g[i] * self.values[ids[i]]))
    }

    fn cube_is_cut(&self, cube: usize) -> bool {
        let c = self.mesh.cube_corners(cube);
        let neg = c.iter().filter(|&&v| self.values[v] < T::zero()).count();
        neg != 0 && neg != 8
    }

    fn tet_is_cut(&self, tet: usize) -> bool {
        let ids = self.mesh.tet(tet);
        let neg = ids.iter().filter(|&&v| self.values[v] < T::zero()).count();
        neg != 0 && neg != 4
    }

    /// Cut tetrahedra `S(Gamma_h)` and the vertices of those tetrahedra.
    pub fn cut_strip(&self) -> Result<CutStrip> {
        let tets: Vec<usize> = (0..self.mesh.num_cubes())
            .into_par_iter()
            .filter(|&c| self.cube_is_cut(c))
            .flat_map_iter(|c| self.mesh.cube_tets(c).filter(|&t| self.tet_is_cut(t)))
            .collect();
        if tets.is_empty() {
            return Err(Error::EmptySurface);
        }
        let mut vertices: Vec<usize> = tets.iter().flat_map(|&t| self.mesh.tet(t)).collect();
        vertices.sort_unstable();
        vertices.dedup();
        Ok(CutStrip { tets, vertices })
    }

    /// Planar triangulation of the zero level set, ordered by parent tetrahedron.
    pub fn extract_surface(&self) -> SurfaceTriangulation<T> {
        let cells: Vec<(CutCell<T>, Vec<SurfaceTriangle<T>>)> = (0..self.mesh.num_cubes())
            .into_par_iter()
            .filter(|&c| self.cube_is_cut(c))
            .flat_map_iter(|c| {
                self.mesh
                    .cube_tets(c)
                    .filter_map(|t| self.cut_tet(t))
                    .collect::<Vec<_>>()
            })
            .collect();
        let mut out = SurfaceTriangulation {
            triangles: Vec::with_capacity(cells.len() * 2),
            cells: Vec::with_capacity(cells.len()),
            total_area: T::zero(),
        };
        for (mut cell, tris) in cells {
            cell.first_triangle = out.triangles.len();
            cell.num_triangles = tris.len();
            out.cells.push(cell);
            out.triangles.extend(tris);
        }
        out.total_area = out.triangles.iter().map(|t| t.area).sum();
        out
    }

    fn edge_point(
        &self,
        tet_ids: &[usize; 4],
        la: usize,
        lb: usize,
    ) -> (Vec3<T>, [T; 4], (usize, usize)) {
        // Canonical orientation (smaller global id first) makes the point
        // bit-identical in every tetrahedron sharing the edge.
        let (lp, lq) = if tet_ids[la] < tet_ids[lb] {
            (la, lb)
        } else {
            (lb, la)
        };
        let (p, q) = (tet_ids[lp], tet_ids[lq]);
        let (fp, fq) = (self.values[p], self.values[q]);
        let s = fp / (fp - fq);
        let vp = self.mesh.vertex(p);
        let vq = self.mesh.vertex(q);
        let mut bary = [T::zero(); 4];
        bary[lp] = T::one() - s;
        bary[lq] = s;
        (vp + (vq - vp) * s, bary, (p, q))
    }

    fn cut_tet(&self, tet: usize) -> Option<(CutCell<T>, Vec<SurfaceTriangle<T>>)> {
        let ids = self.mesh.tet(tet);
        let neg: Vec<usize> = (0..4)
            .filter(|&i| self.values[ids[i]] < T::zero())
            .collect();
        let pos: Vec<usize> = (0..4)
            .filter(|&i| self.values[ids[i]] >= T::zero())
            .collect();
        let edges: Vec<(usize, usize)> = match (neg.len(), pos.len()) {
            (1, 3) => pos.iter().map(|&o| (neg[0], o)).collect(),
            (3, 1) => neg.iter().map(|&o| (pos[0], o)).collect(),
            (2, 2) => vec![
                (neg[0], pos[0]),
                (neg[0], pos[1]),
                (neg[1], pos[1]),
                (neg[1], pos[0]),
            ],
            _ => return None,
        };
        let grads = self.mesh.p1_basis_gradients(tet).ok()?;
        let grad_phi = (0..4).fold(Vec3::zero(), |acc, i| acc + grads[i] * self.values[ids[i]]);
        let normal = grad_phi.normalized();

        let mut poly: Vec<EdgePoint<T>> = edges
            .iter()
            .map(|&(a, b)| self.edge_point(&ids, a, b))
            .collect();
        let poly_normal = if poly.len() == 3 {
            (poly[1].0 - poly[0].0).cross(&(poly[2].0 - poly[0].0))
        } else {
            (poly[2].0 - poly[0].0).cross(&(poly[3].0 - poly[1].0))
        };
        if poly_normal.dot(&grad_phi) < T::zero() {
            poly.reverse();
        }
        let local_tris: Vec<[usize; 3]> = if poly.len() == 3 {
            vec![[0, 1, 2]]
        } else if poly[0].0.distance(&poly[2].0) <= poly[1].0.distance(&poly[3].0) {
            vec![[0, 1, 2], [0, 2, 3]]
        } else {
            vec![[0, 1, 3], [1, 2, 3]]
        };
        let triangles = local_tris
            .iter()
            .map(|lt| {
                let points = lt.map(|i| poly[i].0);
                let area = (points[1] - points[0])
                    .cross(&(points[2] - points[0]))
                    .norm()
                    * T::lit(0.5);
                SurfaceTriangle {
                    points,
                    bary: lt.map(|i| poly[i].1),
                    edges: lt.map(|i| poly[i].2),
                    tet,
                    area,
                    normal,
                }
            })
            .collect();
        let mut polygon = [Vec3::zero(); 4];
        for (slot, p) in polygon.iter_mut().zip(&poly) {
            *slot = p.0;
        }
        let cell = CutCell {
            tet,
            polygon,
            polygon_len: poly.len(),
            normal,
            first_triangle: 0,
            num_triangles: 0,
        };
        Some((cell, triangles))
    }
}

/// Cut tetrahedra and their vertices (the active degrees of freedom).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutStrip {
    pub tets: Vec<usize>,
    pub vertices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SurfaceTriangle<T> {
    pub points: [Vec3<T>; 3],
    /// Barycentric coordinates of each point w.r.t. the parent tetrahedron.
    pub bary: [[T; 4]; 3],
    /// Background mesh edge `(smaller id, larger id)` each point lies on.
    pub edges: [(usize, usize); 3],
    pub tet: usize,
    pub area: T,
    /// Unit normal, parallel to the level-set gradient on the parent tet.
    pub normal: Vec3<T>,
}

/// The planar zero-level polygon inside one cut tetrahedron.
#[derive(Debug, Clone)]
pub struct CutCell<T> {
    pub tet: usize,
    pub polygon: [Vec3<T>; 4],
    pub polygon_len: usize,
    pub normal: Vec3<T>,
    pub first_triangle: usize,
    pub num_triangles: usize,
}

impl<T: Real> CutCell<T> {
    pub fn polygon(&self) -> &[Vec3<T>] {
        &self.polygon[..self.polygon_len]
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceTriangulation<T> {
    pub triangles: Vec<SurfaceTriangle<T>>,
    pub cells: Vec<CutCell<T>>,
    pub total_area: T,
}

impl<T: Real> SurfaceTriangulation<T> {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    /// Sorted, deduplicated parent tetrahedra.
    pub fn parent_tets(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c.tet).collect()
    }

    /// Number of triangle edges not shared by exactly two triangles. Zero for
    /// a closed surface strictly inside the box.
    pub fn watertight_defects(&self) -> usize {
        let mut keys: Vec<((usize, usize), (usize, usize))> = self
            .triangles
            .iter()
            .flat_map(|t| {
                (0..3).map(move |k| {
                    let a = t.edges[k];
                    let b = t.edges[(k + 1) % 3];
                    if a < b {
                        (a, b)
                    } else {
                        (b, a)
                    }
                })
            })
            .collect();
        keys.sort_unstable();
        let mut defects = 0;
        let mut i = 0;
        while i < keys.len() {
            let mut j = i;
            while j < keys.len() && keys[j] == keys[i] {
                j += 1;
            }
            if j - i != 2 {
                defects += 1;
            }
            i = j;
        }
        defects
    }

    /// Geometric watertightness: every triangle edge has exactly one partner
    /// edge whose endpoints coincide within `tol`.
    pub fn watertight_within(&self, tol: T) -> bool {
        let scale = T::one() / tol.max(T::min_positive_value());
        let quant = |p: &Vec3<T>| {
            p.0.map(|c| (c * scale).round().to_i64().unwrap_or(i64::MAX))
        };
        let mut keys: Vec<([i64; 3], [i64; 3])> = Vec::with_capacity(self.triangles.len() * 3);
        for t in &self.triangles {
            for k in 0..3 {
                let a = quant(&t.points[k]);
                let b = quant(&t.points[(k + 1) % 3]);
                keys.push(if a < b { (a, b) } else { (b, a) });
            }
        }
        keys.sort_unstable();
        let mut i = 0;
        while i < keys.len() {
            let mut j = i;
            while j < keys.len() && keys[j] == keys[i] {
                j += 1;
            }
            if j - i != 2 {
                return false;
            }
            i = j;
        }
        true
    }
}
