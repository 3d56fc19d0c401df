//! Fast marching extension of surface finite element functions into a band
//! of tetrahedra around the discrete surface.
//!
//! Distances are unsigned and built geometrically: exact point-to-polygon
//! distances on the cut strip, then greedy propagation through projections
//! onto the finished faces and edges of each tetrahedron.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use std::io::Write;

use crate::assembly::DofMap;
use crate::error::{Error, Result};
use crate::geometry::{project_onto_simplex, Vec3};
use crate::level_set::SurfaceTriangulation;
use crate::mesh::BackgroundMesh;
use crate::scalar::{Ordered, Real};

/// Slack on barycentric coordinates when testing whether a projection lies
/// inside a simplex.
pub const INCLUSION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexStatus {
    Finished,
    Active,
    Unknown,
}

impl VertexStatus {
    fn label(self) -> &'static str {
        match self {
            VertexStatus::Finished => "finished",
            VertexStatus::Active => "active",
            VertexStatus::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Node<T> {
    status: VertexStatus,
    d: T,
    u: T,
}

/// Finished/active bookkeeping of one marching run. Vertices never touched are
/// implicitly unknown.
pub struct NarrowBandState<'m, T: Real> {
    mesh: &'m BackgroundMesh<T>,
    nodes: Vec<Node<T>>,
    touched: Vec<usize>,
    heap: BinaryHeap<Reverse<(Ordered<T>, usize)>>,
    active: usize,
    stop_radius: T,
    surface_vertices: Vec<usize>,
    order: Vec<usize>,
    last_finalized: T,
}

/// Distances and extended values on every finished vertex, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedField<T> {
    pub vertices: Vec<usize>,
    pub distance: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> ExtendedField<T> {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    fn position(&self, v: usize) -> Option<usize> {
        self.vertices.binary_search(&v).ok()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.position(v).is_some()
    }

    pub fn value(&self, v: usize) -> Option<T> {
        self.position(v).map(|k| self.values[k])
    }

    pub fn distance(&self, v: usize) -> Option<T> {
        self.position(v).map(|k| self.distance[k])
    }

    /// Cut tetrahedra plus every tetrahedron with a vertex closer than
    /// `width`, sorted.
    pub fn band_tets(
        &self,
        mesh: &BackgroundMesh<T>,
        surf: &SurfaceTriangulation<T>,
        width: T,
    ) -> Vec<usize> {
        let mut tets: Vec<usize> = surf.cells.iter().map(|c| c.tet).collect();
        for (&v, &d) in self.vertices.iter().zip(&self.distance) {
            if d < width {
                tets.extend(mesh.vertex_tets(v).iter().copied());
            }
        }
        tets.sort_unstable();
        tets.dedup();
        tets
    }
}

/// Vertices of a tetrahedron set, sorted.
pub fn tet_vertices<T: Real>(mesh: &BackgroundMesh<T>, tets: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = tets.iter().flat_map(|&t| mesh.tet(t)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn inside<T: Real>(bary: &[T]) -> bool {
    let tol = T::lit(INCLUSION_TOL);
    bary.iter().all(|&b| b >= -tol && b <= T::one() + tol)
}

/// Convex weights from barycentric coordinates that passed `inside`.
fn clamp_weights<T: Real>(bary: &[T]) -> Vec<T> {
    let w: Vec<T> = bary.iter().map(|&b| b.max(T::zero())).collect();
    let s: T = w.iter().copied().sum();
    w.into_iter().map(|b| b / s).collect()
}

/// Initialization: finished set is the cut-strip vertex set with the given
/// values and geometric distances to the surface polygons.
pub fn init_band<'m, T: Real>(
    mesh: &'m BackgroundMesh<T>,
    surf: &SurfaceTriangulation<T>,
    dofs: &DofMap,
    u_active: &[T],
    stop_radius: T,
) -> Result<NarrowBandState<'m, T>> {
    if surf.is_empty() {
        return Err(Error::EmptySurface);
    }
    if u_active.len() != dofs.len() {
        return Err(Error::DimensionMismatch {
            expected: dofs.len(),
            got: u_active.len(),
        });
    }
    let mut dist: HashMap<usize, T> = HashMap::with_capacity(dofs.len());
    for cell in &surf.cells {
        let tris = &surf.triangles[cell.first_triangle..cell.first_triangle + cell.num_triangles];
        for v in mesh.tet(cell.tet) {
            let x = mesh.vertex(v);
            let projected = tris.iter().find_map(|tri| {
                project_onto_simplex(x, &tri.points)
                    .filter(|(b, _)| inside(b))
                    .map(|(_, p)| x.distance(&p))
            });
            let d = projected.unwrap_or_else(|| {
                cell.polygon()
                    .iter()
                    .map(|y| x.distance(y))
                    .fold(T::infinity(), T::min)
            });
            let e = dist.entry(v).or_insert(d);
            *e = e.min(d);
        }
    }
    let mut nodes = vec![
        Node {
            status: VertexStatus::Unknown,
            d: T::zero(),
            u: T::zero(),
        };
        mesh.num_vertices()
    ];
    for (&v, &u) in dofs.vertices().iter().zip(u_active) {
        let d = *dist.get(&v).ok_or(Error::InvalidMesh(format!(
            "vertex {v} is not a vertex of a cut tetrahedron"
        )))?;
        nodes[v] = Node {
            status: VertexStatus::Finished,
            d,
            u,
        };
    }
    let mut state = NarrowBandState {
        mesh,
        nodes,
        touched: dofs.vertices().to_vec(),
        heap: BinaryHeap::new(),
        active: 0,
        stop_radius,
        surface_vertices: dofs.vertices().to_vec(),
        order: Vec::new(),
        last_finalized: T::zero(),
    };
    let mut seeds: Vec<usize> = dofs
        .vertices()
        .iter()
        .flat_map(|&v| mesh.vertex_neighbors(v))
        .filter(|v| !state.is_finished(*v))
        .collect();
    seeds.sort_unstable();
    seeds.dedup();
    for v in seeds {
        state.activate(v);
    }
    Ok(state)
}

impl<'m, T: Real> NarrowBandState<'m, T> {
    pub fn stop_radius(&self) -> T {
        self.stop_radius
    }

    pub fn status(&self, v: usize) -> VertexStatus {
        self.nodes[v].status
    }

    pub fn active_count(&self) -> usize {
        self.active
    }

    /// Vertices in the order they left the active set.
    pub fn finalization_order(&self) -> &[usize] {
        &self.order
    }

    /// Distance of a finished or active (tentative) vertex.
    pub fn distance(&self, v: usize) -> Option<T> {
        let n = self.nodes.get(v)?;
        (n.status != VertexStatus::Unknown).then_some(n.d)
    }

    pub fn value(&self, v: usize) -> Option<T> {
        let n = self.nodes.get(v)?;
        (n.status != VertexStatus::Unknown).then_some(n.u)
    }

    fn is_finished(&self, v: usize) -> bool {
        self.status(v) == VertexStatus::Finished
    }

    /// Candidate for `x` from tetrahedron `tet`, `None` if no vertex of `tet`
    /// is finished.
    fn candidate(&self, x: usize, tet: usize) -> Option<(T, T)> {
        let mut fin: Vec<usize> = self
            .mesh
            .tet(tet)
            .into_iter()
            .filter(|&y| y != x && self.is_finished(y))
            .collect();
        if fin.is_empty() {
            return None;
        }
        fin.sort_unstable();
        let xp = self.mesh.vertex(x);
        let node = |y: usize| self.nodes[y];
        if fin.len() > 1 {
            let pts: Vec<Vec3<T>> = fin.iter().map(|&y| self.mesh.vertex(y)).collect();
            if let Some((bary, p)) = project_onto_simplex(xp, &pts).filter(|(b, _)| inside(b)) {
                let w = clamp_weights(&bary);
                let d: T = fin.iter().zip(&w).map(|(&y, &c)| c * node(y).d).sum();
                let u: T = fin.iter().zip(&w).map(|(&y, &c)| c * node(y).u).sum();
                return Some((d + xp.distance(&p), u));
            }
        }
        let mut best: Option<(T, usize)> = None;
        for &y in &fin {
            let c = node(y).d + xp.distance(&self.mesh.vertex(y));
            if best.is_none_or(|(b, _)| c < b) {
                best = Some((c, y));
            }
        }
        best.map(|(d, y)| (d, node(y).u))
    }

    /// Best candidate over the full star of `x`.
    fn star_candidate(&self, x: usize) -> Option<(T, T)> {
        let mut best: Option<(T, T)> = None;
        for &tet in self.mesh.vertex_tets(x).iter() {
            if let Some(c) = self.candidate(x, tet) {
                if best.is_none_or(|b| c.0 < b.0) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn activate(&mut self, x: usize) {
        if let Some((d, u)) = self.star_candidate(x) {
            self.nodes[x] = Node {
                status: VertexStatus::Active,
                d,
                u,
            };
            self.touched.push(x);
            self.heap.push(Reverse((Ordered(d), x)));
            self.active += 1;
        }
    }

    /// Runs the extension phase until no active vertex remains.
    pub fn march(&mut self) -> Result<()> {
        while self.active > 0 {
            let Some(Reverse((Ordered(key), x))) = self.heap.pop() else {
                return Err(Error::HeapExhausted {
                    active: self.active,
                });
            };
            let node = &mut self.nodes[x];
            if node.status != VertexStatus::Active || node.d != key {
                continue;
            }
            node.status = VertexStatus::Finished;
            node.d = node.d.max(self.last_finalized);
            self.last_finalized = node.d;
            self.active -= 1;
            self.order.push(x);
            let grow = node.d <= self.stop_radius;

            let star = self.mesh.vertex_tets(x);
            let mut fresh = Vec::new();
            for &tet in star.iter() {
                for z in self.mesh.tet(tet) {
                    match self.status(z) {
                        VertexStatus::Finished => {}
                        VertexStatus::Active => {
                            if let Some((d, u)) = self.candidate(z, tet) {
                                let n = &mut self.nodes[z];
                                if d < n.d {
                                    n.d = d;
                                    n.u = u;
                                    self.heap.push(Reverse((Ordered(d), z)));
                                }
                            }
                        }
                        VertexStatus::Unknown => {
                            if grow {
                                fresh.push(z);
                            }
                        }
                    }
                }
            }
            fresh.sort_unstable();
            fresh.dedup();
            for z in fresh {
                self.activate(z);
            }
        }
        Ok(())
    }

    /// Finished vertices with their distances and values.
    pub fn finished(&self) -> ExtendedField<T> {
        let mut vertices: Vec<usize> = self
            .touched
            .iter()
            .copied()
            .filter(|&v| self.nodes[v].status == VertexStatus::Finished)
            .collect();
        vertices.sort_unstable();
        let distance = vertices.iter().map(|&v| self.nodes[v].d).collect();
        let values = vertices.iter().map(|&v| self.nodes[v].u).collect();
        ExtendedField {
            vertices,
            distance,
            values,
        }
    }

    pub fn surface_vertices(&self) -> &[usize] {
        &self.surface_vertices
    }

    /// ASCII table `vertex status distance value` of every touched vertex.
    pub fn write_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut ids = self.touched.clone();
        ids.sort_unstable();
        writeln!(out, "# vertex status distance value")?;
        for v in ids {
            let n = self.nodes[v];
            writeln!(out, "{v} {} {:.12e} {:.12e}", n.status.label(), n.d, n.u)?;
        }
        Ok(())
    }
}

/// Initializes and marches in one call.
pub fn extend<T: Real>(
    mesh: &BackgroundMesh<T>,
    surf: &SurfaceTriangulation<T>,
    dofs: &DofMap,
    u_active: &[T],
    stop_radius: T,
) -> Result<ExtendedField<T>> {
    let mut state = init_band(mesh, surf, dofs, u_active, stop_radius)?;
    state.march()?;
    Ok(state.finished())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Analytic;
    use crate::level_set::LevelSetField;
    use crate::mesh::Aabb;

    fn setup<F: Fn(Vec3<f64>) -> f64 + Sync>(
        h: f64,
        phi: F,
    ) -> (BackgroundMesh<f64>, SurfaceTriangulation<f64>, DofMap) {
        let mesh = BackgroundMesh::kuhn(Aabb::cube(-1.5, 1.5), h).unwrap();
        let ls =
            LevelSetField::interpolate(&Analytic(move |x: Vec3<f64>, _t: f64| phi(x)), &mesh, 0.0)
                .unwrap();
        let strip = ls.cut_strip().unwrap();
        let surf = ls.extract_surface();
        (mesh, surf, DofMap::new(strip.vertices))
    }

    #[test]
    fn plane_initial_distances_are_exact() {
        let (mesh, surf, dofs) = setup(0.25, |x| x.z() - 0.1);
        let u = vec![0.0; dofs.len()];
        let state = init_band(&mesh, &surf, &dofs, &u, 0.5).unwrap();
        for &v in dofs.vertices() {
            let z = mesh.vertex(v).z();
            assert!((state.distance(v).unwrap() - (z - 0.1).abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_finished_neighbor_update() {
        let (mesh, surf, dofs) = setup(0.2, |x| x.z() - 0.13);
        let mut state = init_band(&mesh, &surf, &dofs, &vec![0.0; dofs.len()], 1.0).unwrap();
        for n in state.nodes.iter_mut() {
            n.status = VertexStatus::Unknown;
        }
        let y = mesh.vertex_index(1, 1, 1);
        let x = mesh.vertex_index(2, 1, 1);
        state.nodes[y] = Node {
            status: VertexStatus::Finished,
            d: 0.1,
            u: 7.0,
        };
        let tet = *mesh
            .vertex_tets(x)
            .iter()
            .find(|&&t| mesh.tet(t).contains(&y))
            .unwrap();
        let (d, u) = state.candidate(x, tet).unwrap();
        assert!((d - 0.3).abs() < 1e-15);
        assert_eq!(u, 7.0);
    }

    #[test]
    fn plane_extension_copies_normal_values() {
        let (mesh, surf, dofs) = setup(0.125, |x| x.z() - 0.01);
        let u: Vec<f64> = dofs
            .vertices()
            .iter()
            .map(|&v| mesh.vertex(v).x())
            .collect();
        let mut state = init_band(&mesh, &surf, &dofs, &u, 0.4).unwrap();
        state.march().unwrap();
        let ext = state.finished();
        assert!(ext.len() > dofs.len());
        for ((&v, &d), &val) in ext.vertices.iter().zip(&ext.distance).zip(&ext.values) {
            let p = mesh.vertex(v);
            assert!((val - p.x()).abs() < 1e-9, "u at {p:?}: {val}");
            assert!((d - (p.z() - 0.01).abs()).abs() < 0.125, "d at {p:?}: {d}");
        }
        let order = state.finalization_order();
        let ds: Vec<f64> = order.iter().map(|&v| state.distance(v).unwrap()).collect();
        assert!(ds.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn constants_stay_constant() {
        let (mesh, surf, dofs) = setup(0.25, |x| x.norm() - 1.0);
        let ext = extend(&mesh, &surf, &dofs, &vec![3.25; dofs.len()], 0.6).unwrap();
        assert!(ext.values.iter().all(|&v| v == 3.25));
    }

    #[test]
    fn stop_radius_bounds_band() {
        let h = 0.125;
        let (mesh, surf, dofs) = setup(h, |x| x.norm() - 1.0);
        let stop = 0.05;
        let mut state = init_band(&mesh, &surf, &dofs, &vec![0.0; dofs.len()], stop).unwrap();
        state.march().unwrap();
        for (&v, &d) in state
            .finished()
            .vertices
            .iter()
            .zip(&state.finished().distance)
        {
            assert!(d <= stop + 2.0 * h * 3f64.sqrt(), "{v} {d}");
            let r = mesh.vertex(v).norm();
            assert!((r - 1.0).abs() < stop + 2.0 * h * 3f64.sqrt());
        }
    }

    #[test]
    fn empty_surface_rejected() {
        let (mesh, surf, dofs) = setup(0.5, |x| x.z() - 0.1);
        let empty = SurfaceTriangulation {
            triangles: vec![],
            cells: vec![],
            total_area: 0.0,
        };
        assert!(matches!(
            init_band(&mesh, &empty, &dofs, &vec![0.0; dofs.len()], 1.0),
            Err(Error::EmptySurface)
        ));
        let _ = surf;
    }
}
