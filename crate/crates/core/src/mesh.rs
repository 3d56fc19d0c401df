//! Time-independent tetrahedral background mesh built by Kuhn subdivision of
//! a uniform cube grid.
//!
//! Connectivity is implicit: a tetrahedron id encodes its cube and its local
//! index, and vertex stars are derived from the grid structure. This keeps the
//! memory footprint at O(1) per cell even for meshes with tens of millions of
//! tetrahedra while still exposing the usual `tet`/`vertex_tets` queries.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::geometry::{inverse, Vec3};
use crate::scalar::Real;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn new(min: Vec3<T>, max: Vec3<T>) -> Self {
        Aabb { min, max }
    }

    /// The cube `[lo, hi]^3`.
    pub fn cube(lo: T, hi: T) -> Self {
        Aabb::new(Vec3::new(lo, lo, lo), Vec3::new(hi, hi, hi))
    }

    pub fn extent(&self) -> Vec3<T> {
        self.max - self.min
    }

    pub fn volume(&self) -> T {
        let e = self.extent();
        e.x() * e.y() * e.z()
    }
}

/// Kuhn split: tetrahedron `p` follows the monotone lattice path from corner
/// 0 to corner 7 adding axes in the order `PERMS[p]`.
const PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Local cube corners (bit `a` set means +1 along axis `a`) of each Kuhn tet,
/// ordered so that every tetrahedron has positive signed volume.
const LOCAL_TETS: [[usize; 4]; 6] = kuhn_local_tets();

const fn kuhn_local_tets() -> [[usize; 4]; 6] {
    let mut out = [[0usize; 4]; 6];
    let mut p = 0;
    while p < 6 {
        let perm = PERMS[p];
        let c1 = 1 << perm[0];
        let c2 = c1 | (1 << perm[1]);
        // Odd permutations flip orientation.
        let odd = (p == 1) || (p == 2) || (p == 5);
        out[p] = if odd { [0, c2, c1, 7] } else { [0, c1, c2, 7] };
        p += 1;
    }
    out
}

const CORNER_OFFSETS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// Maximum number of tetrahedra sharing a vertex of a Kuhn mesh.
pub const MAX_STAR: usize = 24;

/// Tetrahedra incident to a vertex, sorted ascending.
#[derive(Debug, Clone, Copy)]
pub struct TetStar {
    ids: [usize; MAX_STAR],
    len: usize,
}

impl Deref for TetStar {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.ids[..self.len]
    }
}

#[derive(Debug, Clone)]
pub struct BackgroundMesh<T> {
    bounds: Aabb<T>,
    h: T,
    cells: [usize; 3],
    kappa: T,
}

impl<T: Real> BackgroundMesh<T> {
    /// Uniform cube grid of side `h` over `bounds`, each cube split into six
    /// tetrahedra sharing the cube diagonal from its smallest to its largest
    /// corner.
    pub fn kuhn(bounds: Aabb<T>, h: T) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::InvalidMesh(format!(
                "cell size must be positive, got {h}"
            )));
        }
        let ext = bounds.extent();
        let mut cells = [0usize; 3];
        for axis in 0..3 {
            let ratio = ext[axis] / h;
            let n = ratio.round();
            let tol = T::lit(1e-9) * n.max(T::one());
            if !(n >= T::one()) || (ratio - n).abs() > tol {
                return Err(Error::NonMultipleSide {
                    axis,
                    length: ext[axis].to_f64_lossy(),
                    h: h.to_f64_lossy(),
                });
            }
            cells[axis] = n.to_usize().expect("cell count");
        }
        let mut mesh = BackgroundMesh {
            bounds,
            h,
            cells,
            kappa: T::zero(),
        };
        let kappa = (0..6)
            .map(|t| {
                let (rho, hs) = mesh.inradius_and_diameter(t);
                hs / rho
            })
            .fold(T::zero(), T::max);
        mesh.kappa = kappa;
        Ok(mesh)
    }

    pub fn bounds(&self) -> &Aabb<T> {
        &self.bounds
    }

    /// Cube side length of the underlying grid.
    pub fn h(&self) -> T {
        self.h
    }

    /// Largest tetrahedron diameter (the cube diagonal).
    pub fn max_diameter(&self) -> T {
        self.h * T::lit(3.0).sqrt()
    }

    /// Shape-regularity constant: every tet satisfies `rho_S > h_S / kappa`
    /// for any `kappa` strictly above the returned value.
    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn cells(&self) -> [usize; 3] {
        self.cells
    }

    pub fn num_vertices(&self) -> usize {
        (self.cells[0] + 1) * (self.cells[1] + 1) * (self.cells[2] + 1)
    }

    pub fn num_cubes(&self) -> usize {
        self.cells[0] * self.cells[1] * self.cells[2]
    }

    pub fn num_tets(&self) -> usize {
        6 * self.num_cubes()
    }

    #[inline]
    pub fn vertex_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * (self.cells[1] + 1) + j) * (self.cells[2] + 1) + k
    }

    #[inline]
    pub fn vertex_ijk(&self, v: usize) -> [usize; 3] {
        let nz = self.cells[2] + 1;
        let ny = self.cells[1] + 1;
        [v / (ny * nz), (v / nz) % ny, v % nz]
    }

    #[inline]
    pub fn vertex(&self, v: usize) -> Vec3<T> {
        let ijk = self.vertex_ijk(v);
        Vec3(std::array::from_fn(|a| {
            self.bounds.min[a] + T::from_usize_lossy(ijk[a]) * self.h
        }))
    }

    #[inline]
    pub fn cube_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.cells[1] + j) * self.cells[2] + k
    }

    #[inline]
    fn cube_ijk(&self, c: usize) -> [usize; 3] {
        let nz = self.cells[2];
        let ny = self.cells[1];
        [c / (ny * nz), (c / nz) % ny, c % nz]
    }

    /// Vertex ids of the eight cube corners, indexed by corner bit pattern.
    pub fn cube_corners(&self, cube: usize) -> [usize; 8] {
        let [i, j, k] = self.cube_ijk(cube);
        CORNER_OFFSETS.map(|[a, b, c]| self.vertex_index(i + a, j + b, k + c))
    }

    #[inline]
    pub fn tet(&self, tet: usize) -> [usize; 4] {
        let corners = self.cube_corners(tet / 6);
        LOCAL_TETS[tet % 6].map(|c| corners[c])
    }

    /// Tetrahedra ids `6*cube .. 6*cube + 6`.
    pub fn cube_tets(&self, cube: usize) -> std::ops::Range<usize> {
        6 * cube..6 * cube + 6
    }

    pub fn tet_points(&self, tet: usize) -> [Vec3<T>; 4] {
        self.tet(tet).map(|v| self.vertex(v))
    }

    /// All tetrahedra containing vertex `v`, ascending.
    pub fn vertex_tets(&self, v: usize) -> TetStar {
        let ijk = self.vertex_ijk(v);
        let mut star = TetStar {
            ids: [0; MAX_STAR],
            len: 0,
        };
        for di in [1usize, 0] {
            for dj in [1usize, 0] {
                for dk in [1usize, 0] {
                    let d = [di, dj, dk];
                    if (0..3).any(|a| ijk[a] < d[a] || ijk[a] - d[a] >= self.cells[a]) {
                        continue;
                    }
                    let cube = self.cube_index(ijk[0] - di, ijk[1] - dj, ijk[2] - dk);
                    let corner = di | (dj << 1) | (dk << 2);
                    for (local, lt) in LOCAL_TETS.iter().enumerate() {
                        if lt.contains(&corner) {
                            star.ids[star.len] = 6 * cube + local;
                            star.len += 1;
                        }
                    }
                }
            }
        }
        star
    }

    /// Distinct vertices sharing a tetrahedron with `v` (excluding `v`), ascending.
    pub fn vertex_neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .vertex_tets(v)
            .iter()
            .flat_map(|&t| self.tet(t))
            .filter(|&w| w != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn tet_volume(&self, tet: usize) -> T {
        let p = self.tet_points(tet);
        let a = p[1] - p[0];
        let b = p[2] - p[0];
        let c = p[3] - p[0];
        a.dot(&b.cross(&c)) / T::lit(6.0)
    }

    /// Inscribed-sphere radius and diameter (longest edge) of a tetrahedron.
    pub fn inradius_and_diameter(&self, tet: usize) -> (T, T) {
        let p = self.tet_points(tet);
        let vol = self.tet_volume(tet).abs();
        let faces = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
        let surface: T = faces
            .iter()
            .map(|f| (p[f[1]] - p[f[0]]).cross(&(p[f[2]] - p[f[0]])).norm() * T::lit(0.5))
            .sum();
        let mut diam = T::zero();
        for a in 0..4 {
            for b in a + 1..4 {
                diam = diam.max(p[a].distance(&p[b]));
            }
        }
        (T::lit(3.0) * vol / surface, diam)
    }

    /// Gradients of the four barycentric coordinates of `tet`.
    pub fn p1_basis_gradients(&self, tet: usize) -> Result<[Vec3<T>; 4]> {
        p1_gradients(&self.tet_points(tet)).ok_or(Error::DegenerateTet { tet })
    }

    /// Tetrahedron containing `x` (closed), if `x` lies in the box.
    pub fn locate(&self, x: Vec3<T>) -> Option<usize> {
        let mut ijk = [0usize; 3];
        let mut local = [T::zero(); 3];
        for a in 0..3 {
            let s = (x[a] - self.bounds.min[a]) / self.h;
            if !(s >= T::zero()) || s > T::from_usize_lossy(self.cells[a]) {
                return None;
            }
            let c = s.floor().to_usize()?.min(self.cells[a] - 1);
            ijk[a] = c;
            local[a] = s - T::from_usize_lossy(c);
        }
        let cube = self.cube_index(ijk[0], ijk[1], ijk[2]);
        // Kuhn tet with axis order p contains points with local[p0] >= local[p1] >= local[p2].
        let local_tet = PERMS
            .iter()
            .position(|p| local[p[0]] >= local[p[1]] && local[p[1]] >= local[p[2]])
            .unwrap_or(0);
        Some(6 * cube + local_tet)
    }
}

/// Barycentric-coordinate gradients for an arbitrary tetrahedron.
pub fn p1_gradients<T: Real>(p: &[Vec3<T>; 4]) -> Option<[Vec3<T>; 4]> {
    let e = [p[1] - p[0], p[2] - p[0], p[3] - p[0]];
    // Rows of the inverse of the matrix with columns e_k are the gradients of lambda_1..3.
    let m = [
        [e[0].x(), e[1].x(), e[2].x()],
        [e[0].y(), e[1].y(), e[2].y()],
        [e[0].z(), e[1].z(), e[2].z()],
    ];
    let inv = inverse(&m)?;
    let g1 = Vec3(inv[0]);
    let g2 = Vec3(inv[1]);
    let g3 = Vec3(inv[2]);
    Some([-(g1 + g2 + g3), g1, g2, g3])
}
