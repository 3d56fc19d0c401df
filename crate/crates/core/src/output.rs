//! Plain-text writers: CSV tables and legacy ASCII VTK files.

use std::collections::HashMap;
use std::io::{self, Write};

use crate::integrator::StepRecord;
use crate::level_set::SurfaceTriangulation;
use crate::mesh::BackgroundMesh;
use crate::scalar::Real;

fn opt<T: Real>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.10e}"))
}

pub const STEP_HEADER: &str =
    "step,time,active_dofs,band_dofs,solver_iterations,residual,mass,area,err_l2,err_h1";

/// One CSV row per time level. Errors are the instantaneous (not squared)
/// surface norms and are empty when no exact solution is known.
pub fn write_steps<T: Real, W: Write>(mut out: W, records: &[StepRecord<T>]) -> io::Result<()> {
    writeln!(out, "{STEP_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{:.10e},{},{},{},{:.6e},{:.12e},{:.12e},{},{}",
            r.step,
            r.time,
            r.active_dofs,
            r.band_dofs,
            r.solver_iterations,
            r.residual,
            r.mass,
            r.area,
            opt(r.error_l2_squared.map(|e| e.sqrt())),
            opt(r.error_h1_squared.map(|e| e.sqrt())),
        )?;
    }
    Ok(())
}

pub const MASS_HEADER: &str = "h,dt,step,time,mass";

pub fn write_mass_rows<T: Real, W: Write>(
    mut out: W,
    h: T,
    dt: T,
    records: &[StepRecord<T>],
) -> io::Result<()> {
    for r in records {
        writeln!(out, "{h},{dt},{},{:.10e},{:.12e}", r.step, r.time, r.mass)?;
    }
    Ok(())
}

pub const CONVERGENCE_HEADER: &str =
    "experiment,scheme,h,dt,steps,err_l2_l2,err_l2_h1,mass_initial,mass_final,mass_error";

/// Summary of one `(h, dt)` cell.
#[derive(Debug, Clone)]
pub struct ConvergenceRow<T> {
    pub experiment: u32,
    pub scheme: &'static str,
    pub h: T,
    pub dt: T,
    pub steps: usize,
    pub err_l2_l2: Option<T>,
    pub err_l2_h1: Option<T>,
    pub mass_initial: T,
    pub mass_final: T,
    /// `|M_h(T) - M_ref|` when a reference mass is known.
    pub mass_error: Option<T>,
}

impl<T: Real> ConvergenceRow<T> {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.12e},{:.12e},{}",
            self.experiment,
            self.scheme,
            self.h,
            self.dt,
            self.steps,
            opt(self.err_l2_l2),
            opt(self.err_l2_h1),
            self.mass_initial,
            self.mass_final,
            opt(self.mass_error),
        )
    }
}

/// Surface triangulation with one point scalar, points shared between
/// triangles through their background-mesh edge.
pub fn write_surface_vtk<T: Real, W: Write>(
    mut out: W,
    surf: &SurfaceTriangulation<T>,
    name: &str,
    corner_values: &[[T; 3]],
    time: T,
) -> io::Result<()> {
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut cells = Vec::with_capacity(surf.len());
    for (tri, vals) in surf.triangles.iter().zip(corner_values) {
        let mut c = [0usize; 3];
        for k in 0..3 {
            c[k] = *index.entry(tri.edges[k]).or_insert_with(|| {
                points.push(tri.points[k]);
                values.push(vals[k]);
                points.len() - 1
            });
        }
        cells.push(c);
    }
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "surface t={time}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", points.len())?;
    for p in &points {
        writeln!(out, "{:.10e} {:.10e} {:.10e}", p[0], p[1], p[2])?;
    }
    writeln!(out, "CELLS {} {}", cells.len(), 4 * cells.len())?;
    for c in &cells {
        writeln!(out, "3 {} {} {}", c[0], c[1], c[2])?;
    }
    writeln!(out, "CELL_TYPES {}", cells.len())?;
    for _ in &cells {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {}", points.len())?;
    writeln!(out, "SCALARS {name} double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in &values {
        writeln!(out, "{v:.10e}")?;
    }
    Ok(())
}

/// A subset of background tetrahedra with an optional nodal field given per
/// global vertex id.
pub fn write_mesh_vtk<T: Real, W: Write>(
    mut out: W,
    mesh: &BackgroundMesh<T>,
    tets: &[usize],
    field: Option<(&str, &dyn Fn(usize) -> T)>,
) -> io::Result<()> {
    let mut verts: Vec<usize> = tets.iter().flat_map(|&t| mesh.tet(t)).collect();
    verts.sort_unstable();
    verts.dedup();
    let local = |v: usize| verts.binary_search(&v).expect("vertex of listed tet");
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "background mesh h={}", mesh.h())?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", verts.len())?;
    for &v in &verts {
        let p = mesh.vertex(v);
        writeln!(out, "{:.10e} {:.10e} {:.10e}", p[0], p[1], p[2])?;
    }
    writeln!(out, "CELLS {} {}", tets.len(), 5 * tets.len())?;
    for &t in tets {
        let [a, b, c, d] = mesh.tet(t).map(local);
        writeln!(out, "4 {a} {b} {c} {d}")?;
    }
    writeln!(out, "CELL_TYPES {}", tets.len())?;
    for _ in tets {
        writeln!(out, "10")?;
    }
    if let Some((name, f)) = field {
        writeln!(out, "POINT_DATA {}", verts.len())?;
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for &v in &verts {
            writeln!(out, "{:.10e}", f(v))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Analytic;
    use crate::geometry::Vec3;
    use crate::level_set::LevelSetField;
    use crate::mesh::Aabb;

    #[test]
    fn surface_points_are_shared() {
        let mesh = BackgroundMesh::kuhn(Aabb::cube(-1.5, 1.5), 0.5).unwrap();
        let surf = LevelSetField::interpolate(
            &Analytic(|x: Vec3<f64>, _t: f64| x.norm() - 1.0),
            &mesh,
            0.0,
        )
        .unwrap()
        .extract_surface();
        let vals = vec![[1.0; 3]; surf.len()];
        let mut buf = Vec::new();
        write_surface_vtk(&mut buf, &surf, "u", &vals, 0.0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let npts: usize = text
            .lines()
            .find_map(|l| l.strip_prefix("POINTS "))
            .and_then(|l| l.split(' ').next())
            .unwrap()
            .parse()
            .unwrap();
        // Closed genus-0 triangulation: V - E + F = 2 with E = 3F/2.
        assert_eq!(
            npts as i64 - (3 * surf.len() / 2) as i64 + surf.len() as i64,
            2
        );
        assert!(text.contains(&format!("CELL_TYPES {}", surf.len())));
    }

    #[test]
    fn mesh_dump_counts() {
        let mesh = BackgroundMesh::kuhn(Aabb::cube(0.0, 1.0), 1.0).unwrap();
        let tets: Vec<usize> = (0..6).collect();
        let mut buf = Vec::new();
        let f = |v: usize| v as f64;
        write_mesh_vtk(&mut buf, &mesh, &tets, Some(("id", &f))).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("POINTS 8 double"));
        assert!(text.contains("CELLS 6 30"));
        assert!(text.contains("POINT_DATA 8"));
    }
}
