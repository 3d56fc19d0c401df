//! Time stepping on an evolving implicit surface: BDF1/BDF2 in time, trace
//! finite elements in space, fast-marching extension between steps.

use crate::assembly::{SurfaceOperator, TraceSpace};
use crate::error::{Error, Result};
use crate::fields::{ExactSolution, ScalarField, VectorField};
use crate::fmm::{init_band, tet_vertices, ExtendedField, NarrowBandState};
use crate::geometry::Vec3;
use crate::level_set::{LevelSetField, SurfaceTriangulation};
use crate::mesh::{Aabb, BackgroundMesh};
use crate::scalar::Real;
use crate::solver::{self, GmresOptions};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Bdf1,
    Bdf2,
}

impl Scheme {
    /// Number of history levels, also the band width factor.
    pub fn levels(self) -> usize {
        match self {
            Scheme::Bdf1 => 1,
            Scheme::Bdf2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Bdf1 => "bdf1",
            Scheme::Bdf2 => "bdf2",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bdf1" => Ok(Scheme::Bdf1),
            "bdf2" => Ok(Scheme::Bdf2),
            _ => Err(Error::Config(format!(
                "unknown scheme '{s}' (expected bdf1 or bdf2)"
            ))),
        }
    }
}

/// Discretization of the transport term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportForm {
    /// `int (w . grad u) v + (div_Gamma_h w) u v`.
    Advective,
    /// `-int (w . grad v) u`, exact only for tangential `w`.
    IntegratedByParts,
}

impl std::str::FromStr for TransportForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "advective" => Ok(TransportForm::Advective),
            "by-parts" | "integrated-by-parts" => Ok(TransportForm::IntegratedByParts),
            _ => Err(Error::Config(format!(
                "unknown transport form '{s}' (expected advective or by-parts)"
            ))),
        }
    }
}

/// Data of a surface transport-diffusion problem.
pub struct TransientProblem<'a, T: Real> {
    pub bounds: Aabb<T>,
    pub level_set: &'a dyn ScalarField<T>,
    pub velocity: &'a dyn VectorField<T>,
    pub source: &'a dyn ScalarField<T>,
    /// Initial datum, interpolated at the first active vertices.
    pub initial: &'a (dyn Fn(Vec3<T>) -> T + Sync),
    pub exact: Option<&'a dyn ExactSolution<T>>,
}

#[derive(Debug, Clone)]
pub struct TransientConfig<T> {
    pub h: T,
    pub dt: T,
    pub steps: usize,
    pub nu: T,
    pub scheme: Scheme,
    pub transport: TransportForm,
    pub solver: GmresOptions,
}

/// Diagnostics of one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<T> {
    pub step: usize,
    pub time: T,
    pub active_dofs: usize,
    pub band_dofs: usize,
    pub solver_iterations: usize,
    /// Relative residual of the unscaled system, recomputed at exit.
    pub residual: f64,
    pub maintained_residual: f64,
    pub mass: T,
    pub area: T,
    /// Squared `L2(Gamma_h)` and tangential `H1` errors, when exact data exists.
    pub error_l2_squared: Option<T>,
    pub error_h1_squared: Option<T>,
    pub surface_defects: usize,
    /// Finalized FMM distances were non-decreasing.
    pub fmm_monotone: bool,
    /// Extended values stayed within the range of the surface values.
    pub fmm_bounded: bool,
}

/// Everything an observer may inspect after a time level is complete.
pub struct StepView<'s, 'm, T: Real> {
    pub record: &'s StepRecord<T>,
    pub mesh: &'m BackgroundMesh<T>,
    pub surface: &'s SurfaceTriangulation<T>,
    pub space: &'s TraceSpace<'m, T>,
    pub solution: &'s [T],
    pub extension: &'s ExtendedField<T>,
    /// System matrix of the step (absent for the initial level).
    pub matrix: Option<&'s CsrMatrix<T>>,
    /// True relative residual after each GMRES restart cycle.
    pub residual_history: &'s [f64],
}

/// Result of one time step.
pub struct StepOutput<'m, T: Real> {
    pub record: StepRecord<T>,
    pub surface: SurfaceTriangulation<T>,
    pub space: TraceSpace<'m, T>,
    pub solution: Vec<T>,
    pub matrix: CsrMatrix<T>,
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TransientResult<T> {
    pub records: Vec<StepRecord<T>>,
}

impl<T: Real> TransientResult<T> {
    fn time_norm(&self, dt: T, pick: impl Fn(&StepRecord<T>) -> Option<T>) -> Option<T> {
        let n = self.records.len().checked_sub(1)?;
        if n == 0 {
            return pick(&self.records[0]).map(|_| T::zero());
        }
        let half = dt * T::lit(0.5);
        let mut acc = T::zero();
        for (i, r) in self.records.iter().enumerate() {
            let w = if i == 0 || i == n { half } else { dt };
            acc += w * pick(r)?;
        }
        Some(acc.sqrt())
    }

    /// Trapezoidal-in-time `L2(L2)` error.
    pub fn error_l2_l2(&self, dt: T) -> Option<T> {
        self.time_norm(dt, |r| r.error_l2_squared)
    }

    /// Trapezoidal-in-time `L2(H1)` error.
    pub fn error_l2_h1(&self, dt: T) -> Option<T> {
        self.time_norm(dt, |r| r.error_h1_squared)
    }

    pub fn masses(&self) -> Vec<(T, T)> {
        self.records.iter().map(|r| (r.time, r.mass)).collect()
    }
}

/// History levels kept between steps.
#[derive(Debug, Clone, Default)]
pub struct TimeSchemeState<T> {
    pub step: usize,
    pub time: T,
    /// Most recent extension first.
    pub history: Vec<ExtendedField<T>>,
}

struct Level<'m, T: Real> {
    surface: SurfaceTriangulation<T>,
    space: TraceSpace<'m, T>,
}

fn build_level<'m, T: Real>(
    mesh: &'m BackgroundMesh<T>,
    phi: &dyn ScalarField<T>,
    t: T,
) -> Result<Level<'m, T>> {
    let field = LevelSetField::interpolate(phi, mesh, t)?;
    let surface = field.extract_surface();
    if surface.is_empty() {
        return Err(Error::EmptySurface);
    }
    let space = TraceSpace::new(mesh, &surface)?;
    Ok(Level { surface, space })
}

/// Cap on the band-speed refinement passes in [`march_band`].
const MAX_SPEED_PASSES: usize = 4;

/// Marches the extension of `values` off the surface and returns the
/// finished state together with the band speed used for its radius.
///
/// The band speed is the largest `|w(t)|` over the band vertices. Starting
/// from the active vertices, the march is repeated with the widened radius
/// while the speed found on the finished set keeps growing.
#[allow(clippy::too_many_arguments)]
pub fn march_band<'m, T: Real>(
    mesh: &'m BackgroundMesh<T>,
    surface: &SurfaceTriangulation<T>,
    space: &TraceSpace<'_, T>,
    values: &[T],
    velocity: &dyn VectorField<T>,
    t: T,
    dt: T,
    levels: usize,
) -> Result<(NarrowBandState<'m, T>, T)> {
    let layers = T::from_usize_lossy(levels);
    let mut speed = space.max_speed(velocity, t);
    let mut pass = 1;
    loop {
        let mut state = init_band(
            mesh,
            surface,
            space.dofs(),
            values,
            mesh.h() + layers * speed * dt,
        )?;
        state.march()?;
        let band_speed = state
            .finalization_order()
            .iter()
            .chain(state.surface_vertices())
            .map(|&v| velocity.value(mesh.vertex(v), t).norm())
            .fold(T::zero(), T::max);
        if band_speed <= speed || pass == MAX_SPEED_PASSES {
            return Ok((state, speed));
        }
        speed = band_speed;
        pass += 1;
    }
}

/// Band of tets and its extension for one solution: returns the extended
/// field, the band vertex count and the FMM property flags.
#[allow(clippy::too_many_arguments)]
pub fn compute_band<T: Real>(
    mesh: &BackgroundMesh<T>,
    surface: &SurfaceTriangulation<T>,
    space: &TraceSpace<'_, T>,
    values: &[T],
    velocity: &dyn VectorField<T>,
    t: T,
    dt: T,
    levels: usize,
) -> Result<(ExtendedField<T>, usize, bool, bool)> {
    let (state, speed) = march_band(mesh, surface, space, values, velocity, t, dt, levels)?;
    let ext = state.finished();
    let layers = T::from_usize_lossy(levels);
    let width = layers * speed * dt;
    let monotone = state
        .finalization_order()
        .windows(2)
        .all(|w| state.distance(w[0]) <= state.distance(w[1]));
    let (lo, hi) = values
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let bounded = ext.values.iter().all(|&v| v >= lo && v <= hi);
    let band = ext.band_tets(mesh, surface, width);
    let band_dofs = tet_vertices(mesh, &band).len();
    Ok((ext, band_dofs, monotone, bounded))
}

fn check_inclusion<T: Real>(
    space: &TraceSpace<'_, T>,
    history: &[ExtendedField<T>],
    step: usize,
) -> Result<()> {
    for (k, ext) in history.iter().enumerate() {
        if let Some(&v) = space.dofs().vertices().iter().find(|&&v| !ext.contains(v)) {
            return Err(Error::BandInclusion {
                vertex: v,
                history_step: step - 1 - k,
            });
        }
    }
    Ok(())
}

/// Advances one time level. On success the new extension is pushed onto the
/// history.
pub fn advance_one_step<'m, T: Real>(
    state: &mut TimeSchemeState<T>,
    mesh: &'m BackgroundMesh<T>,
    problem: &TransientProblem<'_, T>,
    config: &TransientConfig<T>,
) -> Result<StepOutput<'m, T>> {
    let step = state.step + 1;
    let t = config.dt * T::from_usize_lossy(step);
    let level = build_level(mesh, problem.level_set, t)?;
    let levels = if config.scheme == Scheme::Bdf2 && state.history.len() >= 2 {
        2
    } else {
        1
    };
    let history = &state.history[..levels.min(state.history.len())];
    if history.is_empty() {
        return Err(Error::Config(
            "time stepping needs an initial extension".into(),
        ));
    }
    check_inclusion(&level.space, history, step)?;

    let space = &level.space;
    let dt = config.dt;
    let transport = match config.transport {
        TransportForm::Advective => SurfaceOperator::Advection(Some(problem.velocity)),
        TransportForm::IntegratedByParts => SurfaceOperator::Convection(Some(problem.velocity)),
    };
    let lookup = |ext: &ExtendedField<T>, v: usize| ext.value(v).expect("band inclusion checked");
    let (mass_coef, rhs_hist) = if levels == 2 {
        let (a, b) = (&history[0], &history[1]);
        let four = T::lit(4.0);
        let hist = space.load_nodal(|v| four * lookup(a, v) - lookup(b, v));
        (T::lit(1.5) / dt, (hist, T::lit(0.5) / dt))
    } else {
        let a = &history[0];
        (
            T::one() / dt,
            (space.load_nodal(|v| lookup(a, v)), T::one() / dt),
        )
    };
    let matrix = space.assemble_combination(
        &[
            (mass_coef, SurfaceOperator::Mass),
            (config.nu, SurfaceOperator::Stiffness),
            (T::one(), transport),
        ],
        t,
    )?;
    let mut rhs = space.load(problem.source, t);
    for (r, h) in rhs.iter_mut().zip(&rhs_hist.0) {
        *r += rhs_hist.1 * *h;
    }
    let report = solver::solve(&matrix, &rhs, &config.solver)?;
    let u = report.x;

    let (ext, band_dofs, monotone, bounded) = compute_band(
        mesh,
        &level.surface,
        space,
        &u,
        problem.velocity,
        t,
        dt,
        config.scheme.levels(),
    )?;
    let (el2, eh1) = match problem.exact {
        Some(e) => {
            let (a, b) = space.error_squared(&u, e, t);
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    let record = StepRecord {
        step,
        time: t,
        active_dofs: space.dofs().len(),
        band_dofs,
        solver_iterations: report.iterations,
        residual: report.residual,
        maintained_residual: report.maintained_residual,
        mass: space.integrate(&u),
        area: space.area(),
        error_l2_squared: el2,
        error_h1_squared: eh1,
        surface_defects: level.surface.watertight_defects(),
        fmm_monotone: monotone,
        fmm_bounded: bounded,
    };
    state.history.insert(0, ext);
    state.history.truncate(config.scheme.levels());
    state.step = step;
    state.time = t;
    Ok(StepOutput {
        record,
        surface: level.surface,
        space: level.space,
        solution: u,
        matrix,
        residual_history: report.history,
    })
}

/// Runs `config.steps` uniform steps from `t = 0`, calling `observer` after
/// the initial level and after every step.
pub fn run_transient<T: Real, O>(
    problem: &TransientProblem<'_, T>,
    config: &TransientConfig<T>,
    mut observer: O,
) -> Result<TransientResult<T>>
where
    O: FnMut(&StepView<'_, '_, T>) -> Result<()>,
{
    if !(config.dt > T::zero()) || !(config.nu >= T::zero()) {
        return Err(Error::Config(format!(
            "time step must be positive and viscosity non-negative (dt = {}, nu = {})",
            config.dt, config.nu
        )));
    }
    let mesh = BackgroundMesh::kuhn(problem.bounds, config.h)?;
    let step_err = |step: usize| {
        move |e: Error| Error::Step {
            step,
            source: Box::new(e),
        }
    };

    let level = build_level(&mesh, problem.level_set, T::zero()).map_err(step_err(0))?;
    let u0: Vec<T> = level
        .space
        .dofs()
        .vertices()
        .iter()
        .map(|&v| (problem.initial)(mesh.vertex(v)))
        .collect();
    let (ext, band_dofs, monotone, bounded) = compute_band(
        &mesh,
        &level.surface,
        &level.space,
        &u0,
        problem.velocity,
        T::zero(),
        config.dt,
        config.scheme.levels(),
    )
    .map_err(step_err(0))?;
    let (el2, eh1) = match problem.exact {
        Some(e) => {
            let (a, b) = level.space.error_squared(&u0, e, T::zero());
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    let record = StepRecord {
        step: 0,
        time: T::zero(),
        active_dofs: level.space.dofs().len(),
        band_dofs,
        solver_iterations: 0,
        residual: 0.0,
        maintained_residual: 0.0,
        mass: level.space.integrate(&u0),
        area: level.space.area(),
        error_l2_squared: el2,
        error_h1_squared: eh1,
        surface_defects: level.surface.watertight_defects(),
        fmm_monotone: monotone,
        fmm_bounded: bounded,
    };
    observer(&StepView {
        record: &record,
        mesh: &mesh,
        surface: &level.surface,
        space: &level.space,
        solution: &u0,
        extension: &ext,
        matrix: None,
        residual_history: &[],
    })?;
    let mut records = vec![record];
    let mut state = TimeSchemeState {
        step: 0,
        time: T::zero(),
        history: vec![ext],
    };
    for n in 1..=config.steps {
        let out = advance_one_step(&mut state, &mesh, problem, config).map_err(step_err(n))?;
        observer(&StepView {
            record: &out.record,
            mesh: &mesh,
            surface: &out.surface,
            space: &out.space,
            solution: &out.solution,
            extension: &state.history[0],
            matrix: Some(&out.matrix),
            residual_history: &out.residual_history,
        })?;
        records.push(out.record);
    }
    Ok(TransientResult { records })
}
