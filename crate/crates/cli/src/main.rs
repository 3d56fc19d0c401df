#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use tracefem::assembly::TraceSpace;
use tracefem::integrator::{march_band, StepView};
use tracefem::output::{
    write_mass_rows, write_mesh_vtk, write_steps, write_surface_vtk, ConvergenceRow,
    CONVERGENCE_HEADER, MASS_HEADER,
};
use tracefem::{CsrMatrix, Experiment, GmresOptions, TransientConfig};

use config::{Cli, Settings};

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn cell_dir(out: &Path, h: f64, dt: f64) -> PathBuf {
    out.join(format!("h{h}_dt{dt}"))
}

fn write_matrix(path: &Path, space: &TraceSpace<'_, f64>, a: &CsrMatrix<f64>) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "# row col vertex_row vertex_col value")?;
    let verts = space.dofs().vertices();
    for i in 0..a.dim() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(f, "{i} {j} {} {} {v:.16e}", verts[i], verts[j])?;
        }
    }
    f.flush()?;
    Ok(())
}

struct Dumper<'a> {
    exp: &'a Experiment,
    settings: &'a Settings,
    dir: PathBuf,
    dt: f64,
}

impl Dumper<'_> {
    fn on_step(&self, view: &StepView<'_, '_, f64>) -> tracefem::Result<()> {
        let rec = view.record;
        if self.settings.verbose {
            eprintln!(
                "step {:>5} t={:.6} active={} band={} iters={} residual={:.3e} mass={:.10}",
                rec.step,
                rec.time,
                rec.active_dofs,
                rec.band_dofs,
                rec.solver_iterations,
                rec.residual,
                rec.mass
            );
            if !view.residual_history.is_empty() {
                let hist: Vec<String> = view
                    .residual_history
                    .iter()
                    .map(|r| format!("{r:.3e}"))
                    .collect();
                eprintln!("           restart residuals: {}", hist.join(" "));
            }
        }
        let k = self.settings.snapshot_every;
        if k == 0 || !rec.step.is_multiple_of(k) {
            return Ok(());
        }
        self.snapshot(view)
            .map_err(|e| tracefem::Error::Io(std::io::Error::other(describe(&e))))
    }

    fn snapshot(&self, view: &StepView<'_, '_, f64>) -> Result<()> {
        let step = view.record.step;
        let corner = view.space.corner_values(view.surface, view.solution);
        let mut f = create(&self.dir.join(format!("surface_{step:05}.vtk")))?;
        write_surface_vtk(&mut f, view.surface, "u", &corner, view.record.time)?;
        f.flush()?;

        if self.settings.dump_matrix {
            if let Some(a) = view.matrix {
                write_matrix(
                    &self.dir.join(format!("matrix_{step:05}.txt")),
                    view.space,
                    a,
                )?;
            }
        }
        if !(self.settings.dump_mesh || self.settings.dump_fmm) {
            return Ok(());
        }
        let levels = self.settings.scheme.levels();
        let (state, speed) = march_band(
            view.mesh,
            view.surface,
            view.space,
            view.solution,
            self.exp.velocity.as_ref(),
            view.record.time,
            self.dt,
            levels,
        )?;
        if self.settings.dump_mesh {
            let ext = view.extension;
            let band = ext.band_tets(view.mesh, view.surface, levels as f64 * speed * self.dt);
            let value = |v: usize| ext.value(v).unwrap_or(f64::NAN);
            let mut f = create(&self.dir.join(format!("band_{step:05}.vtk")))?;
            write_mesh_vtk(&mut f, view.mesh, &band, Some(("u_extended", &value)))?;
            f.flush()?;
        }
        if self.settings.dump_fmm {
            let mut f = create(&self.dir.join(format!("fmm_{step:05}.txt")))?;
            state.write_table(&mut f)?;
            f.flush()?;
        }
        Ok(())
    }
}

fn run_cell(
    exp: &Experiment,
    settings: &Settings,
    h: f64,
    dt: f64,
    mass_csv: &mut impl Write,
) -> Result<ConvergenceRow<f64>> {
    let final_time = settings.final_time.unwrap_or(exp.final_time);
    let steps = exp.steps_for(dt, final_time)?;
    let config = TransientConfig {
        h,
        dt,
        steps,
        nu: settings.nu,
        scheme: settings.scheme,
        transport: settings.transport,
        solver: GmresOptions::default(),
    };
    let dir = cell_dir(&settings.out, h, dt);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let dumper = Dumper {
        exp,
        settings,
        dir: dir.clone(),
        dt,
    };
    if settings.verbose {
        eprintln!(
            "experiment {} h={h} dt={dt} steps={steps} scheme={}",
            exp.id,
            settings.scheme.name()
        );
    }
    let result = exp
        .run(&config, |view| dumper.on_step(view))
        .with_context(|| format!("experiment {} with h = {h}, dt = {dt}", exp.id))?;

    let mut f = create(&dir.join("steps.csv"))?;
    write_steps(&mut f, &result.records)?;
    f.flush()?;
    write_mass_rows(&mut *mass_csv, h, dt, &result.records)?;

    let first = result.records.first().map_or(0.0, |r| r.mass);
    let last = result.records.last().map_or(0.0, |r| r.mass);
    Ok(ConvergenceRow {
        experiment: exp.id,
        scheme: settings.scheme.name(),
        h,
        dt,
        steps,
        err_l2_l2: result.error_l2_l2(dt),
        err_l2_h1: result.error_l2_h1(dt),
        mass_initial: first,
        mass_final: last,
        mass_error: exp.reference_mass.map(|m| (last - m).abs()),
    })
}

fn run(cli: Cli) -> Result<()> {
    let settings = cli.settings()?;
    let exp = Experiment::new(settings.experiment)?;
    fs::create_dir_all(&settings.out)
        .with_context(|| format!("creating {}", settings.out.display()))?;

    let mut conv = create(&settings.out.join("convergence.csv"))?;
    let mut mass = create(&settings.out.join("mass.csv"))?;
    writeln!(conv, "{CONVERGENCE_HEADER}")?;
    writeln!(mass, "{MASS_HEADER}")?;
    println!("{CONVERGENCE_HEADER}");
    for &(h, dt) in &settings.cells {
        let row = run_cell(&exp, &settings, h, dt, &mut mass)?;
        let line = row.to_csv();
        println!("{line}");
        writeln!(conv, "{line}")?;
        conv.flush()?;
        mass.flush()?;
    }
    Ok(())
}

/// Error chain without repeating causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !parts.last().is_some_and(|p| p.contains(&msg)) {
            parts.push(msg);
        }
    }
    parts.join(": ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
