//! Run settings merged from command-line flags and an optional key=value file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Parser;
use tracefem::{Scheme, TransportForm};

#[derive(Debug, Parser)]
#[command(
    name = "tracefem",
    version,
    about = "Trace finite element solver for transport-diffusion on evolving surfaces",
    after_help = "Flags override values read from --config. Keys in the config file use the long \
                  flag names without dashes, e.g. `experiment = 1` or `snapshot-every = 4`."
)]
pub struct Cli {
    /// Experiment number (1-5).
    #[arg(long)]
    pub experiment: Option<u32>,
    /// Background mesh size (cube side length).
    #[arg(long)]
    pub h: Option<f64>,
    /// Time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time; defaults to the experiment's own.
    #[arg(long = "T")]
    pub final_time: Option<f64>,
    /// Diffusion coefficient.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Time discretization: bdf1 or bdf2.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Transport term: advective or by-parts.
    #[arg(long)]
    pub transport: Option<String>,
    /// File with one `h,dt` pair per line; runs every cell.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a surface snapshot every k steps (0 disables).
    #[arg(long = "snapshot-every")]
    pub snapshot_every: Option<usize>,
    /// Print per-step solver diagnostics to stderr.
    #[arg(long)]
    pub verbose: bool,
    /// key=value settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// At snapshot steps, also dump the band mesh with extended values.
    #[arg(long = "dump-mesh")]
    pub dump_mesh: bool,
    /// At snapshot steps, also dump the system matrix as triplets.
    #[arg(long = "dump-matrix")]
    pub dump_matrix: bool,
    /// At snapshot steps, also dump the fast marching vertex table.
    #[arg(long = "dump-fmm")]
    pub dump_fmm: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub experiment: u32,
    pub cells: Vec<(f64, f64)>,
    pub final_time: Option<f64>,
    pub nu: f64,
    pub scheme: Scheme,
    pub transport: TransportForm,
    pub out: PathBuf,
    pub snapshot_every: usize,
    pub verbose: bool,
    pub dump_mesh: bool,
    pub dump_matrix: bool,
    pub dump_fmm: bool,
}

const KEYS: &[&str] = &[
    "experiment",
    "h",
    "dt",
    "T",
    "nu",
    "scheme",
    "transport",
    "sweep",
    "out",
    "snapshot-every",
    "verbose",
    "dump-mesh",
    "dump-matrix",
    "dump-fmm",
];

pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value, got '{raw}'", n + 1))?;
        let k = k.trim().replace('_', "-");
        let k = if k.eq_ignore_ascii_case("t") {
            "T".to_string()
        } else {
            k
        };
        if !KEYS.contains(&k.as_str()) {
            bail!("line {}: unknown key '{k}'", n + 1);
        }
        map.insert(k, v.trim().to_string());
    }
    Ok(map)
}

pub fn parse_sweep(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut cells = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty());
        let (Some(h), Some(dt), None) = (parts.next(), parts.next(), parts.next()) else {
            bail!("sweep line {}: expected 'h,dt', got '{raw}'", n + 1);
        };
        cells.push((parse_number(h)?, parse_number(dt)?));
    }
    if cells.is_empty() {
        bail!("sweep file lists no cells");
    }
    Ok(cells)
}

/// Accepts decimals and simple fractions such as `1/16`.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a
                .trim()
                .parse()
                .with_context(|| format!("bad number '{s}'"))?;
            let b: f64 = b
                .trim()
                .parse()
                .with_context(|| format!("bad number '{s}'"))?;
            a / b
        }
        None => s.parse().with_context(|| format!("bad number '{s}'"))?,
    };
    if !v.is_finite() {
        bail!("number '{s}' is not finite");
    }
    Ok(v)
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => bail!("bad boolean '{s}'"),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

impl Cli {
    pub fn settings(&self) -> Result<Settings> {
        let file = match &self.config {
            Some(p) => {
                parse_config_file(&read(p)?).with_context(|| format!("in {}", p.display()))?
            }
            None => BTreeMap::new(),
        };
        let num = |flag: Option<f64>, key: &str| -> Result<Option<f64>> {
            match flag {
                Some(v) => Ok(Some(v)),
                None => file.get(key).map(|s| parse_number(s)).transpose(),
            }
        };
        let text =
            |flag: &Option<String>, key: &str| flag.clone().or_else(|| file.get(key).cloned());
        let flag = |set: bool, key: &str| -> Result<bool> {
            if set {
                return Ok(true);
            }
            file.get(key)
                .map(|s| parse_bool(s))
                .transpose()
                .map(|b| b.unwrap_or(false))
        };

        let experiment = match self.experiment {
            Some(e) => e,
            None => file
                .get("experiment")
                .ok_or_else(|| anyhow!("--experiment is required"))?
                .parse()
                .context("bad experiment id")?,
        };
        let sweep = self
            .sweep
            .clone()
            .or_else(|| file.get("sweep").map(PathBuf::from));
        let cells = match sweep {
            Some(p) => parse_sweep(&read(&p)?)?,
            None => {
                let h =
                    num(self.h, "h")?.ok_or_else(|| anyhow!("--h is required without --sweep"))?;
                let dt = num(self.dt, "dt")?
                    .ok_or_else(|| anyhow!("--dt is required without --sweep"))?;
                vec![(h, dt)]
            }
        };
        for &(h, dt) in &cells {
            if !(h > 0.0) || !(dt > 0.0) {
                bail!("h and dt must be positive (h = {h}, dt = {dt})");
            }
        }
        let nu = num(self.nu, "nu")?.unwrap_or(1.0);
        if nu < 0.0 {
            bail!("nu must be non-negative");
        }
        let scheme: Scheme = text(&self.scheme, "scheme")
            .as_deref()
            .unwrap_or("bdf2")
            .parse()?;
        let transport: TransportForm = text(&self.transport, "transport")
            .as_deref()
            .unwrap_or("advective")
            .parse()?;
        let snapshot_every = match self.snapshot_every {
            Some(k) => k,
            None => file
                .get("snapshot-every")
                .map(|s| s.parse::<usize>())
                .transpose()
                .context("bad snapshot-every")?
                .unwrap_or(0),
        };
        Ok(Settings {
            experiment,
            cells,
            final_time: num(self.final_time, "T")?,
            nu,
            scheme,
            transport,
            out: self
                .out
                .clone()
                .or_else(|| file.get("out").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out")),
            snapshot_every,
            verbose: flag(self.verbose, "verbose")?,
            dump_mesh: flag(self.dump_mesh, "dump-mesh")?,
            dump_matrix: flag(self.dump_matrix, "dump-matrix")?,
            dump_fmm: flag(self.dump_fmm, "dump-fmm")?,
        })
    }
}
