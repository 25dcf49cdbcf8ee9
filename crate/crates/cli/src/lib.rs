//! Run orchestration behind the `msc` binary.

pub mod config;

use clap::{Args, Parser, Subcommand};
use config::{ConfigError, RunConfig};
use msc_core::assembly::Spaces;
use msc_core::diagnostics::{max_relative_drift, write_error_table, ErrorRecord};
use msc_core::manufactured::ManufacturedSolution;
use msc_core::mesh::Mesh;
use msc_core::sparse::SolverMethod;
use msc_core::stepper::{manufactured_errors, mms_sweep, ExampleKind, PotentialSpec, Simulation, StepError};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("config error: {0}")]
    Invalid(String),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) | CliError::Step(StepError::Config(_)) => 2,
            CliError::Step(StepError::NonContraction { .. }) => 4,
            CliError::Step(StepError::Io(_)) | CliError::Io(_) => 1,
            CliError::Step(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "msc",
    version,
    about = "Crank-Nicolson mixed FEM solver for the Maxwell-Schrödinger system"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Unforced run; writes conservation.csv.
    Conserve(Opts),
    /// Manufactured-solution sweep over a mesh list; writes errors.csv.
    Mms(Opts),
    /// Run with the configured example; writes conservation.csv and VTK snapshots.
    Run(Opts),
    /// Print mesh and space sizes.
    MeshInfo(Opts),
}

#[derive(Debug, Args, Default)]
pub struct Opts {
    /// Key-value config file; flags override its entries.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Element order for Ψ and φ.
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Use the printed (non-solenoidal) vector potentials.
    #[arg(long)]
    pub no_div_fix: bool,
    #[arg(long)]
    pub picard_tol: Option<f64>,
    #[arg(long)]
    pub linear_tol: Option<f64>,
    /// VTK snapshot every S steps.
    #[arg(long, value_name = "S")]
    pub vtk_every: Option<usize>,
    /// Comma-separated mesh list for `mms`.
    #[arg(long, value_delimiter = ',')]
    pub meshes: Option<Vec<usize>>,
    /// free or manufactured.
    #[arg(long, value_parser = config::parse_example)]
    pub example: Option<ExampleKind>,
    /// example, zero, harmonic or constant:<value>.
    #[arg(long, value_parser = config::parse_potential)]
    pub potential: Option<PotentialSpec>,
    /// direct or iterative.
    #[arg(long, value_parser = config::parse_solver)]
    pub solver: Option<SolverMethod>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Opts {
    /// File entries first, then flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", p.display())))?;
                RunConfig::parse(&text)?
            }
            None => RunConfig::default(),
        };
        let s = &mut cfg.scheme;
        macro_rules! over {
            ($($f:ident => $dst:expr),*) => { $(if let Some(v) = self.$f.clone() { $dst = v; })* };
        }
        over!(n => s.n, order => s.order, tau => s.tau, t_final => s.t_final, picard_tol => s.picard_tol,
              linear_tol => s.linear_tol, vtk_every => s.vtk_every, example => s.example,
              potential => s.potential, solver => s.solver);
        if let Some(o) = &self.out {
            s.output_dir = Some(o.clone());
        }
        if self.no_div_fix {
            s.div_fix = false;
        }
        if let Some(m) = &self.meshes {
            cfg.meshes = m.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Conserve(o) => {
            let mut cfg = o.resolve()?;
            cfg.scheme.example = ExampleKind::Free;
            conserve(&cfg, out)
        }
        Command::Mms(o) => mms(&o.resolve()?, out),
        Command::Run(o) => run(&o.resolve()?, out),
        Command::MeshInfo(o) => mesh_info(&o.resolve()?, out),
    }
}

/// Creates the output directory and echoes the effective config into it.
fn prepare_output(cfg: &RunConfig) -> Result<Option<PathBuf>, CliError> {
    let Some(dir) = cfg.scheme.output_dir.clone() else {
        return Ok(None);
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::Invalid(format!("cannot create {}: {e}", dir.display())))?;
    fs::write(dir.join("config.txt"), cfg.to_text())
        .map_err(|e| CliError::Invalid(format!("{} is not writable: {e}", dir.display())))?;
    Ok(Some(dir))
}

pub fn conserve(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let dir = prepare_output(cfg)?;
    let mut sim = Simulation::<f64>::new(cfg.scheme.clone())?;
    writeln!(
        out,
        "conserve: N = {}, r = {}, tau = {}, {} steps",
        cfg.scheme.n,
        cfg.scheme.order,
        cfg.scheme.tau,
        sim.num_steps()
    )?;
    let summary = sim.run()?;
    let series = |f: fn(&msc_core::diagnostics::DiagnosticsRecord) -> f64| {
        std::iter::once(&summary.initial)
            .chain(&summary.records)
            .map(f)
            .collect::<Vec<_>>()
    };
    let div = summary
        .records
        .iter()
        .map(|r| r.div_residual)
        .fold(summary.initial.div_residual, f64::max);
    writeln!(
        out,
        "max relative charge drift  {:.3e}",
        max_relative_drift(series(|r| r.charge))
    )?;
    writeln!(
        out,
        "max relative energy drift  {:.3e}",
        max_relative_drift(series(|r| r.energy))
    )?;
    writeln!(out, "max divergence residual    {div:.3e}")?;
    if let Some(d) = dir {
        writeln!(out, "wrote {}", d.join("conservation.csv").display())?;
    }
    Ok(())
}

pub fn run(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    if cfg.scheme.example == ExampleKind::Custom {
        return Err(CliError::Invalid(
            "example 'custom' is only available through the library".into(),
        ));
    }
    prepare_output(cfg)?;
    let mut sim = Simulation::<f64>::new(cfg.scheme.clone())?;
    writeln!(
        out,
        "run: {} example, N = {}, r = {}, {} steps",
        cfg.scheme.example,
        cfg.scheme.n,
        cfg.scheme.order,
        sim.num_steps()
    )?;
    let summary = sim.run()?;
    let iters: usize = summary.picard.iter().map(|p| p.iterations).sum();
    writeln!(out, "{} Picard iterations in total", iters)?;
    if cfg.scheme.example == ExampleKind::Manufactured {
        let e = manufactured_errors(&sim, &ManufacturedSolution::new(cfg.scheme.div_fix));
        writeln!(
            out,
            "H1 errors at t = {}: psi {:.6e}  A {:.6e}  phi {:.6e}",
            sim.state().t,
            e.err_psi,
            e.err_a,
            e.err_phi
        )?;
    }
    Ok(())
}

fn write_errors(dir: &Path, rows: &[ErrorRecord]) -> io::Result<()> {
    write_error_table(rows, BufWriter::new(File::create(dir.join("errors.csv"))?))
}

pub fn mms(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    if cfg.meshes.is_empty() {
        return Err(CliError::Invalid("empty mesh list".into()));
    }
    let dir = prepare_output(cfg)?;
    writeln!(out, "mms: r = {}, meshes {:?}", cfg.scheme.order, cfg.meshes)?;
    let mut done = Vec::new();
    let mut io_err = None;
    let result = mms_sweep::<f64>(&cfg.scheme, &cfg.meshes, |row| {
        done.push(*row);
        if let Err(e) = writeln!(
            out,
            "N = {:3}  tau = {:.4}  psi {:.6e}  A {:.6e}  phi {:.6e}",
            row.n, row.tau, row.err_psi, row.err_a, row.err_phi
        ) {
            io_err.get_or_insert(e);
        }
    });
    if let Some(d) = &dir {
        write_errors(d, &done)?;
    }
    result?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    if let Some(d) = dir {
        writeln!(out, "wrote {}", d.join("errors.csv").display())?;
    }
    Ok(())
}

pub fn mesh_info(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let s = &cfg.scheme;
    let mesh = Arc::new(Mesh::<f64>::unit_cube(s.n).map_err(StepError::from)?);
    writeln!(out, "N = {}, h = {}", s.n, s.h())?;
    writeln!(
        out,
        "{} tets, {} vertices, {} boundary faces",
        mesh.num_tets(),
        mesh.num_vertices(),
        mesh.boundary_faces().len()
    )?;
    let sp = Spaces::new(mesh, s.order).map_err(StepError::from)?;
    writeln!(
        out,
        "scalar dofs (order {}): {} ({} free)",
        s.order,
        sp.psi.num_dofs(),
        sp.psi.num_free()
    )?;
    writeln!(
        out,
        "vector dofs (order 2): {} ({} free)",
        sp.vector.num_dofs(),
        sp.vector.num_free()
    )?;
    writeln!(
        out,
        "multiplier dofs (order 1): {} ({} free)",
        sp.mult.num_dofs(),
        sp.mult.num_free()
    )?;
    Ok(())
}
