//! Command-line flags. Each flag that is given overrides the matching field of
//! the configuration file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Command, Emit, Method, RunConfig};
use crate::suites::{BudgetTier, Suite};

#[derive(Debug, Parser)]
#[command(name = "tiltlab", version, about = "Sampling and verification for tilted line ensembles")]
pub struct Cli {
    /// TOML file with a full or partial run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed; drawn at random and recorded in the sidecar when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: $TILTLAB_OUT_DIR, then the working directory).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (default: all hardware threads).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Draw paths of the one-line tilted bridge.
    SampleOneLine(OneLineFlags),
    /// Run the ensemble chain and record its final states.
    SampleEnsemble(EnsembleFlags),
    /// Tabulate the one-line stationary density.
    FsDensity(FsFlags),
    /// Emit the deterministic geometry of the steep-boundary ensemble.
    Hydro(HydroFlags),
    /// Run verification suites and write a JSONL report.
    Verify(VerifyFlags),
}

#[derive(Debug, Args)]
pub struct OneLineFlags {
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub x: Option<f64>,
    #[arg(long)]
    pub y: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    /// Output file name inside the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnsembleFlags {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// zero | flat:<h> | nu:<L>,<R> | rho:<K>
    #[arg(long, allow_hyphen_values = true)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FsFlags {
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub xmax: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HydroFlags {
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long = "K")]
    pub k_slope: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Line index.
    #[arg(long = "k")]
    pub line: Option<usize>,
    /// Start height of a heavy line, for `--emit envelope`.
    #[arg(long)]
    pub height: Option<f64>,
    #[arg(long, value_enum)]
    pub emit: Option<Emit>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyFlags {
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    #[arg(long, value_enum)]
    pub budget: Option<BudgetTier>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Cli {
    /// Configuration file (or defaults) with the given flags applied on top.
    pub fn into_config(self) -> Result<RunConfig, crate::CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if self.seed.is_some() {
            c.seed = self.seed;
        }
        if self.out_dir.is_some() {
            c.out_dir = self.out_dir;
        }
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        match self.command {
            Sub::SampleOneLine(f) => {
                c.command = Some(Command::SampleOneLine);
                let o = &mut c.one_line;
                set(&mut o.a, f.a);
                set(&mut o.t, f.t);
                set(&mut o.x, f.x);
                set(&mut o.y, f.y);
                set(&mut o.grid_points, f.grid_points);
                set(&mut o.method, f.method);
                set(&mut o.draws, f.draws);
                if f.sweeps.is_some() {
                    o.sweeps = f.sweeps;
                }
                set(&mut o.out, f.out);
            }
            Sub::SampleEnsemble(f) => {
                c.command = Some(Command::SampleEnsemble);
                let e = &mut c.ensemble;
                set(&mut e.lambda, f.lambda);
                set(&mut e.a, f.a);
                set(&mut e.n, f.n);
                set(&mut e.t, f.t);
                set(&mut e.grid_points, f.grid_points);
                set(&mut e.boundary, f.boundary);
                if f.sweeps.is_some() {
                    e.sweeps = f.sweeps;
                }
                set(&mut e.draws, f.draws);
                set(&mut e.out, f.out);
            }
            Sub::FsDensity(f) => {
                c.command = Some(Command::FsDensity);
                set(&mut c.fs.a, f.a);
                set(&mut c.fs.xmax, f.xmax);
                set(&mut c.fs.points, f.points);
                set(&mut c.fs.out, f.out);
            }
            Sub::Hydro(f) => {
                c.command = Some(Command::Hydro);
                let h = &mut c.hydro;
                set(&mut h.t, f.t);
                set(&mut h.k, f.k_slope);
                set(&mut h.lambda, f.lambda);
                set(&mut h.delta, f.delta);
                if f.line.is_some() {
                    h.line = f.line;
                }
                set(&mut h.height, f.height);
                set(&mut h.emit, f.emit);
                set(&mut h.out, f.out);
            }
            Sub::Verify(f) => {
                c.command = Some(Command::Verify);
                set(&mut c.verify.suite, f.suite);
                set(&mut c.verify.budget, f.budget);
                set(&mut c.verify.out, f.out);
            }
        }
        Ok(c)
    }
}
