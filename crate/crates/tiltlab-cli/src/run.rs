//! Executes a validated [`RunConfig`] and writes its outputs.

use std::collections::hash_map::RandomState;
use std::fs::File;
use std::hash::BuildHasher;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use tiltlab::chain::McmcConfig;
use tiltlab::diagnostics::TestReport;
use tiltlab::ensemble::sample_lambda_le;
use tiltlab::hydro::{heavy_envelope, hydro_limit_shape, light_path_scaffold, HydroGeometry, LightScaffold};
use tiltlab::oneline::{sample_pbr_dual, sample_tilted_exact, sample_tilted_mcmc, OneLineSpec};
use tiltlab::special::FsDensity;
use tiltlab::{Ensemble, Path as LinePath, RngStream, SlopePair, TiltParams, TimeGrid};

use crate::config::{parse_boundary, Command, Emit, Method, RunConfig};
use crate::error::CliError;
use crate::suites::{run_suite, Budget};

pub const BUILD_ID: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("TILTLAB_BUILD_ID"));

/// Result of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    /// Verification reports; empty for sampling commands.
    pub reports: Vec<TestReport>,
}

impl Outcome {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a RunConfig,
    seed: u64,
    build: &'a str,
    wall_time_seconds: f64,
    outputs: &'a [PathBuf],
}

/// Seed for runs that did not fix one.
pub fn fresh_seed() -> u64 {
    RandomState::new().hash_one(std::time::SystemTime::now())
}

/// Validates, fixes the seed, runs on a pool of `threads` workers and writes the
/// sidecar next to the primary output.
pub fn execute(mut cfg: RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let command = cfg.command.ok_or_else(|| CliError::Config(vec!["command: no command given".into()]))?;
    let seed = *cfg.seed.get_or_insert_with(fresh_seed);
    let dir = prepare_out_dir(&cfg.resolved_out_dir())?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Pool(e.to_string()))?;

    let start = Instant::now();
    let outcome = pool.install(|| match command {
        Command::SampleOneLine => one_line(&cfg, seed, &dir),
        Command::SampleEnsemble => ensemble(&cfg, seed, &dir),
        Command::FsDensity => fs_density(&cfg, &dir),
        Command::Hydro => hydro(&cfg, &dir),
        Command::Verify => verify(&cfg, seed, &dir),
    })?;
    let wall = start.elapsed().as_secs_f64();

    let primary = &outcome.outputs[0];
    let mut meta = primary.clone().into_os_string();
    meta.push(".meta.json");
    let meta = PathBuf::from(meta);
    let side = Sidecar { config: &cfg, seed, build: BUILD_ID, wall_time_seconds: wall, outputs: &outcome.outputs };
    let text = serde_json::to_string_pretty(&side).expect("sidecar serializes");
    std::fs::write(&meta, text + "\n").map_err(|e| CliError::io(&meta, e))?;
    Ok(outcome)
}

fn prepare_out_dir(dir: &Path) -> Result<PathBuf, CliError> {
    let bad = |reason: String| CliError::OutDir { path: dir.to_path_buf(), reason };
    if dir.exists() && !dir.is_dir() {
        return Err(bad("exists and is not a directory".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| bad(e.to_string()))?;
    Ok(dir.to_path_buf())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Long-format CSV: `draw,t,x1,...,xn`.
pub fn write_draws(path: &Path, draws: &[Ensemble<f64>]) -> Result<(), CliError> {
    let mut w = create(path)?;
    let lines = draws.first().map_or(0, |d| d.len());
    let io = |e| CliError::io(path, e);
    write!(w, "draw,t").map_err(io)?;
    for i in 1..=lines {
        write!(w, ",x{i}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for (d, e) in draws.iter().enumerate() {
        for k in 0..e.grid().points() {
            write!(w, "{d},{}", e.grid().time(k)).map_err(io)?;
            for l in e.lines() {
                write!(w, ",{}", l.values()[k]).map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
    }
    finish(path, w)
}

fn write_table(path: &Path, header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(",")).map_err(io)?;
    }
    finish(path, w)
}

/// One JSON object per line, in report order.
pub fn write_reports(path: &Path, reports: &[TestReport]) -> Result<(), CliError> {
    let mut w = create(path)?;
    for r in reports {
        let line = serde_json::to_string(r).expect("report serializes");
        writeln!(w, "{line}").map_err(|e| CliError::io(path, e))?;
    }
    finish(path, w)
}

/// Draw `i` always uses stream `i`, so output does not depend on the thread count.
fn draw_all<T: Send>(draws: usize, seed: u64, f: impl Fn(&mut RngStream) -> tiltlab::Result<T> + Sync) -> Result<Vec<T>, CliError> {
    (0..draws)
        .into_par_iter()
        .map(|i| f(&mut RngStream::new(seed, i as u64)))
        .collect::<tiltlab::Result<Vec<T>>>()
        .map_err(CliError::from)
}

fn one_line(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<Outcome, CliError> {
    let o = &cfg.one_line;
    let grid = TimeGrid::symmetric(o.t, o.grid_points)?;
    let spec = OneLineSpec::new(grid, o.a, o.x, o.y)?;
    let mut chain = McmcConfig::for_points(o.grid_points);
    if let Some(s) = o.sweeps {
        chain.sweeps = s;
        chain.burn_in = chain.burn_in.min(s.saturating_sub(1));
    }
    let paths: Vec<LinePath<f64>> = draw_all(o.draws, seed, |rng| match o.method {
        Method::Exact => Ok(sample_tilted_exact(&spec, rng)?.value),
        Method::Pbr => Ok(sample_pbr_dual(&spec, rng)?.value),
        Method::Mcmc => sample_tilted_mcmc(&spec, &chain, rng),
    })?;
    let draws: Vec<Ensemble<f64>> = paths.into_iter().map(Ensemble::from).collect();
    let out = dir.join(&o.out);
    write_draws(&out, &draws)?;
    Ok(Outcome { outputs: vec![out], reports: vec![] })
}

fn ensemble(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<Outcome, CliError> {
    let e = &cfg.ensemble;
    let grid = TimeGrid::symmetric(e.t, e.grid_points)?;
    let params = TiltParams::new(e.a, e.lambda, e.n)?;
    let scheme = parse_boundary(&e.boundary).map_err(|why| CliError::Config(vec![format!("ensemble.boundary: {why}")]))?;
    let mut chain = McmcConfig::for_points(e.grid_points);
    if let Some(s) = e.sweeps {
        chain.sweeps = s;
        chain.burn_in = chain.burn_in.min(s.saturating_sub(1));
    }
    let draws = draw_all(e.draws, seed, |rng| sample_lambda_le(&grid, &params, &scheme, &chain, rng))?;
    let out = dir.join(&e.out);
    write_draws(&out, &draws)?;
    Ok(Outcome { outputs: vec![out], reports: vec![] })
}

fn fs_density(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let f = &cfg.fs;
    let d = FsDensity::new(f.a);
    let out = dir.join(&f.out);
    let step = f.xmax / (f.points - 1) as f64;
    let rows = (0..f.points).map(|i| {
        let x = i as f64 * step;
        vec![x, d.density(x)]
    });
    write_table(&out, "x,density", rows)?;
    Ok(Outcome { outputs: vec![out], reports: vec![] })
}

const PROFILE_POINTS: usize = 401;

fn hydro(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let h = &cfg.hydro;
    let geom = HydroGeometry::new(h.t, h.k, h.lambda, h.delta)?;
    let out = dir.join(&h.out);
    let ts = || (0..PROFILE_POINTS).map(|i| -h.t + 2.0 * h.t * i as f64 / (PROFILE_POINTS - 1) as f64);
    match h.emit {
        Emit::Scaffold => {
            let ks: Vec<usize> = match h.line {
                Some(k) => vec![k],
                None => (2..=geom.n0).collect(),
            };
            let bound = LightScaffold::gap_bound(&geom);
            let mut rows = Vec::with_capacity(ks.len());
            for k in ks {
                let s = light_path_scaffold(&geom, k)?;
                rows.push(vec![
                    k as f64,
                    s.s_k,
                    s.xi,
                    s.bracket.0,
                    s.bracket.1,
                    f64::from(u8::from(s.in_bracket())),
                    s.xi_bar,
                    s.path_join,
                    s.gap(&geom),
                    bound,
                ]);
            }
            write_table(&out, "k,s_k,xi,bracket_lo,bracket_hi,in_bracket,xi_bar,path_join,gap,gap_bound", rows)?;
        }
        Emit::Envelope => {
            let k = h.line.expect("validated");
            let env = heavy_envelope(&geom, k, h.height)?;
            write_table(&out, "t,envelope", ts().map(|t| vec![t, env.eval(t)]))?;
        }
        Emit::Shape => {
            let pair = SlopePair::finite(-2.0 * h.k, -2.0 * h.k)?;
            let rows = ts().map(|t| Ok(vec![t, hydro_limit_shape(&pair, t)?])).collect::<tiltlab::Result<Vec<_>>>()?;
            write_table(&out, "t,shape", rows)?;
        }
    }
    Ok(Outcome { outputs: vec![out], reports: vec![] })
}

fn verify(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<Outcome, CliError> {
    let v = &cfg.verify;
    let budget = Budget::tier(v.budget);
    let mut reports = Vec::new();
    for s in v.suite.expand() {
        reports.extend(run_suite(s, &budget, seed)?);
    }
    let out = dir.join(&v.out);
    write_reports(&out, &reports)?;
    Ok(Outcome { outputs: vec![out], reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Command;

    #[test]
    fn sampling_is_reproducible_across_thread_counts() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = Vec::new();
        for threads in [1, 3] {
            let mut c = RunConfig { command: Some(Command::SampleOneLine), seed: Some(9), threads: Some(threads), ..Default::default() };
            c.out_dir = Some(dir.path().into());
            c.one_line.draws = 7;
            c.one_line.grid_points = 17;
            let o = execute(c).unwrap();
            bytes.push(std::fs::read(&o.outputs[0]).unwrap());
        }
        assert_eq!(bytes[0], bytes[1]);
    }

    #[test]
    fn seed_is_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = RunConfig { command: Some(Command::FsDensity), ..Default::default() };
        c.out_dir = Some(dir.path().into());
        c.fs.points = 11;
        execute(c).unwrap();
        let meta: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("fs_density.csv.meta.json")).unwrap()).unwrap();
        assert_eq!(meta["seed"], meta["config"]["seed"]);
        assert!(meta["seed"].is_u64());
    }

    #[test]
    fn file_as_out_dir_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("f");
        std::fs::write(&file, "x").unwrap();
        let c = RunConfig { command: Some(Command::FsDensity), out_dir: Some(file), ..Default::default() };
        assert!(matches!(execute(c), Err(CliError::OutDir { .. })));
    }
}
