//! Run configuration: a TOML document mirroring the command-line flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use tiltlab::ensemble::BoundaryScheme;
use tiltlab::SlopePair;

use crate::error::CliError;
use crate::suites::{BudgetTier, Suite};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TILTLAB_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SampleOneLine,
    SampleEnsemble,
    FsDensity,
    Hydro,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Exact,
    Mcmc,
    Pbr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Emit {
    #[default]
    Scaffold,
    Envelope,
    Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OneLineArgs {
    pub a: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub grid_points: usize,
    pub method: Method,
    pub draws: usize,
    /// Chain length for the `mcmc` method; defaults to burn-in plus 1000.
    pub sweeps: Option<usize>,
    pub out: PathBuf,
}

impl Default for OneLineArgs {
    fn default() -> Self {
        Self { a: 2.0, t: 1.0, x: 0.5, y: 0.5, grid_points: 65, method: Method::Exact, draws: 100, sweeps: None, out: "one_line.csv".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleArgs {
    pub lambda: f64,
    pub a: f64,
    pub n: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub grid_points: usize,
    /// `zero`, `flat:<h>`, `nu:<L>,<R>` or `rho:<K>`.
    pub boundary: String,
    pub sweeps: Option<usize>,
    pub draws: usize,
    pub out: PathBuf,
}

impl Default for EnsembleArgs {
    fn default() -> Self {
        Self { lambda: 2.0, a: 2.0, n: 5, t: 6.0, grid_points: 257, boundary: "zero".into(), sweeps: None, draws: 10, out: "ensemble.csv".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FsArgs {
    pub a: f64,
    pub xmax: f64,
    /// Table rows, evenly spaced on `[0, xmax]`.
    pub points: usize,
    pub out: PathBuf,
}

impl Default for FsArgs {
    fn default() -> Self {
        Self { a: 2.0, xmax: 5.0, points: 501, out: "fs_density.csv".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydroArgs {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub lambda: f64,
    pub delta: f64,
    /// Line index; all light lines when absent.
    pub line: Option<usize>,
    /// Start height for the heavy-line envelope.
    pub height: f64,
    pub emit: Emit,
    pub out: PathBuf,
}

impl Default for HydroArgs {
    fn default() -> Self {
        Self { t: 1000.0, k: 1.0, lambda: 2.0, delta: 0.02, line: None, height: 1.0, emit: Emit::Scaffold, out: "hydro.csv".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyArgs {
    pub suite: Suite,
    pub budget: BudgetTier,
    pub out: PathBuf,
}

impl Default for VerifyArgs {
    fn default() -> Self {
        Self { suite: Suite::All, budget: BudgetTier::Smoke, out: "verify.jsonl".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub one_line: OneLineArgs,
    pub ensemble: EnsembleArgs,
    pub fs: FsArgs,
    pub hydro: HydroArgs,
    pub verify: VerifyArgs,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(vec![e.message().to_string()]))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Every invalid field, as `section.field: reason`.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let mut need = |ok: bool, field: &str, why: &str| {
            if !ok {
                p.push(format!("{field}: {why}"));
            }
        };
        if self.threads == Some(0) {
            need(false, "threads", "must be at least 1");
        }
        match self.command {
            Some(Command::SampleOneLine) => {
                let o = &self.one_line;
                need(o.a >= 0.0 && o.a.is_finite(), "one_line.a", "must be a finite non-negative number");
                need(o.t > 0.0 && o.t.is_finite(), "one_line.T", "must be positive");
                need(o.x > 0.0 && o.x.is_finite(), "one_line.x", "must be positive");
                need(o.y > 0.0 && o.y.is_finite(), "one_line.y", "must be positive");
                need(o.grid_points >= 3, "one_line.grid_points", "need at least 3 points");
                need(o.draws >= 1, "one_line.draws", "need at least one draw");
            }
            Some(Command::SampleEnsemble) => {
                let e = &self.ensemble;
                need(e.lambda > 1.0 && e.lambda.is_finite(), "ensemble.lambda", "ratio must exceed 1");
                need(e.a > 0.0 && e.a.is_finite(), "ensemble.a", "must be positive");
                need(e.n >= 1, "ensemble.n", "need at least one line");
                need(e.t > 0.0 && e.t.is_finite(), "ensemble.T", "must be positive");
                need(e.grid_points >= 3, "ensemble.grid_points", "need at least 3 points");
                need(e.draws >= 1, "ensemble.draws", "need at least one draw");
                if let Err(why) = parse_boundary(&e.boundary) {
                    p.push(format!("ensemble.boundary: {why}"));
                }
            }
            Some(Command::FsDensity) => {
                let f = &self.fs;
                need(f.a > 0.0 && f.a.is_finite(), "fs.a", "must be positive");
                need(f.xmax > 0.0 && f.xmax.is_finite(), "fs.xmax", "must be positive");
                need(f.points >= 2, "fs.points", "need at least 2 points");
            }
            Some(Command::Hydro) => {
                let h = &self.hydro;
                need(h.t > 1.0 && h.t.is_finite(), "hydro.T", "must exceed 1");
                need(h.k > 0.0 && h.k.is_finite(), "hydro.K", "must be positive");
                need(h.lambda > 1.0 && h.lambda.is_finite(), "hydro.lambda", "ratio must exceed 1");
                need(h.delta > 0.0 && h.delta < 0.05, "hydro.delta", "must lie in (0, 1/20)");
                if h.emit == Emit::Envelope {
                    need(h.line.is_some(), "hydro.line", "the envelope needs a line index");
                }
            }
            Some(Command::Verify) | None => {}
        }
        p
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(p))
        }
    }

    /// Output directory: explicit setting, then the environment, then the working directory.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

pub fn parse_boundary(s: &str) -> Result<BoundaryScheme<f64>, String> {
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("'{v}' is not a number"));
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    match kind.trim() {
        "zero" if rest.is_empty() => Ok(BoundaryScheme::Zero),
        "flat" => Ok(BoundaryScheme::Flat(num(rest)?)),
        "nu" => {
            let (l, r) = rest.split_once(',').ok_or("expected nu:<L>,<R>")?;
            let pair = SlopePair::finite(num(l)?, num(r)?).map_err(|e| e.to_string())?;
            Ok(BoundaryScheme::NuSlopes(pair))
        }
        "rho" => Ok(BoundaryScheme::rho(num(rest)?)),
        _ => Err(format!("unknown boundary '{s}'; expected zero, flat:<h>, nu:<L>,<R> or rho:<K>")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig { command: Some(Command::SampleEnsemble), seed: Some(42), ..Default::default() };
        c.ensemble.boundary = "nu:-2,-2".into();
        c.hydro.line = Some(3);
        c.verify.suite = Suite::Pbr;
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("[ensemble]\nlamda = 2.0").is_err());
    }

    #[test]
    fn problems_list_every_field() {
        let mut c = RunConfig { command: Some(Command::SampleEnsemble), ..Default::default() };
        c.ensemble.lambda = 0.5;
        c.ensemble.n = 0;
        c.ensemble.boundary = "wavy".into();
        let p = c.problems();
        assert_eq!(p.len(), 3, "{p:?}");
        assert!(p[0].contains("ratio must exceed 1"));
    }

    #[test]
    fn boundary_strings() {
        assert_eq!(parse_boundary("zero").unwrap(), BoundaryScheme::Zero);
        assert_eq!(parse_boundary("flat:1.5").unwrap(), BoundaryScheme::Flat(1.5));
        assert_eq!(parse_boundary("rho:1").unwrap(), BoundaryScheme::rho(1.0));
        assert!(matches!(parse_boundary("nu:-2,-2").unwrap(), BoundaryScheme::NuSlopes(_)));
        assert!(parse_boundary("nu:1,1").is_err());
        assert!(parse_boundary("flat:x").is_err());
    }
}
