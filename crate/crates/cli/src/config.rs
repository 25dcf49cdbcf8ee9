//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; missing
//! keys keep their defaults. [`RunConfig::to_text`] writes every key, and
//! parsing that text gives back the same configuration.

use msc_core::sparse::SolverMethod;
use msc_core::stepper::{ExampleKind, PotentialSpec, SchemeConfig};
use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key '{key}' given twice")]
    Duplicate { line: usize, key: String },
    #[error("invalid value for '{key}': {msg}")]
    Value { key: String, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scheme: SchemeConfig,
    /// Mesh list for the convergence sweep.
    pub meshes: Vec<usize>,
    /// Seed recorded with the run for randomized checks.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scheme: SchemeConfig {
                output_dir: Some(PathBuf::from("out")),
                ..SchemeConfig::default()
            },
            meshes: vec![4, 8],
            seed: 0,
        }
    }
}

const KEYS: &[&str] = &[
    "n",
    "order",
    "tau",
    "t_final",
    "picard_tol",
    "picard_max_iters",
    "linear_tol",
    "example",
    "potential",
    "div_fix",
    "poisson_coupling",
    "solver",
    "out",
    "vtk_every",
    "meshes",
    "seed",
];

fn value<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| ConfigError::Value {
        key: key.into(),
        msg: format!("'{v}': {e}"),
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, val) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: raw.to_string(),
            })?;
            let (key, val) = (key.trim(), val.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { line, key: key.into() });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate { line, key: key.into() });
            }
            cfg.set(key, val)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let s = &mut self.scheme;
        match key {
            "n" => s.n = value(key, v)?,
            "order" => s.order = value(key, v)?,
            "tau" => s.tau = value(key, v)?,
            "t_final" => s.t_final = value(key, v)?,
            "picard_tol" => s.picard_tol = value(key, v)?,
            "picard_max_iters" => s.picard_max_iters = value(key, v)?,
            "linear_tol" => s.linear_tol = value(key, v)?,
            "example" => s.example = value(key, v)?,
            "potential" => s.potential = value(key, v)?,
            "div_fix" => s.div_fix = value(key, v)?,
            "poisson_coupling" => s.poisson_coupling = value(key, v)?,
            "solver" => s.solver = value(key, v)?,
            "out" => s.output_dir = (!v.is_empty()).then(|| PathBuf::from(v)),
            "vtk_every" => s.vtk_every = value(key, v)?,
            "seed" => self.seed = value(key, v)?,
            "meshes" => {
                self.meshes = v
                    .split(',')
                    .map(|m| value::<usize>(key, m.trim()))
                    .collect::<Result<_, _>>()?;
            }
            _ => {
                return Err(ConfigError::Value {
                    key: key.into(),
                    msg: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    /// Every key, one per line.
    pub fn to_text(&self) -> String {
        let s = &self.scheme;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("n", s.n.to_string());
        put("order", s.order.to_string());
        put("tau", format!("{:?}", s.tau));
        put("t_final", format!("{:?}", s.t_final));
        put("picard_tol", format!("{:?}", s.picard_tol));
        put("picard_max_iters", s.picard_max_iters.to_string());
        put("linear_tol", format!("{:?}", s.linear_tol));
        put("example", s.example.to_string());
        put("potential", s.potential.to_string());
        put("div_fix", s.div_fix.to_string());
        put("poisson_coupling", s.poisson_coupling.to_string());
        put("solver", s.solver.to_string());
        put(
            "out",
            s.output_dir
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        put("vtk_every", s.vtk_every.to_string());
        put(
            "meshes",
            self.meshes.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(","),
        );
        put("seed", self.seed.to_string());
        out
    }
}

// Keep the parsers of the core enums in one place for the flag layer.
pub fn parse_example(v: &str) -> Result<ExampleKind, String> {
    v.parse()
}

pub fn parse_potential(v: &str) -> Result<PotentialSpec, String> {
    v.parse()
}

pub fn parse_solver(v: &str) -> Result<SolverMethod, String> {
    v.parse()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blanks_are_skipped() {
        let c = RunConfig::parse("# header\n\nn = 3  # trailing\norder=1\n").unwrap();
        assert_eq!((c.scheme.n, c.scheme.order), (3, 1));
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        assert!(matches!(
            RunConfig::parse("nn = 3"),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse("n = 3\nn = 4"),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
        assert!(matches!(
            RunConfig::parse("n 3"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(RunConfig::parse("tau = fast"), Err(ConfigError::Value { .. })));
    }

    #[test]
    fn empty_out_disables_output() {
        let c = RunConfig::parse("out =").unwrap();
        assert_eq!(c.scheme.output_dir, None);
    }
}
