//! Line-oriented `key = value` run configuration.
//!
//! ```text
//! # nonholonomic particle, fourth order
//! system = particle
//! integrator = nh-lagrangian
//! stages = 3
//! h = 0.01
//! steps = 1000
//! solver.tol = 1e-12
//! initial.q = 0, 1, 0
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::liegroup::Retraction;
use crate::nlsolve::SolverConfig;

/// Where a configuration entry came from, for error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override(usize),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override(n) => write!(f, "override {n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}: {message}")]
    Syntax { origin: Origin, message: String },
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: Origin, key: String },
    #[error("{origin}: key `{key}` expects {expected}, got `{value}`")]
    Type {
        origin: Origin,
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("{origin}: duplicate key `{key}`")]
    Duplicate { origin: Origin, key: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// Which stepper drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegratorKind {
    Vprk,
    Holonomic,
    NhLagrangian,
    NhHamiltonian,
    Vprkmk,
    NhLie,
    NhLieHamiltonian,
}

impl IntegratorKind {
    pub const ALL: [IntegratorKind; 7] = [
        Self::Vprk,
        Self::Holonomic,
        Self::NhLagrangian,
        Self::NhHamiltonian,
        Self::Vprkmk,
        Self::NhLie,
        Self::NhLieHamiltonian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Vprk => "vprk",
            Self::Holonomic => "holonomic",
            Self::NhLagrangian => "nh-lagrangian",
            Self::NhHamiltonian => "nh-hamiltonian",
            Self::Vprkmk => "vprkmk",
            Self::NhLie => "nh-lie",
            Self::NhLieHamiltonian => "nh-lie-hamiltonian",
        }
    }

    pub fn is_lie(self) -> bool {
        matches!(self, Self::Vprkmk | Self::NhLie | Self::NhLieHamiltonian)
    }

    /// Whether the stepper enforces velocity constraints.
    pub fn is_nonholonomic(self) -> bool {
        matches!(
            self,
            Self::NhLagrangian | Self::NhHamiltonian | Self::NhLie | Self::NhLieHamiltonian
        )
    }
}

impl fmt::Display for IntegratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntegratorKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or(())
    }
}

/// Settings of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeSettings {
    pub final_time: f64,
    pub steps: Vec<f64>,
    pub reference_step: f64,
    /// Errors at or below this are excluded from slope fits.
    pub noise_floor: f64,
}

impl Default for ConvergeSettings {
    fn default() -> Self {
        Self {
            final_time: 1.0,
            steps: vec![0.2, 0.1, 0.05, 0.025, 0.0125],
            reference_step: 1e-4,
            noise_floor: 1e-12,
        }
    }
}

/// Explicit initial data; anything unset falls back to the system default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InitialOverride {
    /// Configuration coordinates (for group systems, see the catalog).
    pub q: Option<Vec<f64>>,
    /// Velocity, trivialized on groups.
    pub v: Option<Vec<f64>>,
    /// Named preset, e.g. `low` or `high` for the CVT.
    pub preset: Option<String>,
    /// Ensemble member index for the chaotic system.
    pub member: Option<usize>,
}

/// A fully parsed run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: String,
    /// System parameters by name, validated against the catalog.
    pub params: BTreeMap<String, Vec<f64>>,
    /// `None` selects the system's natural stepper.
    pub integrator: Option<IntegratorKind>,
    pub stages: usize,
    pub retraction: Retraction,
    pub h: f64,
    pub steps: usize,
    pub initial: InitialOverride,
    pub solver: SolverConfig,
    pub output: Option<PathBuf>,
    pub converge: ConvergeSettings,
    pub ensemble_size: usize,
}

impl RunConfig {
    /// Defaults for everything except the system name.
    pub fn new(system: &str) -> Self {
        Self {
            system: system.to_owned(),
            params: BTreeMap::new(),
            integrator: None,
            stages: 2,
            retraction: Retraction::Cay,
            h: 0.01,
            steps: 1000,
            initial: InitialOverride::default(),
            solver: SolverConfig::default(),
            output: None,
            converge: ConvergeSettings::default(),
            ensemble_size: 20,
        }
    }

    /// Parses configuration text followed by `key=value` overrides, which win
    /// over the file.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut entries: Vec<(Origin, String, String)> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let origin = Origin::Line(n + 1);
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            entries.push(split_entry(line, origin)?);
        }
        let mut seen = BTreeMap::new();
        for (origin, key, _) in &entries {
            if let Some(_first) = seen.insert(key.clone(), *origin) {
                return Err(ConfigError::Duplicate {
                    origin: *origin,
                    key: key.clone(),
                });
            }
        }
        for (n, raw) in overrides.iter().enumerate() {
            let entry = split_entry(raw.trim(), Origin::Override(n + 1))?;
            entries.retain(|(_, key, _)| *key != entry.1);
            entries.push(entry);
        }

        let system = entries
            .iter()
            .find(|(_, key, _)| key == "system")
            .map(|(_, _, value)| value.clone())
            .ok_or(ConfigError::Missing("system"))?;
        let mut cfg = Self::new(&system);
        for (origin, key, value) in &entries {
            cfg.apply(*origin, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        Self::parse(&text, overrides)
    }

    fn apply(&mut self, origin: Origin, key: &str, value: &str) -> Result<(), ConfigError> {
        let typed = Typed { origin, key, value };
        match key {
            "system" => {}
            "integrator" => {
                self.integrator = Some(value.parse().map_err(|_| typed.mismatch("an integrator name"))?);
            }
            "stages" => self.stages = typed.integer()?,
            "retraction" => {
                self.retraction = match value {
                    "cay" => Retraction::Cay,
                    "exp" => Retraction::Exp,
                    _ => return Err(typed.mismatch("`cay` or `exp`")),
                }
            }
            "h" => self.h = typed.real()?,
            "steps" => self.steps = typed.integer()?,
            "output" => self.output = Some(PathBuf::from(value)),
            "solver.tol" => self.solver.tol = typed.real()?,
            "solver.max_iters" => self.solver.max_iters = typed.integer()?,
            "solver.fd_step" => self.solver.fd_step = typed.real()?,
            "initial.q" => self.initial.q = Some(typed.reals()?),
            "initial.v" => self.initial.v = Some(typed.reals()?),
            "initial.preset" => self.initial.preset = Some(value.to_owned()),
            "initial.member" => self.initial.member = Some(typed.integer()?),
            "converge.final_time" => self.converge.final_time = typed.real()?,
            "converge.h" => self.converge.steps = typed.reals()?,
            "converge.h_ref" => self.converge.reference_step = typed.real()?,
            "converge.noise_floor" => self.converge.noise_floor = typed.real()?,
            "ensemble.size" => self.ensemble_size = typed.integer()?,
            _ => match key.strip_prefix("params.") {
                Some(name) if super::catalog::accepts_param(&self.system, name) => {
                    self.params.insert(name.to_owned(), typed.reals()?);
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        origin,
                        key: key.to_owned(),
                    })
                }
            },
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !super::catalog::NAMES.contains(&self.system.as_str()) {
            return invalid(format!(
                "unknown system `{}` (expected one of {})",
                self.system,
                super::catalog::NAMES.join(", ")
            ));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return invalid(format!("h must be positive, got {}", self.h));
        }
        if self.steps < 1 {
            return invalid("steps must be at least 1".into());
        }
        if self.stages < 2 {
            return invalid(format!("stages must be at least 2, got {}", self.stages));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iters < 1 {
            return invalid("solver.tol must be positive and solver.max_iters at least 1".into());
        }
        if self.ensemble_size < 1 {
            return invalid("ensemble.size must be at least 1".into());
        }
        let c = &self.converge;
        if c.steps.is_empty() || c.steps.iter().chain([&c.reference_step, &c.final_time]).any(|&x| !(x > 0.0)) {
            return invalid("converge.h, converge.h_ref and converge.final_time must be positive".into());
        }
        Ok(())
    }
}

fn split_entry(line: &str, origin: Origin) -> Result<(Origin, String, String), ConfigError> {
    let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
        origin,
        message: format!("expected `key = value`, got `{line}`"),
    })?;
    let (key, value) = (key.trim(), value.trim());
    if key.is_empty() || value.is_empty() {
        return Err(ConfigError::Syntax {
            origin,
            message: format!("empty key or value in `{line}`"),
        });
    }
    Ok((origin, key.to_owned(), value.to_owned()))
}

struct Typed<'a> {
    origin: Origin,
    key: &'a str,
    value: &'a str,
}

impl Typed<'_> {
    fn mismatch(&self, expected: &'static str) -> ConfigError {
        ConfigError::Type {
            origin: self.origin,
            key: self.key.to_owned(),
            expected,
            value: self.value.to_owned(),
        }
    }

    fn real(&self) -> Result<f64, ConfigError> {
        self.value.parse().map_err(|_| self.mismatch("a number"))
    }

    fn integer(&self) -> Result<usize, ConfigError> {
        self.value.parse().map_err(|_| self.mismatch("a non-negative integer"))
    }

    fn reals(&self) -> Result<Vec<f64>, ConfigError> {
        self.value
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| self.mismatch("a comma-separated list of numbers"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(text, &[])
    }

    #[test]
    fn scalar_and_vector_values() {
        let cfg = parse("system = cvt\nh = 0.1\ninitial.q = 1, 0, 1 # comment\n").unwrap();
        assert_eq!(cfg.h, 0.1);
        assert_eq!(cfg.initial.q, Some(vec![1.0, 0.0, 1.0]));
    }

    #[test]
    fn missing_system_is_named() {
        let err = parse("h = 0.1\n").unwrap_err();
        assert_eq!(err, ConfigError::Missing("system"));
        assert!(err.to_string().contains("`system`"));
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let err = parse("system = particle\n\n# note\nsolver.tolerance = 1\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                origin: Origin::Line(4),
                key: "solver.tolerance".into()
            }
        );
    }

    #[test]
    fn type_mismatch_and_syntax_errors() {
        assert!(matches!(
            parse("system = particle\nsteps = ten\n"),
            Err(ConfigError::Type { origin: Origin::Line(2), .. })
        ));
        assert!(matches!(
            parse("system = particle\nh 0.1\n"),
            Err(ConfigError::Syntax { origin: Origin::Line(2), .. })
        ));
    }

    #[test]
    fn params_depend_on_the_system() {
        assert_eq!(parse("system = cvt\nparams.eps = 0.25\n").unwrap().params["eps"], vec![0.25]);
        assert!(matches!(
            parse("system = particle\nparams.eps = 0.25\n"),
            Err(ConfigError::UnknownKey { .. })
        ));
    }

    #[test]
    fn overrides_replace_file_values() {
        let cfg = RunConfig::parse("system = particle\nh = 0.1\n", &["h=0.05".into(), "stages = 3".into()]).unwrap();
        assert_eq!((cfg.h, cfg.stages), (0.05, 3));
    }

    #[test]
    fn duplicates_and_bad_ranges_are_rejected() {
        assert!(matches!(
            parse("system = particle\nh = 0.1\nh = 0.2\n"),
            Err(ConfigError::Duplicate { origin: Origin::Line(3), .. })
        ));
        assert!(matches!(parse("system = particle\nh = -1\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse("system = rocket\n"), Err(ConfigError::Invalid(_))));
    }
}
