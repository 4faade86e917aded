//! Declarative run configuration, read from TOML.
//!
//! ```toml
//! mode = "study"
//! example = "ex9"
//! levels = [24, 32, 48]
//! repro = true
//!
//! [schedule]
//! stages = 5
//!
//! [solver]
//! method = "bicgstab"
//! preconditioner = "ilu0"
//! ```
//!
//! An `example` preset supplies domain and Γ; explicit `domain` or `gamma`
//! tables override it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::driver::StageSchedule;
use crate::gamma::GammaSpec;
use crate::linsolve::SolverConfig;
use crate::mesh::Domain;
use crate::par::Reduction;
use crate::study::{Example, LevelSpec, Perturbation, Problem, StudyConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Solve,
    Study,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub example: Option<Example>,
    pub domain: Option<Domain>,
    pub gamma: Option<GammaSpec>,
    /// Mesh file for single runs; generated meshes are used otherwise.
    pub mesh_file: Option<PathBuf>,
    /// Cells along the longest extent of the domain, one entry per level.
    pub levels: Vec<usize>,
    pub perturbation: Option<Perturbation>,
    pub schedule: StageSchedule,
    pub solver: SolverConfig,
    /// Geodesic oracle spacing relative to the finest mesh spacing.
    pub oracle_refinement: f64,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    /// Deterministic reductions, so repeated runs are bit-identical.
    pub repro: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Solve,
            example: None,
            domain: None,
            gamma: None,
            mesh_file: None,
            levels: vec![],
            perturbation: None,
            schedule: StageSchedule::default(),
            solver: SolverConfig::default(),
            oracle_refinement: 0.5,
            output_dir: PathBuf::from("out"),
            threads: None,
            repro: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Domain and Γ after applying the preset and its overrides.
    pub fn problem(&self) -> Result<Problem> {
        let base = self.example.map(Example::problem);
        let domain = self.domain.or(base.as_ref().map(|p| p.domain));
        let gamma = self.gamma.clone().or(base.map(|p| p.gamma));
        match (domain, gamma) {
            (Some(domain), Some(gamma)) => Ok(Problem { domain, gamma }),
            _ => Err(Error::Config("no problem given: set `example` or both `domain` and `gamma`".into())),
        }
    }

    /// Levels, falling back to a mode-dependent default.
    pub fn level_resolutions(&self) -> Vec<usize> {
        if !self.levels.is_empty() {
            return self.levels.clone();
        }
        match self.mode {
            Mode::Solve => vec![24],
            Mode::Study => vec![16, 24, 32],
        }
    }

    pub fn reduction(&self) -> Reduction {
        if self.repro {
            Reduction::Deterministic
        } else {
            Reduction::Fast
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { reduction: self.reduction(), ..self.solver }
    }

    pub fn label(&self) -> String {
        self.example.map(|e| e.name().to_string()).unwrap_or_else(|| "custom".into())
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.problem()?;
        let levels = self.level_resolutions();
        if self.mode == Mode::Study {
            if levels.len() < 2 {
                return Err(Error::Config("a convergence study needs at least two levels".into()));
            }
            if self.mesh_file.is_some() {
                return Err(Error::Config("a convergence study generates its meshes; drop `mesh_file`".into()));
            }
        }
        if levels.iter().any(|&n| n < 2) {
            return Err(Error::Config("every level needs at least 2 cells per axis".into()));
        }
        if !(self.solver.rel_tol > 0.0 && self.solver.rel_tol < 1.0) {
            return Err(Error::Config(format!("solver tolerance {} not in (0, 1)", self.solver.rel_tol)));
        }
        if self.solver.max_iter == Some(0) {
            return Err(Error::Config("solver max_iter must be at least 1".into()));
        }
        if !(self.oracle_refinement > 0.0) {
            return Err(Error::Config("oracle_refinement must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn study_config(&self) -> Result<StudyConfig> {
        self.validate()?;
        Ok(StudyConfig {
            label: self.label(),
            problem: self.problem()?,
            levels: self
                .level_resolutions()
                .into_iter()
                .map(|resolution| LevelSpec { resolution, perturbation: self.perturbation })
                .collect(),
            schedule: self.schedule,
            solver: self.solver_config(),
            oracle_refinement: self.oracle_refinement,
        })
    }
}
