//! Error norms, convergence orders and the ten benchmark presets.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::driver::{run_algorithm, StageDiagnostics, StageSchedule};
use crate::gamma::geodesic::{aligned_divisions, GeodesicOracle, OracleMode};
use crate::gamma::{build_dirichlet, Axis, Gamma, GammaSpec, PlanePatch, SeedSet, SquareSpec};
use crate::linsolve::SolverConfig;
use crate::mesh::{generate_box_hex_mesh, perturb_mesh_with, Aabb, Domain, PolyMesh};
use crate::{Error, Result, Vec3};

/// Version of the CSV column layout written by [`ErrorReport::to_csv`].
pub const CSV_SCHEMA_VERSION: u32 = 1;

const G1: f64 = 1.25 / 15.0;
const G2: f64 = 10.0 / 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Example {
    Ex1,
    Ex2,
    Ex3,
    Ex4,
    Ex5,
    Ex6,
    Ex7,
    Ex8,
    Ex9,
    Ex10,
}

impl Example {
    pub const ALL: [Example; 10] = [
        Example::Ex1,
        Example::Ex2,
        Example::Ex3,
        Example::Ex4,
        Example::Ex5,
        Example::Ex6,
        Example::Ex7,
        Example::Ex8,
        Example::Ex9,
        Example::Ex10,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Example::Ex1 => "EX1",
            Example::Ex2 => "EX2",
            Example::Ex3 => "EX3",
            Example::Ex4 => "EX4",
            Example::Ex5 => "EX5",
            Example::Ex6 => "EX6",
            Example::Ex7 => "EX7",
            Example::Ex8 => "EX8",
            Example::Ex9 => "EX9",
            Example::Ex10 => "EX10",
        }
    }

    pub fn problem(self) -> Problem {
        let cube5 = Domain::Box(Aabb::cube(-5.0, 5.0));
        let u_domain = Domain::BoxMinusBox {
            outer: Aabb::new(Vec3::new(-15.0 * G1, -15.0 * G1, -5.0 * G1), Vec3::new(15.0 * G1, 15.0 * G1, 5.0 * G1)),
            cut: Aabb::new(Vec3::new(-5.0 * G1, -5.0 * G1, -5.0 * G1), Vec3::new(15.0 * G1, 5.0 * G1, 5.0 * G1)),
        };
        let end_patch = |y0: f64, y1: f64| PlanePatch {
            axis: Axis::X,
            offset: 15.0 * G1,
            lo: [y0 * G1, -5.0 * G1],
            hi: [y1 * G1, 5.0 * G1],
        };
        let square = |z: f64| SquareSpec { center: [0.0, 0.0, z], side: 7.0 * G2, normal: [0.0, 0.0, 1.0] };
        let (domain, gamma) = match self {
            Example::Ex1 => (Domain::Box(Aabb::cube(-1.25, 1.25)), GammaSpec::Sphere { center: [0.0; 3], radius: 0.6 }),
            Example::Ex2 => (
                Domain::BoxMinusBox {
                    outer: Aabb::new(
                        Vec3::new(-8.0 * G1, -15.0 * G1, -15.0 * G1),
                        Vec3::new(22.0 * G1, 15.0 * G1, 15.0 * G1),
                    ),
                    cut: Aabb::new(
                        Vec3::new(8.0 * G1, -15.0 * G1, -5.0 * G1),
                        Vec3::new(15.0 * G1, 15.0 * G1, 5.0 * G1),
                    ),
                },
                GammaSpec::Sphere { center: [0.0; 3], radius: 0.3 },
            ),
            Example::Ex3 => (u_domain, GammaSpec::PlanePatch(end_patch(5.0, 15.0))),
            Example::Ex4 => {
                (u_domain, GammaSpec::PatchUnion { patches: vec![end_patch(5.0, 15.0), end_patch(-15.0, -5.0)] })
            }
            Example::Ex5 => (u_domain, GammaSpec::WholeBoundary),
            Example::Ex6 => (cube5, GammaSpec::WholeBoundary),
            Example::Ex7 => (cube5, GammaSpec::Circle { center: [0.0; 3], radius: 0.6, normal: [0.0, 0.0, 1.0] }),
            Example::Ex8 => (cube5, GammaSpec::Disk { center: [0.0; 3], radius: 0.6, normal: [0.0, 0.0, 1.0] }),
            Example::Ex9 => (cube5, GammaSpec::Square(square(0.0))),
            Example::Ex10 => (cube5, GammaSpec::SquarePair { squares: [square(-7.5 * G2), square(7.5 * G2)] }),
        };
        Problem { domain, gamma }
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Example::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown example {s:?}; expected EX1..EX10")))
    }
}

impl std::fmt::Display for Example {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Domain and source set of one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub domain: Domain,
    pub gamma: GammaSpec,
}

/// Reference distance used to measure errors.
#[derive(Debug, Clone)]
pub enum Oracle {
    /// Straight-line distance, exact on convex domains.
    Euclidean(Gamma),
    /// Grid shortest paths inside a non-convex domain.
    Geodesic(GeodesicOracle),
}

impl Oracle {
    /// Euclidean on convex domains, a geodesic grid with spacing at most
    /// `spacing` otherwise.
    pub fn for_gamma(gamma: &Gamma, spacing: f64) -> Result<Self> {
        if gamma.domain().is_convex() {
            Ok(Oracle::Euclidean(gamma.clone()))
        } else {
            Ok(Oracle::Geodesic(GeodesicOracle::with_spacing(gamma, spacing, OracleMode::AnyAngle)?))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Oracle::Euclidean(_) => "euclidean",
            Oracle::Geodesic(_) => "geodesic",
        }
    }

    pub fn distances(&self, points: &[Vec3]) -> Result<Vec<f64>> {
        match self {
            Oracle::Euclidean(g) => Ok(points.iter().map(|x| g.distance(x)).collect()),
            Oracle::Geodesic(o) => o.distances(points),
        }
    }

    /// Upper bound on the oracle's own error.
    pub fn bias(&self, length: f64) -> f64 {
        match self {
            Oracle::Euclidean(_) => 0.0,
            Oracle::Geodesic(o) => o.bias_bound(length),
        }
    }
}

/// Volume-weighted L¹ error and max error over the cells that are not pinned.
pub fn error_norms(mesh: &PolyMesh, u: &[f64], exact: &[f64], seeds: &SeedSet) -> (f64, f64) {
    let (mut num, mut vol, mut max) = (0.0, 0.0, 0.0f64);
    for p in (0..mesh.n_cells()).filter(|&p| !seeds.is_pinned(p)) {
        let e = (u[p] - exact[p]).abs();
        let v = mesh.cell_volume(p);
        num += v * e;
        vol += v;
        max = max.max(e);
    }
    (if vol > 0.0 { num / vol } else { 0.0 }, max)
}

/// `EOC_L = log(E_{L+1}/E_L) / log(h_{L+1}/h_L)` for every consecutive pair.
pub fn compute_eoc(errors: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != h.len() {
        return Err(Error::InvalidArgument(format!("{} errors for {} mesh sizes", errors.len(), h.len())));
    }
    if errors.len() < 2 {
        return Err(Error::InvalidArgument("at least two levels are needed".into()));
    }
    if errors.iter().chain(h).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("errors and mesh sizes must be positive".into()));
    }
    Ok(errors.windows(2).zip(h.windows(2)).map(|(e, h)| (e[1] / e[0]).ln() / (h[1] / h[0]).ln()).collect())
}

/// Optional vertex jitter applied to every generated level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    /// Fraction of the local edge length, in `[0, 0.3]`.
    pub amplitude: f64,
    pub seed: u64,
}

/// Everything needed to generate and solve one refinement level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpec {
    /// Target number of cells along the longest extent of the domain.
    pub resolution: usize,
    pub perturbation: Option<Perturbation>,
}

/// Generates the mesh of one level. Vertices within 1.5 cell widths of Γ
/// are kept in place when perturbing.
pub fn level_mesh(problem: &Problem, gamma: &Gamma, level: &LevelSpec) -> Result<PolyMesh> {
    if level.resolution < 2 {
        return Err(Error::Config(format!("resolution {} must be at least 2", level.resolution)));
    }
    let ext = problem.domain.outer().extent();
    let spacing = ext.max() / level.resolution as f64;
    let divisions = aligned_divisions(&problem.domain, spacing)?;
    let mesh = generate_box_hex_mesh(&problem.domain, divisions)?;
    match level.perturbation {
        Some(p) if p.amplitude > 0.0 => {
            let guard = 1.5 * spacing;
            perturb_mesh_with(&mesh, p.amplitude, p.seed, |_, x| gamma.distance(x) <= guard)
        }
        _ => Ok(mesh),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub level: usize,
    pub n_cells: usize,
    pub h: f64,
    pub e1: f64,
    pub einf: f64,
    /// `K_n` per stage.
    pub stage_iterations: Vec<usize>,
    /// Seconds; reported in the text table only.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub label: String,
    pub oracle: String,
    pub levels: Vec<LevelReport>,
    pub eoc_l1: Vec<f64>,
    pub eoc_linf: Vec<f64>,
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

impl ErrorReport {
    /// CSV with a schema-version column and 17 significant digits. Wall
    /// times are left out so that repeated runs produce identical files.
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("schema_version,label,oracle,level,n_cells,h,e1,eoc_l1,einf,eoc_linf,k_total,k_stages\n");
        for (i, l) in self.levels.iter().enumerate() {
            let eoc = |v: &[f64]| if i == 0 { String::new() } else { sci(v[i - 1]) };
            let ks: Vec<String> = l.stage_iterations.iter().map(|k| k.to_string()).collect();
            let _ = writeln!(
                s,
                "{CSV_SCHEMA_VERSION},{},{},{},{},{},{},{},{},{},{},{}",
                self.label,
                self.oracle,
                l.level,
                l.n_cells,
                sci(l.h),
                sci(l.e1),
                eoc(&self.eoc_l1),
                sci(l.einf),
                eoc(&self.eoc_linf),
                l.stage_iterations.iter().sum::<usize>(),
                ks.join(";")
            );
        }
        s
    }

    /// Fixed-width table with columns L, cells, h, E¹, EOC, E∞, EOC, ΣK, time.
    pub fn to_table(&self) -> String {
        let mut s = format!("{} (oracle: {})\n", self.label, self.oracle);
        let _ = writeln!(
            s,
            "{:>3} {:>9} {:>10} {:>10} {:>6} {:>10} {:>6} {:>5} {:>9}",
            "L", "cells", "h", "E1", "EOC", "Einf", "EOC", "sumK", "time[s]"
        );
        for (i, l) in self.levels.iter().enumerate() {
            let eoc = |v: &[f64]| if i == 0 { "-".to_string() } else { format!("{:.2}", v[i - 1]) };
            let _ = writeln!(
                s,
                "{:>3} {:>9} {:>10.3e} {:>10.3e} {:>6} {:>10.3e} {:>6} {:>5} {:>9.2}",
                l.level,
                l.n_cells,
                l.h,
                l.e1,
                eoc(&self.eoc_l1),
                l.einf,
                eoc(&self.eoc_linf),
                l.stage_iterations.iter().sum::<usize>(),
                l.wall_time
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub label: String,
    pub problem: Problem,
    pub levels: Vec<LevelSpec>,
    pub schedule: StageSchedule,
    pub solver: SolverConfig,
    /// Geodesic oracle spacing as a fraction of the finest mesh spacing.
    pub oracle_refinement: f64,
}

/// One level solved, with its errors.
#[derive(Debug, Clone)]
pub struct LevelOutcome {
    pub mesh: PolyMesh,
    pub u: Vec<f64>,
    pub exact: Vec<f64>,
    pub stages: Vec<StageDiagnostics>,
    pub report: LevelReport,
}

/// Solves one level and measures its errors against `oracle`.
pub fn run_level(
    problem: &Problem,
    gamma: &Gamma,
    oracle: &Oracle,
    level: usize,
    spec: &LevelSpec,
    schedule: &StageSchedule,
    solver: &SolverConfig,
) -> Result<LevelOutcome> {
    let start = Instant::now();
    let mesh = level_mesh(problem, gamma, spec)?;
    let dirichlet = build_dirichlet(&mesh, gamma)?;
    let sol = run_algorithm(&mesh, &dirichlet, schedule, solver)?;
    let exact = oracle.distances(mesh.cell_centers())?;
    let (e1, einf) = error_norms(&mesh, &sol.u, &exact, &dirichlet.seeds);
    let report = LevelReport {
        level,
        n_cells: mesh.n_cells(),
        h: mesh.h(),
        e1,
        einf,
        stage_iterations: sol.stages.iter().map(|s| s.iterations).collect(),
        wall_time: start.elapsed().as_secs_f64(),
    };
    log::info!("level={level} cells={} h={:.6e} e1={e1:.6e} einf={einf:.6e}", report.n_cells, report.h);
    Ok(LevelOutcome { mesh, u: sol.u, exact, stages: sol.stages, report })
}

/// Solves every level and reports errors and convergence orders.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<ErrorReport> {
    if cfg.levels.is_empty() {
        return Err(Error::Config("a study needs at least one level".into()));
    }
    let gamma = Gamma::new(cfg.problem.gamma.clone(), cfg.problem.domain)?;
    let finest = cfg.levels.iter().map(|l| l.resolution).max().unwrap_or(1);
    let spacing = cfg.problem.domain.outer().extent().max() / finest as f64 * cfg.oracle_refinement;
    let oracle = Oracle::for_gamma(&gamma, spacing)?;
    let mut levels = Vec::with_capacity(cfg.levels.len());
    for (i, spec) in cfg.levels.iter().enumerate() {
        levels.push(run_level(&cfg.problem, &gamma, &oracle, i + 1, spec, &cfg.schedule, &cfg.solver)?.report);
    }
    let (eoc_l1, eoc_linf) = if levels.len() >= 2 {
        let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
        let e1: Vec<f64> = levels.iter().map(|l| l.e1).collect();
        let einf: Vec<f64> = levels.iter().map(|l| l.einf).collect();
        (compute_eoc(&e1, &h)?, compute_eoc(&einf, &h)?)
    } else {
        (vec![], vec![])
    };
    Ok(ErrorReport { label: cfg.label.clone(), oracle: oracle.name().into(), levels, eoc_l1, eoc_linf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eoc_examples() {
        let eoc = compute_eoc(&[2.00e-3, 5.79e-4], &[9.91e-2, 5.63e-2]).unwrap();
        assert!((eoc[0] - 2.20).abs() <= 0.01, "{}", eoc[0]);
        assert_relative_eq!(compute_eoc(&[1.0, 0.5], &[0.2, 0.1]).unwrap()[0], 1.0);
        assert_eq!(compute_eoc(&[3.0, 3.0], &[0.2, 0.1]).unwrap()[0], 0.0);
        assert!(compute_eoc(&[1.0], &[0.1]).is_err());
        assert!(compute_eoc(&[1.0, 0.0], &[0.2, 0.1]).is_err());
    }

    #[test]
    fn every_preset_builds_a_valid_gamma() {
        for ex in Example::ALL {
            let p = ex.problem();
            let g = Gamma::new(p.gamma.clone(), p.domain);
            assert!(g.is_ok(), "{ex}: {g:?}");
        }
        assert_eq!("ex9".parse::<Example>().unwrap(), Example::Ex9);
        assert!("ex11".parse::<Example>().is_err());
    }

    #[test]
    fn error_norms_skip_pinned_cells() {
        let m =
            generate_box_hex_mesh(&Domain::Box(Aabb::new(Vec3::zeros(), Vec3::new(2.0, 1.0, 1.0))), [2, 1, 1]).unwrap();
        let seeds = SeedSet::from_values(m.n_cells(), [(0, 0.0)]);
        let (e1, einf) = error_norms(&m, &[5.0, 1.5], &[0.0, 1.0], &seeds);
        assert_relative_eq!(e1, 0.5);
        assert_relative_eq!(einf, 0.5);
    }

    #[test]
    fn level_mesh_aligns_with_the_cut() {
        let p = Example::Ex3.problem();
        let g = Gamma::new(p.gamma.clone(), p.domain).unwrap();
        let m = level_mesh(&p, &g, &LevelSpec { resolution: 12, perturbation: None }).unwrap();
        assert_relative_eq!(m.total_volume(), p.domain.volume(), max_relative = 1e-12);
    }

    #[test]
    fn single_level_study_has_no_eoc() {
        let cfg = StudyConfig {
            label: "EX1".into(),
            problem: Example::Ex1.problem(),
            levels: vec![LevelSpec { resolution: 8, perturbation: None }],
            schedule: StageSchedule::default(),
            solver: SolverConfig::default(),
            oracle_refinement: 0.5,
        };
        let r = run_convergence_study(&cfg).unwrap();
        assert_eq!(r.levels.len(), 1);
        assert!(r.eoc_l1.is_empty());
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("1,EX1,euclidean,1,512,"));
    }
}
