//! Staged regularization: a Poisson-like first stage followed by stages
//! with `eps_n = h^(n/2)`, each iterated by deferred correction until the
//! mean absolute residual drops below `eta`.

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_matrix, assemble_rhs, compute_fluxes, AssemblyGeometry, FluxField};
use crate::gamma::{build_dirichlet, DirichletData, Gamma};
use crate::gradient::{cell_gradient_wls, face_gradient_beta, inflow_gradients};
use crate::linsolve::{outer_residual, solve, CsrMatrix, Method, PrecondKind, SolverConfig};
use crate::mesh::PolyMesh;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageSchedule {
    /// Number of stages `N`.
    pub stages: usize,
    /// Outer stopping threshold on the mean absolute residual.
    pub eta: f64,
    /// Inner iteration cap per stage.
    pub k_max: usize,
}

impl Default for StageSchedule {
    fn default() -> Self {
        StageSchedule { stages: 5, eta: 1e-8, k_max: 200 }
    }
}

impl StageSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.stages < 1 {
            return Err(Error::Config("at least one stage is required".into()));
        }
        if !(self.eta > 0.0) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.k_max < 1 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        Ok(())
    }

    /// `eps_n = h^(n/2)`.
    pub fn eps(&self, h: f64, n: usize) -> f64 {
        h.powf(0.5 * n as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageDiagnostics {
    pub stage: usize,
    pub eps: f64,
    /// `K_n`.
    pub iterations: usize,
    /// `rho^{n,k}` for `k = 1..=K_n`; empty for the first stage.
    pub residuals: Vec<f64>,
    pub linear_iterations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub u: Vec<f64>,
    pub stages: Vec<StageDiagnostics>,
    /// `u^n` after every stage, in order.
    pub stage_fields: Vec<Vec<f64>>,
    /// Smallest value of the final field.
    pub min_value: f64,
}

impl Solution {
    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.iterations).sum()
    }
}

fn linear_solve(a: &CsrMatrix, b: &[f64], x: &mut [f64], cfg: &SolverConfig) -> Result<usize> {
    let start = x.to_vec();
    match solve(a, b, x, cfg) {
        Ok(stats) => Ok(stats.iterations),
        Err(Error::LinearSolver { iterations, residual }) => {
            log::warn!("linear solver stalled after {iterations} iterations at {residual:.3e}, retrying with GMRES");
            x.copy_from_slice(&start);
            let fallback = SolverConfig {
                method: Method::Gmres,
                preconditioner: PrecondKind::Ilu0,
                restart: cfg.restart.max(100),
                max_iter: Some(cfg.max_iterations(a.n()) * 4),
                ..*cfg
            };
            solve(a, b, x, &fallback).map(|s| iterations + s.iterations)
        }
        Err(e) => Err(e),
    }
}

/// First stage: with a zero initial field every gradient and flux vanishes,
/// leaving `-eps Δu = 1` with the Dirichlet data and zero normal derivative
/// elsewhere. One linear solve.
pub fn run_stage1(
    mesh: &PolyMesh,
    geom: &AssemblyGeometry,
    dirichlet: &DirichletData,
    eps: f64,
    solver: &SolverConfig,
) -> Result<(Vec<f64>, usize)> {
    if dirichlet.seeds.is_empty() {
        return Err(Error::NoDirichletData);
    }
    let flux = FluxField::zeros(mesh.n_tris());
    let zero = vec![Vec3::zeros(); mesh.n_cells()];
    let a = assemble_matrix(mesh, geom, dirichlet, eps, &flux)?;
    let f = assemble_rhs(mesh, geom, dirichlet, eps, &flux, &zero, &zero);
    let mut u = vec![0.0; mesh.n_cells()];
    let iters = linear_solve(&a, &f, &mut u, solver)?;
    log::info!("stage=1 k=1 eps={eps:.6e} linear_iters={iters}");
    Ok((u, iters))
}

/// Explicit data of the iterate `u` for frozen fluxes: the right-hand side.
fn rhs_for(
    mesh: &PolyMesh,
    geom: &AssemblyGeometry,
    dirichlet: &DirichletData,
    eps: f64,
    flux: &FluxField,
    u: &[f64],
) -> Vec<f64> {
    let grads = cell_gradient_wls(mesh, u, &dirichlet.boundary).grads;
    let beta = face_gradient_beta(mesh, &grads);
    let inflow = inflow_gradients(mesh, &beta, &flux.mu, &dirichlet.boundary);
    assemble_rhs(mesh, geom, dirichlet, eps, flux, &grads, &inflow)
}

/// Fluxes frozen for one stage, from the previous stage's field.
pub fn stage_fluxes(mesh: &PolyMesh, dirichlet: &DirichletData, u: &[f64]) -> FluxField {
    let grads = cell_gradient_wls(mesh, u, &dirichlet.boundary).grads;
    compute_fluxes(mesh, &face_gradient_beta(mesh, &grads))
}

/// Runs all stages on prepared Dirichlet data.
pub fn run_algorithm(
    mesh: &PolyMesh,
    dirichlet: &DirichletData,
    schedule: &StageSchedule,
    solver: &SolverConfig,
) -> Result<Solution> {
    schedule.validate()?;
    let geom = AssemblyGeometry::new(mesh)?;
    let h = mesh.h();
    let red = solver.reduction;

    let eps1 = schedule.eps(h, 1);
    let (mut u, iters) = run_stage1(mesh, &geom, dirichlet, eps1, solver)?;
    let mut stages = vec![StageDiagnostics {
        stage: 1,
        eps: eps1,
        iterations: 1,
        residuals: vec![],
        linear_iterations: vec![iters],
    }];
    let mut stage_fields = vec![u.clone()];

    for n in 2..=schedule.stages {
        let eps = schedule.eps(h, n);
        let flux = stage_fluxes(mesh, dirichlet, &u);
        let a = assemble_matrix(mesh, &geom, dirichlet, eps, &flux)?;
        let mut f = rhs_for(mesh, &geom, dirichlet, eps, &flux, &u);
        let mut diag = StageDiagnostics { stage: n, eps, iterations: 0, residuals: vec![], linear_iterations: vec![] };
        loop {
            let k = diag.iterations + 1;
            let iters = linear_solve(&a, &f, &mut u, solver)?;
            f = rhs_for(mesh, &geom, dirichlet, eps, &flux, &u);
            let rho = outer_residual(&a, &f, &u, red);
            log::info!("stage={n} k={k} rho={rho:.6e} linear_iters={iters}");
            diag.iterations = k;
            diag.residuals.push(rho);
            diag.linear_iterations.push(iters);
            if rho < schedule.eta {
                break;
            }
            if k >= schedule.k_max {
                return Err(Error::StageNotConverged { stage: n, iterations: k, residual: rho });
            }
        }
        stages.push(diag);
        stage_fields.push(u.clone());
    }

    let min_value = u.iter().copied().fold(f64::INFINITY, f64::min);
    if min_value < -1e-9 * h {
        log::warn!("final field has negative values down to {min_value:.3e}");
    }
    Ok(Solution { u, stages, stage_fields, min_value })
}

/// Builds the Dirichlet data for `gamma` and runs all stages.
pub fn solve_distance(
    mesh: &PolyMesh,
    gamma: &Gamma,
    schedule: &StageSchedule,
    solver: &SolverConfig,
) -> Result<(DirichletData, Solution)> {
    let dirichlet = build_dirichlet(mesh, gamma)?;
    let sol = run_algorithm(mesh, &dirichlet, schedule, solver)?;
    Ok((dirichlet, sol))
}
