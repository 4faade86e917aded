use std::fmt::Write as _;
use std::io::{BufReader, Read};
use std::path::Path;

use anyhow::{bail, Context, Result};
use eikonal_fv::assembly::{assemble, AssemblyGeometry};
use eikonal_fv::config::RunConfig;
use eikonal_fv::driver::{run_algorithm, stage_fluxes};
use eikonal_fv::gamma::{build_dirichlet, Gamma};
use eikonal_fv::gradient::{cell_gradient_wls, face_gradient_beta, inflow_gradients};
use eikonal_fv::mesh::io::{read_polymesh, write_polymesh, Encoding};
use eikonal_fv::mesh::PolyMesh;
use eikonal_fv::study::{error_norms, level_mesh, run_convergence_study, LevelSpec, Oracle, Problem};
use eikonal_fv::vtk::write_vtk;
use eikonal_fv::Vec3;

fn create_output_dir(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))
}

fn load_or_generate(cfg: &RunConfig, problem: &Problem, gamma: &Gamma) -> Result<PolyMesh> {
    match &cfg.mesh_file {
        Some(path) => Ok(read_polymesh(path)?),
        None => {
            let resolution = *cfg.level_resolutions().last().expect("at least one level");
            Ok(level_mesh(problem, gamma, &LevelSpec { resolution, perturbation: cfg.perturbation })?)
        }
    }
}

pub fn solve(cfg: &RunConfig, dump_matrix: Option<&Path>) -> Result<()> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    let gamma = Gamma::new(problem.gamma.clone(), problem.domain)?;
    let mesh = load_or_generate(cfg, &problem, &gamma)?;
    log::info!("cells={} faces={} h={:.6e}", mesh.n_cells(), mesh.n_faces(), mesh.h());
    let dirichlet = build_dirichlet(&mesh, &gamma)?;
    let solver = cfg.solver_config();
    let sol = run_algorithm(&mesh, &dirichlet, &cfg.schedule, &solver)?;
    create_output_dir(cfg)?;

    let oracle = Oracle::for_gamma(&gamma, mesh.h() * cfg.oracle_refinement)?;
    let exact = oracle.distances(mesh.cell_centers())?;
    let error: Vec<f64> = sol.u.iter().zip(&exact).map(|(u, e)| u - e).collect();
    let pinned: Vec<f64> = (0..mesh.n_cells()).map(|p| f64::from(u8::from(dirichlet.seeds.is_pinned(p)))).collect();
    let vtk = cfg.output_dir.join("solution.vtk");
    write_vtk(&mesh, &[("u", &sol.u), ("exact", &exact), ("error", &error), ("pinned", &pinned)], &vtk)?;

    let mut stages = String::from("stage,eps,iterations,final_rho,linear_iterations\n");
    for s in &sol.stages {
        let rho = s.residuals.last().map(|r| format!("{r:.16e}")).unwrap_or_default();
        let lin: Vec<String> = s.linear_iterations.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(stages, "{},{:.16e},{},{},{}", s.stage, s.eps, s.iterations, rho, lin.join(";"));
    }
    std::fs::write(cfg.output_dir.join("stages.csv"), stages)?;

    if let Some(path) = dump_matrix {
        let n = sol.stage_fields.len();
        let eps = cfg.schedule.eps(mesh.h(), n);
        let prev = if n >= 2 { &sol.stage_fields[n - 2] } else { &sol.u };
        let flux = if n >= 2 {
            stage_fluxes(&mesh, &dirichlet, prev)
        } else {
            eikonal_fv::assembly::FluxField::zeros(mesh.n_tris())
        };
        let grads = cell_gradient_wls(&mesh, &sol.u, &dirichlet.boundary).grads;
        let beta = face_gradient_beta(&mesh, &grads);
        let inflow = inflow_gradients(&mesh, &beta, &flux.mu, &dirichlet.boundary);
        let geom = AssemblyGeometry::new(&mesh)?;
        let sys = assemble(&mesh, &geom, &dirichlet, eps, &flux, &grads, &inflow)?;
        sys.dump_matrix(path)?;
        log::info!("matrix written to {}", path.display());
    }

    let (e1, einf) = error_norms(&mesh, &sol.u, &exact, &dirichlet.seeds);
    let ks: Vec<String> = sol.stages.iter().map(|s| s.iterations.to_string()).collect();
    println!("cells        {}", mesh.n_cells());
    println!("h            {:.6e}", mesh.h());
    println!("pinned       {}", dirichlet.seeds.len());
    println!("K_n          {}", ks.join(" "));
    println!("E1 ({})  {e1:.6e}", oracle.name());
    println!("Einf         {einf:.6e}");
    println!("output       {}", vtk.display());
    Ok(())
}

pub fn study(cfg: &RunConfig) -> Result<()> {
    let study = cfg.study_config()?;
    let report = run_convergence_study(&study)?;
    create_output_dir(cfg)?;
    std::fs::write(cfg.output_dir.join("report.csv"), report.to_csv())?;
    let table = report.to_table();
    std::fs::write(cfg.output_dir.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn mesh_generate(cfg: &RunConfig, file: &Path, binary: bool, vtk: Option<&Path>) -> Result<()> {
    let problem = cfg.problem()?;
    let gamma = Gamma::new(problem.gamma.clone(), problem.domain)?;
    let mesh = load_or_generate(&RunConfig { mesh_file: None, ..cfg.clone() }, &problem, &gamma)?;
    let encoding = if binary { Encoding::Binary } else { Encoding::Ascii };
    write_polymesh(&mesh, file, encoding)?;
    if let Some(path) = vtk {
        write_vtk(&mesh, &[], path)?;
    }
    println!("wrote {} cells to {}", mesh.n_cells(), file.display());
    Ok(())
}

pub fn mesh_inspect(file: &Path) -> Result<()> {
    let mesh = read_polymesh(file)?;
    let vols = mesh.cell_volumes();
    let (vmin, vmax) = vols.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    println!("cells          {}", mesh.n_cells());
    println!("faces          {}", mesh.n_faces());
    println!("boundary faces {}", mesh.boundary_faces().count());
    println!("triangles      {}", mesh.n_tris());
    println!("h              {:.6e}", mesh.h());
    println!("volume         {:.16e}", mesh.total_volume());
    println!("cell volume    min {vmin:.6e} max {vmax:.6e}");
    println!("non-planarity  {:.6e}", mesh.max_face_nonplanarity());
    Ok(())
}

fn parse_points(text: &str) -> Result<Vec<Vec3>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("line {}: expected three numbers", i + 1))?;
        if v.len() != 3 {
            bail!("line {}: expected three numbers, got {}", i + 1, v.len());
        }
        out.push(Vec3::new(v[0], v[1], v[2]));
    }
    Ok(out)
}

pub fn oracle(cfg: &RunConfig, points: Option<&Path>, spacing: Option<f64>) -> Result<()> {
    let problem = cfg.problem()?;
    let gamma = Gamma::new(problem.gamma.clone(), problem.domain)?;
    let text = match points {
        Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None => {
            let mut s = String::new();
            BufReader::new(std::io::stdin().lock()).read_to_string(&mut s)?;
            s
        }
    };
    let pts = parse_points(&text)?;
    let spacing = spacing.unwrap_or_else(|| problem.domain.outer().extent().max() / 128.0);
    let oracle = Oracle::for_gamma(&gamma, spacing)?;
    let d = oracle.distances(&pts)?;
    for (p, v) in pts.iter().zip(d) {
        println!("{:.16e} {:.16e} {:.16e} {v:.16e}", p.x, p.y, p.z);
    }
    Ok(())
}
