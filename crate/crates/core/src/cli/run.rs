//! Scenario execution and output files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::io::{save_field, write_pgm};
use super::scenario::{expected_counts, ExpectedCounts, Experiment, Scenario};
use crate::error::{Error, Result};
use crate::geometry::{sector_mask, Direction, NodeMask, SectorPart, SectorSpec};
use crate::grid::{angular_derivative, build_laplacian, Field, PolarGrid};
use crate::nonlin::Nonlinearity;
use crate::solvers::{
    distinctness, energy, least_energy_over, newton_solve, residual_norm, resolve_seed, solve_radial, Mode, SolveResult,
};
use crate::spectra::{linearized_operator, morse_index, smallest_eigs, MorseReport, Subspace};
use crate::symmetry::{classify, difference_field, residual_l_e, xi_h_diagnostic, SymmetryReport};

/// Directions sampled for the `L_e w_e` residual of classified runs.
pub const RESIDUAL_DIRECTIONS: usize = 8;

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub seed_rng: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenList {
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionResidual {
    pub m: usize,
    pub psi: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RunRecord {
    pub name: String,
    pub k: Option<usize>,
    pub status: String,
    pub error: Option<String>,
    pub provenance: Option<String>,
    pub energy: Option<f64>,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    pub constraint_residuals: Vec<f64>,
    pub angular_ratio: Option<f64>,
    pub morse_full: Option<MorseReport>,
    pub morse_k: Option<MorseReport>,
    pub spectrum_full: Option<EigenList>,
    pub spectrum_k: Option<EigenList>,
    pub classification: Option<SymmetryReport>,
    pub residual_l_e: Vec<DirectionResidual>,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiplicityRecord {
    pub labels: Vec<String>,
    /// Symmetrized relative distance up to rotations; zero diagonal.
    pub distance: Vec<Vec<f64>>,
    pub distinct: Vec<Vec<bool>>,
    pub count_distinct: usize,
    pub expected: ExpectedCounts,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementSeries {
    pub label: String,
    pub values: Vec<f64>,
    /// `(λ_0 - λ_1) / (λ_1 - λ_2)` over the three levels.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementRecord {
    pub levels: Vec<(usize, usize)>,
    pub series: Vec<RefinementSeries>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub scenario_hash: String,
    pub seed_rng: u64,
    pub scenario: Scenario,
    pub runs: Vec<RunRecord>,
    pub multiplicity: Option<MultiplicityRecord>,
    pub refinement: Option<RefinementRecord>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub manifest: Manifest,
    pub timings: Vec<(String, f64)>,
    pub failed: usize,
}

#[derive(Clone, Copy, Debug)]
enum Job {
    Radial,
    K(usize),
    Refinement,
}

impl Job {
    fn name(&self) -> String {
        match self {
            Job::Radial => "radial".into(),
            Job::K(k) => format!("k{k}"),
            Job::Refinement => "refinement".into(),
        }
    }
}

enum JobOutput {
    Run(Box<RunRecord>, Option<SolveResult>),
    Refinement(RefinementRecord),
}

fn grid_of(sc: &Scenario) -> Result<Arc<PolarGrid>> {
    Ok(Arc::new(PolarGrid::new(sc.domain, sc.grid.n_r, sc.grid.n_theta)?))
}

fn solve_power(sc: &Scenario, grid: &Arc<PolarGrid>, k: usize) -> Result<SolveResult> {
    least_energy_over(&sc.nonlinearity, grid, &sc.seeds_for(k), k, sc.mode, &sc.solver)
}

/// Newton from every seed, keeping the lowest-energy converged result.
fn solve_newton(sc: &Scenario, grid: &Arc<PolarGrid>, k: usize) -> Result<SolveResult> {
    let mut best: Option<SolveResult> = None;
    let mut last = None;
    for seed in sc.seeds_for(k) {
        let r = resolve_seed(seed, grid, &sc.nonlinearity, sc.mode)
            .and_then(|init| newton_solve(&sc.nonlinearity, &init, k, &sc.solver.newton));
        match r {
            Ok(mut r) => {
                r.provenance = format!("newton from {seed}");
                if best.as_ref().is_none_or(|b| r.energy < b.energy) {
                    best = Some(r);
                }
            }
            Err(e) => last = Some(e),
        }
    }
    best.ok_or_else(|| last.unwrap_or_else(|| Error::Unsupported("no seeds".into())))
}

fn radial_solution(sc: &Scenario, grid: &Arc<PolarGrid>) -> Result<SolveResult> {
    let zeros = usize::from(sc.mode == Mode::Nodal);
    let prof = solve_radial(&sc.domain, &sc.nonlinearity, zeros, grid.n_r())?;
    let u = prof.lift(grid)?;
    Ok(SolveResult {
        energy: energy(&sc.nonlinearity, &u)?,
        residual: residual_norm(&sc.nonlinearity, &u)?,
        iterations: 0,
        constraint_residuals: crate::solvers::nehari_residuals(&sc.nonlinearity, &u, sc.mode)?,
        provenance: "radial shooting".into(),
        trace: vec![],
        u,
    })
}

fn eigen_list(a: &crate::grid::OperatorMatrix, g: &Arc<PolarGrid>, n: usize, sub: Subspace) -> Result<EigenList> {
    let s = smallest_eigs(a, g, n.min(a.dim()), sub)?;
    Ok(EigenList { eigenvalues: s.eigenvalues, residuals: s.residuals })
}

fn rel(dir: &Path, root: &Path) -> String {
    dir.strip_prefix(root).unwrap_or(dir).to_string_lossy().into_owned()
}

fn save_with_heatmap(field: &Field, dir: &Path, root: &Path, name: &str, files: &mut Vec<String>) -> Result<()> {
    let header = save_field(field, dir, name)?;
    let pgm = dir.join(format!("{name}.pgm"));
    write_pgm(field, &pgm)?;
    files.push(rel(&header, root));
    files.push(rel(&header.with_extension("f64"), root));
    files.push(rel(&pgm, root));
    Ok(())
}

fn residual_directions(seed: u64, k: usize, n_theta: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    (0..RESIDUAL_DIRECTIONS).map(|_| rng.random_range(0..2 * n_theta)).collect()
}

fn run_solution_job(sc: &Scenario, job: Job, opts: &RunOptions, rec: &mut RunRecord) -> Result<Option<SolveResult>> {
    let grid = grid_of(sc)?;
    let nl: &Nonlinearity = &sc.nonlinearity;
    let sol = match job {
        Job::Radial => radial_solution(sc, &grid)?,
        Job::K(k) if nl.exponent().is_some() => solve_power(sc, &grid, k)?,
        Job::K(k) => solve_newton(sc, &grid, k)?,
        Job::Refinement => unreachable!("refinement has no solution"),
    };
    rec.provenance = Some(sol.provenance.clone());
    rec.energy = Some(sol.energy);
    rec.residual = Some(sol.residual);
    rec.iterations = Some(sol.iterations);
    rec.constraint_residuals = sol.constraint_residuals.clone();
    let un = sol.u.sup_norm();
    rec.angular_ratio = Some(if un == 0.0 { 0.0 } else { angular_derivative(&sol.u).sup_norm() / un });

    let dir = opts.out.join(job.name());
    std::fs::create_dir_all(&dir)?;
    save_with_heatmap(&sol.u, &dir, &opts.out, "u", &mut rec.files)?;

    rec.morse_full = Some(morse_index(&sol.u, nl, None)?);
    let Job::K(k) = job else {
        return Ok(Some(sol));
    };
    rec.morse_k = Some(morse_index(&sol.u, nl, Some(k))?);

    match sc.experiment {
        Experiment::Spectrum => {
            let a = linearized_operator(&sol.u, nl, &NodeMask::whole(&grid))?;
            rec.spectrum_full = Some(eigen_list(&a, &grid, sc.n_eigs, Subspace::Full)?);
            rec.spectrum_k = Some(eigen_list(&a, &grid, sc.n_eigs, Subspace::KInvariant(k))?);
        }
        Experiment::Classify | Experiment::XiDiagnostic => {
            let mut report = classify(&sol.u, nl, k, &sc.tolerances)?;
            let e = Direction::lattice(report.scan.best as i64, grid.n_theta());
            save_with_heatmap(&difference_field(&sol.u, &e)?, &dir, &opts.out, "w_star", &mut rec.files)?;
            for m in residual_directions(opts.seed_rng, k, grid.n_theta()) {
                let e = Direction::lattice(m as i64, grid.n_theta());
                rec.residual_l_e.push(DirectionResidual {
                    m,
                    psi: e.psi(),
                    residual: residual_l_e(&sol.u, nl, &e, k)?,
                });
            }
            if sc.experiment == Experiment::XiDiagnostic {
                let xi = xi_h_diagnostic(&sol.u, nl, k)?;
                let mut csv = String::from("psi,h\n");
                for s in &xi.samples {
                    writeln!(csv, "{},{}", s.psi, s.h).expect("string write");
                }
                let path = dir.join("h_profile.csv");
                std::fs::write(&path, csv)?;
                rec.files.push(rel(&path, &opts.out));
                report.h_samples = Some(xi);
            }
            rec.classification = Some(report);
        }
        _ => {}
    }
    Ok(Some(sol))
}

fn refinement(sc: &Scenario) -> Result<RefinementRecord> {
    let levels: Vec<(usize, usize)> = [4, 2, 1].iter().map(|d| (sc.grid.n_r / d, sc.grid.n_theta / d)).collect();
    let mut series = vec![RefinementSeries { label: "full".into(), values: vec![], ratio: f64::NAN }];
    for &k in &sc.k_list {
        series.push(RefinementSeries { label: format!("sector k={k}"), values: vec![], ratio: f64::NAN });
    }
    for &(n_r, n_theta) in &levels {
        let g = Arc::new(PolarGrid::new(sc.domain, n_r, n_theta)?);
        let a = build_laplacian(&g, &NodeMask::whole(&g))?;
        series[0].values.push(smallest_eigs(&a, &g, 1, Subspace::Full)?.eigenvalues[0]);
        for (t, &k) in sc.k_list.iter().enumerate() {
            let spec = SectorSpec::new(k, Direction::new(0.0), SectorPart::Plus);
            let mask = sector_mask(&g, &spec)?;
            let a = build_laplacian(&g, &mask.interior)?;
            series[t + 1].values.push(smallest_eigs(&a, &g, 1, Subspace::Sector(spec))?.eigenvalues[0]);
        }
    }
    for s in &mut series {
        let v = &s.values;
        s.ratio = (v[0] - v[1]) / (v[1] - v[2]);
    }
    Ok(RefinementRecord { levels, series })
}

fn run_job(sc: &Scenario, job: Job, opts: &RunOptions) -> JobOutput {
    if let Job::Refinement = job {
        return match refinement(sc) {
            Ok(r) => JobOutput::Refinement(r),
            Err(e) => JobOutput::Run(
                Box::new(RunRecord {
                    name: job.name(),
                    status: "failed".into(),
                    error: Some(e.to_string()),
                    ..Default::default()
                }),
                None,
            ),
        };
    }
    let mut rec =
        RunRecord { name: job.name(), k: if let Job::K(k) = job { Some(k) } else { None }, ..Default::default() };
    match run_solution_job(sc, job, opts, &mut rec) {
        Ok(sol) => {
            rec.status = "ok".into();
            JobOutput::Run(Box::new(rec), sol)
        }
        Err(e) => {
            rec.status = "failed".into();
            rec.error = Some(e.to_string());
            JobOutput::Run(Box::new(rec), None)
        }
    }
}

fn multiplicity(sc: &Scenario, runs: &[(RunRecord, Option<SolveResult>)]) -> MultiplicityRecord {
    let ok: Vec<(&str, &SolveResult)> =
        runs.iter().filter_map(|(r, s)| s.as_ref().map(|s| (r.name.as_str(), s))).collect();
    let n = ok.len();
    let mut distance = vec![vec![0.0; n]; n];
    let mut distinct = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let a = distinctness(ok[i].1, ok[j].1);
            let b = distinctness(ok[j].1, ok[i].1);
            let d = a.distance.max(b.distance);
            let x = a.distinct || b.distinct;
            distance[i][j] = d;
            distance[j][i] = d;
            distinct[i][j] = x;
            distinct[j][i] = x;
        }
    }
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..n {
        if kept.iter().all(|&j| distinct[i][j]) {
            kept.push(i);
        }
    }
    let expected = expected_counts(sc.k_max(), &sc.nonlinearity);
    MultiplicityRecord {
        labels: ok.iter().map(|(l, _)| l.to_string()).collect(),
        distance,
        distinct,
        count_distinct: kept.len(),
        certified: kept.len() >= expected.rotational,
        expected,
    }
}

fn csv_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const SUMMARY_HEADER: &str = "run,k,energy,residual,m_full,m_k,verdict,psi_star,lambda1_plus,lambda1_minus";

pub fn summary_csv(runs: &[RunRecord]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in runs {
        let c = r.classification.as_ref();
        let verdict = match (&r.status[..], c) {
            ("ok", Some(c)) => c.verdict.label().to_string(),
            ("ok", None) => String::new(),
            _ => "failed".into(),
        };
        let row = [
            r.name.clone(),
            csv_opt(r.k),
            csv_opt(r.energy),
            csv_opt(r.residual),
            csv_opt(r.morse_full.as_ref().map(|m| m.index)),
            csv_opt(r.morse_k.as_ref().map(|m| m.index)),
            verdict,
            csv_opt(c.map(|c| c.scan.psi_star)),
            csv_opt(c.map(|c| c.lambda1_plus)),
            csv_opt(c.map(|c| c.lambda1_minus)),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Runs every job of the scenario, writes `report.json`, `timings.json` and
/// `summary.csv` under `opts.out`, and returns the manifest.
pub fn run_scenario(sc: &Scenario, hash: &str, opts: &RunOptions) -> Result<Outcome> {
    sc.validate()?;
    std::fs::create_dir_all(&opts.out)?;
    let jobs: Vec<Job> = match sc.experiment {
        Experiment::Refinement => vec![Job::Refinement],
        Experiment::Multiplicity => std::iter::once(Job::Radial).chain(sc.k_list.iter().map(|&k| Job::K(k))).collect(),
        _ => sc.k_list.iter().map(|&k| Job::K(k)).collect(),
    };
    let start = Instant::now();
    let timed = |job: &Job| {
        let t = Instant::now();
        let out = run_job(sc, *job, opts);
        (job.name(), t.elapsed().as_secs_f64(), out)
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| Error::config("--workers", e.to_string()))?;
    let results: Vec<(String, f64, JobOutput)> = pool.install(|| jobs.par_iter().map(timed).collect());

    let mut timings = Vec::new();
    let mut runs = Vec::new();
    let mut refinement = None;
    for (name, secs, out) in results {
        timings.push((name, secs));
        match out {
            JobOutput::Run(r, s) => runs.push((*r, s)),
            JobOutput::Refinement(r) => refinement = Some(r),
        }
    }
    timings.push(("total".into(), start.elapsed().as_secs_f64()));
    let multiplicity = (sc.experiment == Experiment::Multiplicity).then(|| multiplicity(sc, &runs));
    let failed = runs.iter().filter(|(r, _)| r.status != "ok").count();
    let records: Vec<RunRecord> = runs.into_iter().map(|(r, _)| r).collect();

    let manifest = Manifest {
        tool: "ksym".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario_hash: hash.into(),
        seed_rng: opts.seed_rng,
        scenario: sc.clone(),
        runs: records,
        multiplicity,
        refinement,
    };
    std::fs::write(opts.out.join("report.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    let tj: serde_json::Map<String, serde_json::Value> =
        timings.iter().map(|(n, s)| (n.clone(), (*s).into())).collect();
    std::fs::write(opts.out.join("timings.json"), serde_json::to_string_pretty(&tj)? + "\n")?;
    if sc.experiment != Experiment::Refinement {
        std::fs::write(opts.out.join("summary.csv"), summary_csv(&manifest.runs))?;
    }
    Ok(Outcome { manifest, timings, failed })
}
