//! Acceptance criteria, one line per criterion. Runs without the libtest
//! harness so the summary is always printed; exits non-zero if any
//! criterion fails. `cargo test --test acceptance -- 4 7` runs a subset.

mod common;

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ksym::cli::{load_field, run_scenario, save_field, scenario_hash, RunOptions, Scenario};
use ksym::geometry::{reflect_node, sector_mask, Direction, DomainSpec, NodeMask, SectorPart, SectorSpec};
use ksym::grid::{angular_derivative, build_laplacian, Field, PolarGrid};
use ksym::nonlin::{comparison_potentials, Nonlinearity};
use ksym::solvers::{
    distinctness, energy, least_energy, nehari_from_seed, newton_solve, solve_radial, Mode, NehariOptions,
    NewtonOptions, Seed, SolveResult,
};
use ksym::spectra::{morse_index, smallest_eigs, Subspace};
use ksym::symmetry::{classify, difference_field, residual_l_e, split_fields, xi_h_diagnostic, Tolerances};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Checks = Vec<(bool, String)>;

fn check(checks: &mut Checks, ok: bool, msg: String) {
    checks.push((ok, msg));
}

fn grid(d: DomainSpec, n_r: usize, n_theta: usize) -> Arc<PolarGrid> {
    Arc::new(PolarGrid::new(d, n_r, n_theta).unwrap())
}

fn disk() -> DomainSpec {
    DomainSpec::disk(1.0).unwrap()
}

fn annulus() -> DomainSpec {
    DomainSpec::annulus(0.5, 1.0).unwrap()
}

fn angular_ratio(u: &Field) -> f64 {
    angular_derivative(u).sup_norm() / u.sup_norm()
}

fn radial_result(d: DomainSpec, nl: &Nonlinearity, g: &Arc<PolarGrid>) -> SolveResult {
    let u = solve_radial(&d, nl, 0, g.n_r()).unwrap().lift(g).unwrap();
    SolveResult {
        energy: energy(nl, &u).unwrap(),
        residual: 0.0,
        iterations: 0,
        constraint_residuals: vec![],
        provenance: "radial".into(),
        trace: vec![],
        u,
    }
}

fn dirichlet_lambda1(d: DomainSpec, n: usize, half_disk: bool) -> f64 {
    let g = grid(d, n, n);
    if half_disk {
        let s = SectorSpec::new(1, Direction::new(0.0), SectorPart::Plus);
        let m = sector_mask(&g, &s).unwrap();
        let a = build_laplacian(&g, &m.interior).unwrap();
        smallest_eigs(&a, &g, 1, Subspace::Sector(s)).unwrap().eigenvalues[0]
    } else {
        let a = build_laplacian(&g, &NodeMask::whole(&g)).unwrap();
        smallest_eigs(&a, &g, 1, Subspace::Full).unwrap().eigenvalues[0]
    }
}

fn c1_spectral_fidelity() -> Checks {
    let mut out = Checks::new();
    for (half, n, name) in [(false, 0u32, "disk"), (true, 1, "half-disk")] {
        let j = common::bessel_zero(n);
        let exact = j * j;
        let v: Vec<f64> = [32, 64, 128].iter().map(|&n| dirichlet_lambda1(disk(), n, half)).collect();
        let rel = (v[2] - exact).abs() / exact;
        check(&mut out, rel < 0.01, format!("{name}: λ₁ = {:.6} vs j²_{n},1 = {exact:.6} (rel {rel:.2e})", v[2]));
        let ratio = (v[0] - v[1]) / (v[1] - v[2]);
        check(&mut out, (3.5..=4.5).contains(&ratio), format!("{name}: refinement ratio {ratio:.3}"));
    }
    out
}

fn c2_newton_vs_shooting() -> Checks {
    let mut out = Checks::new();
    for (d, name) in [(disk(), "disk"), (annulus(), "annulus")] {
        let g = grid(d, 32, 64);
        let (r0, r1) = (d.r_inner, d.r_outer);
        for p in [2.0, 3.0, 5.0] {
            let nl = Nonlinearity::LaneEmden { p };
            let reference = solve_radial(&d, &nl, 0, g.n_r()).unwrap().lift(&g).unwrap();
            let bump = Field::from_fn(&g, |r, _| 1.0 + 0.1 * (std::f64::consts::PI * (r - r0) / (r1 - r0)).sin());
            let init = reference.zip_with(&bump, |a, b| a * b);
            let sol = newton_solve(&nl, &init, 1, &NewtonOptions::default()).unwrap();
            let err = sol.u.sub(&reference).sup_norm() / reference.sup_norm();
            check(&mut out, err < 1e-6, format!("{name} p={p}: relative L∞ gap {err:.2e}"));
        }
    }
    out
}

fn c3_morse_contracts() -> Checks {
    let mut out = Checks::new();
    let nl = Nonlinearity::LaneEmden { p: 3.0 };
    for (d, name) in [(disk(), "disk"), (annulus(), "annulus")] {
        let g = grid(d, 32, 96);
        for k in 1..=3 {
            for mode in [Mode::Positive, Mode::Nodal] {
                let r = least_energy(&nl, &g, k, mode, &NehariOptions::default()).unwrap();
                let m = morse_index(&r.u, &nl, Some(k)).unwrap();
                let (want, ok) = match mode {
                    Mode::Positive => ("m_k = 1, marginal 0", m.index == 1 && m.marginal == 0),
                    Mode::Nodal => ("m_k = 2", m.index == 2),
                };
                check(
                    &mut out,
                    ok,
                    format!(
                        "{name} k={k} {mode:?}: m_k = {}, marginal {} (want {want}; E = {:.4}, |u_θ|/|u| = {:.2e}, {})",
                        m.index,
                        m.marginal,
                        r.energy,
                        angular_ratio(&r.u),
                        r.provenance
                    ),
                );
            }
        }
    }
    out
}

fn c4_annulus_spikes() -> Checks {
    let mut out = Checks::new();
    let nl = Nonlinearity::LaneEmden { p: 12.0 };
    let g = grid(annulus(), 32, 192);
    let tol = Tolerances::default();
    let mut sols = vec![radial_result(annulus(), &nl, &g)];
    for k in 1..=3 {
        let r = least_energy(&nl, &g, k, Mode::Positive, &NehariOptions::default()).unwrap();
        let ang = angular_ratio(&r.u);
        check(&mut out, ang > 0.1, format!("k={k}: nonradial, |u_θ|/|u| = {ang:.3}"));
        let rep = classify(&r.u, &nl, k, &tol).unwrap();
        check(
            &mut out,
            rep.verdict.label() == "AxisSymmetricMonotone" && rep.sym_ratio < 1e-3,
            format!("k={k}: {} with |w_ψ*|/|u| = {:.2e}", rep.verdict.label(), rep.sym_ratio),
        );
        let mono = &rep.monotonicity;
        let viol = |s: &ksym::symmetry::SideStats| s.neg_fraction.min(s.pos_fraction);
        let (vp, vm) = (viol(&mono.plus), viol(&mono.minus));
        check(&mut out, vp < 1e-3 && vm < 1e-3, format!("k={k}: u_θ sign violation {vp:.2e} / {vm:.2e}"));
        sols.push(r);
    }
    let mut classes: Vec<usize> = Vec::new();
    let mut min_gap = f64::INFINITY;
    for i in 0..sols.len() {
        let fresh = classes.iter().all(|&c| {
            let d = distinctness(&sols[i], &sols[c]);
            min_gap = min_gap.min(d.distance);
            d.distinct
        });
        if fresh {
            classes.push(i);
        }
    }
    check(
        &mut out,
        classes.len() >= 4,
        format!("{} distinct solutions including the radial one (smallest distance {min_gap:.3})", classes.len()),
    );
    out
}

fn c5_disk_nodal() -> Checks {
    let mut out = Checks::new();
    let nl = Nonlinearity::LaneEmden { p: 3.0 };
    let g = grid(disk(), 64, 96);
    let r = least_energy(&nl, &g, 1, Mode::Nodal, &NehariOptions::default()).unwrap();
    let ang = angular_ratio(&r.u);
    check(&mut out, ang > 0.1, format!("nonradial, |u_θ|/|u| = {ang:.3} (E = {:.4})", r.energy));
    let m = morse_index(&r.u, &nl, Some(1)).unwrap();
    check(&mut out, m.index == 2, format!("m_1 = {}", m.index));
    let rep = classify(&r.u, &nl, 1, &Tolerances::default()).unwrap();
    check(
        &mut out,
        rep.verdict.label() == "AxisSymmetricMonotone",
        format!("{} (|w_ψ*|/|u| = {:.2e})", rep.verdict.label(), rep.sym_ratio),
    );
    out
}

fn c6_henon() -> Checks {
    let mut out = Checks::new();
    let nl = Nonlinearity::Henon { p: 4.0, alpha: 8.0 };
    let g = grid(disk(), 64, 96);
    let r = least_energy(&nl, &g, 1, Mode::Positive, &NehariOptions::default()).unwrap();
    let rad = radial_result(disk(), &nl, &g);
    let ratio = r.energy / rad.energy;
    check(&mut out, ratio < 0.99, format!("E_k = {:.4} vs radial {:.4} (ratio {ratio:.4})", r.energy, rad.energy));
    let rep = classify(&r.u, &nl, 1, &Tolerances::default()).unwrap();
    check(
        &mut out,
        rep.verdict.label() == "AxisSymmetricMonotone",
        format!("{} (|w_ψ*|/|u| = {:.2e})", rep.verdict.label(), rep.sym_ratio),
    );
    out
}

fn c7_identities() -> Checks {
    let mut out = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let kinds = [
        Nonlinearity::SinhPoisson { eps: 1.0, alpha: 0.0 },
        Nonlinearity::LaneEmden { p: 2.0 },
        Nonlinearity::LaneEmden { p: 3.0 },
        Nonlinearity::LaneEmden { p: 5.0 },
    ];
    let grids = [grid(disk(), 10, 24), grid(annulus(), 10, 24)];
    let (mut worst_v, mut split_ok) = (vec![0.0f64; kinds.len()], true);
    for t in 0..100 {
        let g = &grids[t % 2];
        let u = Field::from_values(g, (0..g.len()).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let e = Direction::lattice(rng.random_range(0..2 * g.n_theta() as i64), g.n_theta());
        for (i, nl) in kinds.iter().enumerate() {
            let (ve, ves) = comparison_potentials(nl, &u, &e).unwrap();
            let v = ve.values().iter().zip(ves.values()).map(|(a, b)| a - b).fold(0.0f64, f64::max);
            worst_v[i] = worst_v[i].max(v);
        }
        let w = difference_field(&u, &e).unwrap();
        let (w1, w2) = split_fields(&w, &e, 1).unwrap();
        let plus = sector_mask(g, &SectorSpec::new(1, e, SectorPart::Plus)).unwrap().interior;
        let minus = sector_mask(g, &SectorSpec::new(1, e, SectorPart::Minus)).unwrap().interior;
        for n in 0..g.len() {
            let (a, b) = (w1.values()[n], w2.values()[n]);
            let s = reflect_node(g, &e, n).unwrap();
            let sign = if plus.contains(n) {
                1.0
            } else if minus.contains(n) {
                -1.0
            } else {
                0.0
            };
            split_ok &= a >= 0.0
                && b >= 0.0
                && a * b == 0.0
                && w1.values()[s] == a
                && w2.values()[s] == b
                && a - b == sign * w.values()[n];
        }
    }
    for (nl, v) in kinds.iter().zip(&worst_v) {
        check(&mut out, *v < 1e-12, format!("(a) {nl:?}: max(V_e - V_es) = {v:.2e} over 100 fields"));
    }
    check(&mut out, split_ok, "(b) split fields nonnegative, disjoint, reflection symmetric, recombine to ±w".into());

    let nl = Nonlinearity::LaneEmden { p: 3.0 };
    let g = grid(disk(), 64, 96);
    let r = least_energy(&nl, &g, 2, Mode::Nodal, &NehariOptions::default()).unwrap();
    let xi = xi_h_diagnostic(&r.u, &nl, 2).unwrap();
    check(
        &mut out,
        xi.endpoint_ok,
        format!("(c) |h(π/k) + h(0)| = {:.2e}, scale {:.2e}", xi.endpoint_defect, xi.endpoint_scale),
    );
    check(&mut out, xi.located.is_some(), format!("(c) sign change of h at {:?}", xi.sign_change));
    let lam = xi.located.map(|i| (xi.samples[i].lambda1_plus, xi.samples[i].lambda1_minus));
    check(
        &mut out,
        xi.nonnegative_sector,
        format!("(c) sector λ₁ at the located direction {lam:?}, zero_tol {:.1e}", xi.zero_tol),
    );
    out
}

fn c8_residual_refinement() -> Checks {
    let mut out = Checks::new();
    let nl = Nonlinearity::LaneEmden { p: 3.0 };
    let coarse_g = grid(annulus(), 16, 96);
    let fine_g = grid(annulus(), 32, 192);
    let opts = NehariOptions::default();
    let coarse = nehari_from_seed(&nl, &coarse_g, Seed::Peaks(1), 1, Mode::Positive, &opts).unwrap();
    let fine = nehari_from_seed(&nl, &fine_g, Seed::Peaks(1), 1, Mode::Positive, &opts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut taken = 0;
    while taken < 8 {
        let m = rng.random_range(0..2 * coarse_g.n_theta() as i64);
        let ec = Direction::lattice(m, coarse_g.n_theta());
        // on a symmetry axis w_e vanishes and there is nothing to measure
        if difference_field(&coarse.u, &ec).unwrap().sup_norm() < 1e-8 * coarse.u.sup_norm() {
            continue;
        }
        let ef = Direction::lattice(2 * m, fine_g.n_theta());
        let rc = residual_l_e(&coarse.u, &nl, &ec, 1).unwrap();
        let rf = residual_l_e(&fine.u, &nl, &ef, 1).unwrap();
        let ratio = rc / rf;
        check(
            &mut out,
            (3.0..=5.0).contains(&ratio),
            format!("ψ = {:.4}: {rc:.3e} -> {rf:.3e}, factor {ratio:.3}", ec.psi()),
        );
        taken += 1;
    }
    out
}

const DETERMINISM_SCENARIO: &str = r#"{
  "name": "determinism",
  "experiment": "classify",
  "domain": {"kind": "Disk", "r_inner": 0.0, "r_outer": 1.0},
  "grid": {"n_r": 16, "n_theta": 24},
  "nonlinearity": {"kind": "LaneEmden", "p": 3.0},
  "k_list": [1, 2],
  "mode": "nodal"
}"#;

fn payloads(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "f64") {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn c9_determinism() -> Checks {
    let mut out = Checks::new();
    let sc = Scenario::from_json(DETERMINISM_SCENARIO).unwrap();
    let hash = scenario_hash(DETERMINISM_SCENARIO.as_bytes());
    let tmp = tempfile::tempdir().unwrap();
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        let opts = RunOptions { out: d.clone(), workers: None, seed_rng: 3 };
        let outcome = run_scenario(&sc, &hash, &opts).unwrap();
        check(&mut out, outcome.failed == 0, format!("run into {} has {} failed runs", d.display(), outcome.failed));
    }
    let ra = std::fs::read(dirs[0].join("report.json")).unwrap();
    let rb = std::fs::read(dirs[1].join("report.json")).unwrap();
    check(&mut out, ra == rb, format!("report.json identical ({} bytes)", ra.len()));
    let (pa, pb) = (payloads(&dirs[0]), payloads(&dirs[1]));
    check(&mut out, !pa.is_empty() && pa == pb, format!("{} .f64 payloads identical", pa.len()));

    let u = load_field(&dirs[0].join("k1").join("u.json")).unwrap();
    let again = save_field(&u, tmp.path(), "copy").unwrap();
    let v = load_field(&again).unwrap();
    let bitwise = u.values().iter().zip(v.values()).all(|(a, b)| a.to_bits() == b.to_bits());
    check(&mut out, bitwise && u.grid() == v.grid(), "field round trip bitwise exact".into());
    out
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Checks,
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { id: 1, name: "spectral fidelity", budget: secs(60), run: c1_spectral_fidelity },
        Criterion { id: 2, name: "Newton vs shooting", budget: secs(120), run: c2_newton_vs_shooting },
        Criterion { id: 3, name: "Morse-index contracts", budget: secs(300), run: c3_morse_contracts },
        Criterion { id: 4, name: "annulus p=12 minimizers", budget: secs(600), run: c4_annulus_spikes },
        Criterion { id: 5, name: "disk nodal k=1", budget: secs(300), run: c5_disk_nodal },
        Criterion { id: 6, name: "Hénon symmetry breaking", budget: secs(300), run: c6_henon },
        Criterion { id: 7, name: "comparison identities", budget: secs(300), run: c7_identities },
        Criterion { id: 8, name: "residual refinement", budget: secs(180), run: c8_residual_refinement },
        Criterion { id: 9, name: "determinism and persistence", budget: None, run: c9_determinism },
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let t = Instant::now();
        let checks = (c.run)();
        let elapsed = t.elapsed();
        let in_time = c.budget.is_none_or(|b| elapsed <= b);
        let pass = in_time && checks.iter().all(|(ok, _)| *ok);
        let budget = c.budget.map_or(String::new(), |b| format!(" of {} s", b.as_secs()));
        println!(
            "criterion {} {}: {} ({:.1} s{budget})",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        for (ok, msg) in &checks {
            println!("    [{}] {msg}", if *ok { "ok" } else { "FAIL" });
        }
        if !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
