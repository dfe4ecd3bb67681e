//! Least-energy solutions on the Nehari set, by projected gradient descent.
//!
//! The gradient is taken in the Dirichlet inner product, `g = u - A⁻¹ W f(u)`,
//! and every trial point is pulled back onto the constraint set by scaling
//! (`u`, or `u⁺` and `u⁻` separately in nodal mode). The descent is finished
//! by Newton.

use serde::{Deserialize, Serialize};

use super::{energy, nehari_residuals, newton_solve, resolve_seed, Mode, NewtonOptions, Seed, SolveResult};
use crate::error::{Error, Result};
use crate::geometry::NodeMask;
use crate::grid::{build_laplacian, project_k_invariant, stiffness_form, Field};
use crate::linalg::BandCholesky;
use crate::nonlin::Nonlinearity;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NehariOptions {
    pub max_iter: usize,
    /// Stop descending once `||g||_A / ||u||_A` falls below this.
    pub grad_tol: f64,
    pub armijo: f64,
    pub newton: NewtonOptions,
}

impl Default for NehariOptions {
    fn default() -> Self {
        NehariOptions { max_iter: 4000, grad_tol: 1e-6, armijo: 1e-4, newton: NewtonOptions::default() }
    }
}

struct Problem<'a> {
    nl: &'a Nonlinearity,
    p: f64,
    mode: Mode,
}

impl Problem<'_> {
    /// `∫ r^α |v|^{p+1}`.
    fn power_integral(&self, v: &Field) -> Result<f64> {
        Ok((self.p + 1.0) * self.nl.primitive_integral(v)?)
    }

    /// The point of the constraint set on the scaling ray(s) through `v`.
    fn project(&self, v: &Field) -> Result<Field> {
        let p = self.p;
        match self.mode {
            Mode::Positive => {
                let a = stiffness_form(v, v);
                let b = self.power_integral(v)?;
                if !(a > 0.0 && b > 0.0) {
                    return Err(Error::CollapsedSign("positive part"));
                }
                Ok(v.scale((a / b).powf(1.0 / (p - 1.0))))
            }
            Mode::Nodal => {
                let vp = v.map(|x| x.max(0.0));
                let vm = v.map(|x| (-x).max(0.0));
                let (ap, am) = (stiffness_form(&vp, &vp), stiffness_form(&vm, &vm));
                let (bp, bm) = (self.power_integral(&vp)?, self.power_integral(&vm)?);
                let scale = ap.max(am);
                if !(ap > 1e-12 * scale && bp > 0.0) {
                    return Err(Error::CollapsedSign("positive part"));
                }
                if !(am > 1e-12 * scale && bm > 0.0) {
                    return Err(Error::CollapsedSign("negative part"));
                }
                let c = -stiffness_form(&vp, &vm);
                let (tp, tm) = nodal_scaling(p, ap, am, bp, bm, c)?;
                Ok(vp.scale(tp).sub(&vm.scale(tm)))
            }
        }
    }
}

/// Solves `t⁺a⁺ + t⁻c = (t⁺)^p b⁺`, `t⁻a⁻ + t⁺c = (t⁻)^p b⁻` for positive
/// scalings, starting from the uncoupled values.
fn nodal_scaling(p: f64, ap: f64, am: f64, bp: f64, bm: f64, c: f64) -> Result<(f64, f64)> {
    let q = 1.0 / (p - 1.0);
    let (mut x, mut y) = ((ap / bp).powf(q), (am / bm).powf(q));
    let resid = |x: f64, y: f64| (x * ap + y * c - x.powf(p) * bp, y * am + x * c - y.powf(p) * bm);
    let norm = |r: (f64, f64), x: f64, y: f64| (r.0 / (x * ap)).abs().max((r.1 / (y * am)).abs());
    for _ in 0..100 {
        let r = resid(x, y);
        if norm(r, x, y) < 1e-15 {
            return Ok((x, y));
        }
        let j11 = ap - p * x.powf(p - 1.0) * bp;
        let j22 = am - p * y.powf(p - 1.0) * bm;
        let det = j11 * j22 - c * c;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = -(r.0 * j22 - c * r.1) / det;
        let dy = -(j11 * r.1 - c * r.0) / det;
        let mut s = 1.0;
        while x + s * dx <= 0.0 || y + s * dy <= 0.0 {
            s *= 0.5;
        }
        x += s * dx;
        y += s * dy;
    }
    let r = resid(x, y);
    if norm(r, x, y) < 1e-12 {
        Ok((x, y))
    } else {
        Err(Error::Diverged("nodal Nehari scaling did not converge".into()))
    }
}

/// Least-energy k-invariant solution reached from `seed`.
pub fn nehari_minimize(
    nl: &Nonlinearity,
    seed: &Field,
    k: usize,
    mode: Mode,
    opts: &NehariOptions,
) -> Result<SolveResult> {
    nl.validate()?;
    let p = nl
        .exponent()
        .ok_or_else(|| Error::Unsupported(format!("Nehari scaling needs a power nonlinearity, got {}", nl.name())))?;
    let prob = Problem { nl, p, mode };
    let g = seed.grid().clone();
    let lap = build_laplacian(&g, &NodeMask::whole(&g))?;
    let chol = BandCholesky::factor(&lap)?;
    let w = g.quad_weights();

    let start = match mode {
        Mode::Positive => seed.map(f64::abs),
        Mode::Nodal => seed.clone(),
    };
    let mut u = prob.project(&project_k_invariant(&start, k)?)?;
    let mut e = energy(nl, &u)?;
    let mut trace = vec![e];
    let mut step: f64 = 1.0;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let f = nl.f_field(&u)?;
        let mut y: Vec<f64> = f.values().iter().zip(&w).map(|(a, b)| a * b).collect();
        chol.solve_in_place(&mut y);
        let y = project_k_invariant(&Field::from_values(&g, y)?, k)?;
        let grad = u.sub(&y);
        let g2 = stiffness_form(&grad, &grad);
        let u2 = stiffness_form(&u, &u);
        if g2.sqrt() < opts.grad_tol * u2.sqrt() {
            break;
        }
        iterations += 1;
        step = (2.0 * step).min(1.0);
        let mut accepted = None;
        for _ in 0..30 {
            let trial = u.sub(&grad.scale(step));
            match prob.project(&trial) {
                Ok(v) => {
                    let ev = energy(nl, &v)?;
                    if ev <= e - opts.armijo * step * g2 {
                        accepted = Some((v, ev));
                        break;
                    }
                }
                Err(Error::CollapsedSign(_)) => {}
                Err(other) => return Err(other),
            }
            step *= 0.5;
        }
        match accepted {
            Some((v, ev)) => {
                u = project_k_invariant(&v, k)?;
                e = ev;
                trace.push(e);
            }
            None => break,
        }
    }
    prob.project(&u)?;

    let solved = newton_solve(nl, &u, k, &opts.newton)?;
    let constraint_residuals = nehari_residuals(nl, &solved.u, mode)?;
    if mode == Mode::Nodal {
        let up = solved.u.values().iter().any(|&x| x > 0.0);
        let um = solved.u.values().iter().any(|&x| x < 0.0);
        if !up || !um {
            return Err(Error::CollapsedSign(if up { "negative part" } else { "positive part" }));
        }
    }
    Ok(SolveResult {
        constraint_residuals,
        iterations: iterations + solved.iterations,
        provenance: format!("nehari-{}", if mode == Mode::Positive { "positive" } else { "nodal" }),
        trace,
        ..solved
    })
}

/// `nehari_minimize` from a named seed.
pub fn nehari_from_seed(
    nl: &Nonlinearity,
    grid: &std::sync::Arc<crate::grid::PolarGrid>,
    seed: Seed,
    k: usize,
    mode: Mode,
    opts: &NehariOptions,
) -> Result<SolveResult> {
    let init = resolve_seed(seed, grid, nl, mode)?;
    let mut r = nehari_minimize(nl, &init, k, mode, opts)?;
    r.provenance = format!("{} from {seed}", r.provenance);
    Ok(r)
}
