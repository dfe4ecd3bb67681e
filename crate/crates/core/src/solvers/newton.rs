//! Damped Newton iteration in the k-invariant subspace.

use serde::{Deserialize, Serialize};

use super::{energy, residual_field, SolveResult};
use crate::error::{Error, Result};
use crate::geometry::NodeMask;
use crate::grid::{angular_derivative, build_laplacian, project_k_invariant, Field};
use crate::linalg::BandLu;
use crate::nonlin::Nonlinearity;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonOptions {
    /// Target for `||F(u)||∞ / max(1, ||f(u)||∞)`.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 50, max_halvings: 30 }
    }
}

fn merit(f: &Field) -> f64 {
    0.5 * f.dot(f)
}

fn scaled_residual(nl: &Nonlinearity, u: &Field) -> Result<(Field, f64)> {
    let f = residual_field(nl, u)?;
    let scale = nl.f_field(u)?.sup_norm().max(1.0);
    let r = f.sup_norm() / scale;
    Ok((f, r))
}

/// Newton on `F(u) = -Δ_h u - f(|x|, u)` with Armijo backtracking on
/// `½||F||²`. For nonradial iterates the step is first kept orthogonal to
/// the rotation mode `∂_θ u`, which removes the near-kernel of the Jacobian;
/// if that step finds no descent the unconstrained step is tried.
///
/// Convergence is declared when the scaled residual drops below `tol`, or
/// when it reaches the rounding floor of the stencil: a full step that no
/// longer halves the residual while moving `u` by less than `1e-9 ||u||∞`.
pub fn newton_solve(nl: &Nonlinearity, init: &Field, k: usize, opts: &NewtonOptions) -> Result<SolveResult> {
    nl.validate()?;
    let g = init.grid().clone();
    if !init.is_finite() {
        return Err(Error::Diverged("initial field is not finite".into()));
    }
    let mut u = project_k_invariant(init, k)?;
    let lap = build_laplacian(&g, &NodeMask::whole(&g))?;
    let w = g.quad_weights();
    let (mut f, mut res) = scaled_residual(nl, &u)?;
    let mut iterations = 0;
    while res >= opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::Diverged(format!(
                "no convergence after {iterations} iterations (scaled residual {res:.3e})"
            )));
        }
        iterations += 1;
        let jac = lap.with_potential(&nl.fp_field(&u)?);
        let lu = BandLu::factor(&jac)?;
        let mut delta: Vec<f64> = f.values().iter().zip(&w).map(|(r, w)| -r * w).collect();
        lu.solve_in_place(&mut delta);
        let plain = project_k_invariant(&Field::from_values(&g, delta)?, k)?;
        let mut candidates = vec![];
        let t = project_k_invariant(&angular_derivative(&u), k)?;
        if t.sup_norm() > 1e-6 * u.sup_norm() {
            let mut z: Vec<f64> = t.values().iter().zip(&w).map(|(t, w)| t * w).collect();
            lu.solve_in_place(&mut z);
            let z = project_k_invariant(&Field::from_values(&g, z)?, k)?;
            let tz = t.dot(&z);
            if tz != 0.0 {
                candidates.push(plain.sub(&z.scale(t.dot(&plain) / tz)));
            }
        }
        candidates.push(plain);

        let m0 = merit(&f);
        let (mut delta, mut step, mut accepted) = (Field::zeros(&g), 1.0, None);
        for d in candidates {
            delta = d;
            step = 1.0;
            for _ in 0..=opts.max_halvings {
                let trial = u.add(&delta.scale(step));
                if let Ok((tf, tr)) = scaled_residual(nl, &trial) {
                    if merit(&tf) <= (1.0 - 2e-4 * step) * m0 {
                        accepted = Some((trial, tf, tr));
                        break;
                    }
                }
                step *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }
        let moved = delta.sup_norm() * step;
        match accepted {
            Some((nu, _, nr)) => {
                let stalled = nr > 0.5 * res;
                u = project_k_invariant(&nu, k)?;
                f = residual_field(nl, &u)?;
                res = nr;
                if stalled && step == 1.0 && moved < 1e-9 * u.sup_norm() {
                    break;
                }
            }
            None => {
                if moved < 1e-9 * u.sup_norm() && res < 1e3 * opts.tol {
                    break;
                }
                return Err(Error::Diverged(format!(
                    "line search failed after {} halvings (scaled residual {res:.3e})",
                    opts.max_halvings
                )));
            }
        }
    }
    let e = energy(nl, &u)?;
    Ok(SolveResult {
        residual: f.sup_norm(),
        energy: e,
        iterations,
        constraint_residuals: vec![],
        provenance: "newton".into(),
        trace: vec![],
        u,
    })
}

/// Follows a one-parameter family `nl(t)`, `t = 1/steps, ..., 1`, by Newton
/// from `init`.
pub fn continuation(
    family: impl Fn(f64) -> Nonlinearity,
    init: &Field,
    k: usize,
    steps: usize,
    opts: &NewtonOptions,
) -> Result<SolveResult> {
    let mut u = init.clone();
    let mut last = None;
    for s in 1..=steps.max(1) {
        let r = newton_solve(&family(s as f64 / steps.max(1) as f64), &u, k, opts)?;
        u = r.u.clone();
        last = Some(r);
    }
    let mut r = last.expect("at least one step");
    r.provenance = format!("continuation({steps})");
    Ok(r)
}
