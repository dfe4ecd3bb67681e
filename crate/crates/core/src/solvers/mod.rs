//! Radial shooting, Newton in k-invariant subspaces, Nehari descent and
//! solution comparison.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{neg_laplacian, stiffness_form, Field};
use crate::nonlin::Nonlinearity;

pub mod distinct;
pub mod nehari;
pub mod newton;
pub mod radial;
pub mod seeds;

pub use distinct::{distinctness, Distinctness};
pub use nehari::{nehari_from_seed, nehari_minimize, NehariOptions};
pub use newton::{continuation, newton_solve, NewtonOptions};
pub use radial::{solve_radial, RadialProfile};
pub use seeds::{resolve_seed, Seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Positive,
    Nodal,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub u: Field,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub constraint_residuals: Vec<f64>,
    pub provenance: String,
    /// Energies of accepted descent iterates, when a descent was run.
    pub trace: Vec<f64>,
}

/// `E(u) = ½ ∫|∇u|² - ∫ G(|x|, u)`.
pub fn energy(nl: &Nonlinearity, u: &Field) -> Result<f64> {
    Ok(0.5 * stiffness_form(u, u) - nl.primitive_integral(u)?)
}

/// `-Δ_h u - f(|x|, u)` on every node.
pub fn residual_field(nl: &Nonlinearity, u: &Field) -> Result<Field> {
    Ok(neg_laplacian(u).sub(&nl.f_field(u)?))
}

pub fn residual_norm(nl: &Nonlinearity, u: &Field) -> Result<f64> {
    Ok(residual_field(nl, u)?.sup_norm())
}

/// Nehari identities `⟨E'(u), u⟩` (positive) or `⟨E'(u), u^±⟩` (nodal),
/// each relative to the corresponding Dirichlet energy.
pub fn nehari_residuals(nl: &Nonlinearity, u: &Field, mode: Mode) -> Result<Vec<f64>> {
    let f = nl.f_field(u)?;
    let rel = |v: &Field| -> f64 {
        let a = stiffness_form(u, v);
        let b = f.dot(v);
        let d = stiffness_form(v, v);
        if d == 0.0 {
            0.0
        } else {
            (a - b) / d
        }
    };
    Ok(match mode {
        Mode::Positive => vec![rel(u)],
        Mode::Nodal => {
            let up = u.map(|x| x.max(0.0));
            let um = u.map(|x| (-x).max(0.0));
            vec![rel(&up), rel(&um)]
        }
    })
}

/// Lowest-energy result of `nehari_from_seed` over the radial, `cos-mode(k)`
/// and `peaks(k)` seeds. Seeds whose descent fails are skipped; the error of
/// the last failure is returned if none succeeds.
pub fn least_energy(
    nl: &Nonlinearity,
    grid: &std::sync::Arc<crate::grid::PolarGrid>,
    k: usize,
    mode: Mode,
    opts: &NehariOptions,
) -> Result<SolveResult> {
    least_energy_over(nl, grid, &[Seed::Radial, Seed::CosMode(k), Seed::Peaks(k)], k, mode, opts)
}

pub fn least_energy_over(
    nl: &Nonlinearity,
    grid: &std::sync::Arc<crate::grid::PolarGrid>,
    seeds: &[Seed],
    k: usize,
    mode: Mode,
    opts: &NehariOptions,
) -> Result<SolveResult> {
    let mut best: Option<SolveResult> = None;
    let mut last_err = None;
    for &seed in seeds {
        match nehari_from_seed(nl, grid, seed, k, mode, opts) {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.energy < b.energy) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| crate::Error::Unsupported("no seeds given".into())))
}
