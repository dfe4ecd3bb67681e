//! Radial solutions of the discrete problem by shooting.
//!
//! A radial grid function solves the 2D discrete equation iff its ring values
//! solve the three-point recurrence obtained from the radial part of the
//! stencil, so the profile lifts to an exact discrete 2D solution.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::grid::{Field, PolarGrid};
use crate::nonlin::Nonlinearity;

#[derive(Clone, Debug, Serialize)]
pub struct RadialProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub residual: f64,
    pub zeros: usize,
}

impl RadialProfile {
    pub fn lift(&self, grid: &Arc<PolarGrid>) -> Result<Field> {
        Field::from_radial(grid, &self.values)
    }
}

/// Ring geometry of the radial recurrence.
struct Rings {
    radii: Vec<f64>,
    faces: Vec<f64>,
    dr2: f64,
}

impl Rings {
    fn new(domain: &DomainSpec, n_r: usize) -> Result<Self> {
        domain.validate()?;
        if n_r < 2 {
            return Err(Error::InvalidGrid(format!("n_r must be >= 2, got {n_r}")));
        }
        let dr = (domain.r_outer - domain.r_inner) / n_r as f64;
        Ok(Rings {
            radii: (0..n_r).map(|i| domain.r_inner + (i as f64 + 0.5) * dr).collect(),
            faces: (0..=n_r).map(|i| domain.r_inner + i as f64 * dr).collect(),
            dr2: dr * dr,
        })
    }

    fn len(&self) -> usize {
        self.radii.len()
    }

    /// `-Δ_h u` for a radial profile, in flux form.
    fn neg_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let inner = if i == 0 { 2.0 * u[0] } else { u[i] - u[i - 1] };
                let outer = if i + 1 == n { 2.0 * u[i] } else { u[i] - u[i + 1] };
                (self.faces[i] * inner + self.faces[i + 1] * outer) / (self.radii[i] * self.dr2)
            })
            .collect()
    }

    fn residual(&self, nl: &Nonlinearity, u: &[f64]) -> Result<Vec<f64>> {
        let lap = self.neg_laplacian(u);
        lap.iter().zip(u).zip(&self.radii).map(|((l, &s), &r)| Ok(l - nl.eval_f(r, s)?)).collect()
    }

    /// Marches the recurrence from `u_0 = s`; returns the ring values and the
    /// sign-change count including the wall midpoint.
    fn shoot(&self, nl: &Nonlinearity, s: f64) -> (Vec<f64>, usize) {
        let n = self.len();
        let mut u = vec![0.0; n + 1];
        u[0] = s;
        for i in 0..n {
            let prev = if i == 0 { -u[0] } else { u[i - 1] };
            let f = match nl.eval_f(self.radii[i], u[i]) {
                Ok(f) => f,
                Err(_) => return (u, usize::MAX),
            };
            u[i + 1] = u[i] + (self.faces[i] * (u[i] - prev) - self.radii[i] * self.dr2 * f) / self.faces[i + 1];
            if !u[i + 1].is_finite() {
                return (u, usize::MAX);
            }
        }
        let mid = 0.5 * (u[n - 1] + u[n]);
        let mut zeros = 0;
        let mut last = u[0];
        for &v in u[1..n].iter().chain(std::iter::once(&mid)) {
            if v != 0.0 {
                if last != 0.0 && (v > 0.0) != (last > 0.0) {
                    zeros += 1;
                }
                last = v;
            }
        }
        u.truncate(n);
        (u, zeros)
    }

    /// Newton on the tridiagonal system.
    fn polish(&self, nl: &Nonlinearity, u: &mut [f64], tol: f64) -> Result<f64> {
        let n = self.len();
        let mut res = self.residual(nl, u)?;
        let mut norm = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for _ in 0..50 {
            if norm < tol {
                break;
            }
            let mut lower = vec![0.0; n];
            let mut diag = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 0..n {
                let s = 1.0 / (self.radii[i] * self.dr2);
                let ci = self.faces[i] * s;
                let co = self.faces[i + 1] * s;
                diag[i] = if i == 0 { 2.0 * ci } else { ci } + if i + 1 == n { 2.0 * co } else { co };
                diag[i] -= nl.eval_fp(self.radii[i], u[i])?;
                if i > 0 {
                    lower[i] = -ci;
                }
                if i + 1 < n {
                    upper[i] = -co;
                }
            }
            let mut rhs: Vec<f64> = res.iter().map(|v| -v).collect();
            solve_tridiagonal(&lower, &mut diag, &upper, &mut rhs)?;
            let trial: Vec<f64> = u.iter().zip(&rhs).map(|(a, d)| a + d).collect();
            let tres = self.residual(nl, &trial)?;
            let tnorm = tres.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if tnorm.is_nan() || tnorm >= norm {
                break;
            }
            u.copy_from_slice(&trial);
            res = tres;
            norm = tnorm;
        }
        Ok(norm)
    }
}

/// Thomas algorithm; overwrites `diag` and `rhs`.
fn solve_tridiagonal(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    for i in 1..n {
        if diag[i - 1] == 0.0 {
            return Err(Error::SingularJacobian(i - 1));
        }
        let m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    if diag[n - 1] == 0.0 {
        return Err(Error::SingularJacobian(n - 1));
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
    Ok(())
}

/// Radial solution with `zeros` interior sign changes.
///
/// Power kinds are found by bisection on the first ring value between the
/// thresholds where the zero count of the marched profile exceeds `zeros`,
/// then polished by Newton. Gelfand is followed from the zero solution by
/// continuation in `lambda` (positive branch only).
pub fn solve_radial(domain: &DomainSpec, nl: &Nonlinearity, zeros: usize, n_r: usize) -> Result<RadialProfile> {
    nl.validate()?;
    let rings = Rings::new(domain, n_r)?;
    let tol = 1e-10;
    let mut u = match *nl {
        Nonlinearity::LaneEmden { .. } | Nonlinearity::Henon { .. } => shooting(&rings, nl, zeros)?,
        Nonlinearity::Gelfand { lambda, alpha } => {
            if zeros != 0 {
                return Err(Error::Unsupported("Gelfand has no nodal radial branch here".into()));
            }
            let mut u = vec![0.0; rings.len()];
            for step in 1..=8 {
                let part = Nonlinearity::Gelfand { lambda: lambda * step as f64 / 8.0, alpha };
                rings.polish(&part, &mut u, tol)?;
            }
            u
        }
        Nonlinearity::SinhPoisson { .. } => {
            return Err(Error::Unsupported("radial shooting for SinhPoisson".into()));
        }
    };
    let residual = rings.polish(nl, &mut u, tol)?;
    let zeros_found = u.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
    if !u.iter().all(|v| v.is_finite()) {
        return Err(Error::Diverged("radial profile not finite".into()));
    }
    Ok(RadialProfile { radii: rings.radii.clone(), values: u, residual, zeros: zeros_found })
}

fn shooting(rings: &Rings, nl: &Nonlinearity, target: usize) -> Result<Vec<f64>> {
    let mut lo = 1e-3;
    while rings.shoot(nl, lo).1 > target {
        lo *= 0.5;
        if lo < 1e-12 {
            return Err(Error::NoBracket { target, detail: "small initial values already overshoot".into() });
        }
    }
    let mut hi = 2.0 * lo;
    while rings.shoot(nl, hi).1 <= target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::NoBracket {
                target,
                detail: "zero count never exceeds the target below u_0 = 1e8".into(),
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rings.shoot(nl, mid).1 <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (u, _) = rings.shoot(nl, lo);
    Ok(u)
}
