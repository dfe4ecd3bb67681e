//! Comparison of solutions up to grid rotations.

use serde::Serialize;

use super::SolveResult;
use crate::grid::Field;

pub const DISTANCE_TOL: f64 = 1e-3;
pub const ENERGY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Distinctness {
    pub distinct: bool,
    /// `min_ρ ||a∘ρ - b|| / ||b||` over all grid rotations.
    pub distance: f64,
    pub best_shift: usize,
    pub energy_gap: f64,
}

/// Relative distance between `a` rotated by `shift` angular steps and `b`.
fn rotated_distance(a: &Field, b: &Field, shift: usize) -> f64 {
    let g = b.grid();
    let n_theta = g.n_theta();
    let (va, vb) = (a.values(), b.values());
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..g.n_r() {
        let w = g.quad_w(g.node(i, 0));
        let base = i * n_theta;
        for j in 0..n_theta {
            let d = va[base + (j + shift) % n_theta] - vb[base + j];
            num += w * d * d;
            den += w * vb[base + j] * vb[base + j];
        }
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

pub fn distinctness(a: &SolveResult, b: &SolveResult) -> Distinctness {
    let n_theta = b.u.grid().n_theta();
    let (mut best, mut best_shift) = (f64::INFINITY, 0);
    for s in 0..n_theta {
        let d = rotated_distance(&a.u, &b.u, s);
        if d < best {
            best = d;
            best_shift = s;
        }
    }
    let energy_gap =
        if b.energy == 0.0 { (a.energy - b.energy).abs() } else { ((a.energy - b.energy) / b.energy).abs() };
    Distinctness { distinct: best > DISTANCE_TOL || energy_gap > ENERGY_TOL, distance: best, best_shift, energy_gap }
}
