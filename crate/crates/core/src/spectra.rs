//! Bottom of the spectrum of `L_u = -Δ - f'(|x|, u)` on the whole domain, on
//! the k-invariant subspace and on sectors.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{sector_mask, MaskShape, NodeMask, SectorPart, SectorSpec};
use crate::grid::{build_laplacian, project_k_invariant_in_place, Field, OperatorMatrix, PolarGrid};
use crate::linalg::{smallest_eigenpairs, LanczosOptions, Projector, SymBand};
use crate::nonlin::Nonlinearity;

/// Relative size of the zero band around the origin of the spectrum.
pub const ZERO_TOL_SCALE: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Subspace {
    Full,
    KInvariant(usize),
    Sector(SectorSpec),
}

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub eigenfields: Vec<Field>,
    pub residuals: Vec<f64>,
    pub subspace: Subspace,
    pub zero_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MorseReport {
    pub index: usize,
    pub marginal: usize,
    pub eigenvalues: Vec<f64>,
    pub zero_tol: f64,
}

/// Default zero band for an assembled operator.
pub fn zero_tol(a: &OperatorMatrix) -> f64 {
    ZERO_TOL_SCALE * a.norm1()
}

fn shift_below(a: &OperatorMatrix) -> f64 {
    a.gershgorin_bounds().0.min(0.0) - 1.0
}

/// `m` smallest eigenpairs of `A v = λ W v` on the requested subspace.
///
/// Eigenfields are `W`-orthonormal. For sector subspaces the first
/// eigenfield is signed to have nonnegative mean.
pub fn smallest_eigs(
    a: &OperatorMatrix,
    grid: &Arc<PolarGrid>,
    m: usize,
    subspace: Subspace,
) -> Result<SpectrumResult> {
    let proj;
    let project: Option<Projector> = match subspace {
        Subspace::KInvariant(k) if k > 1 => {
            if a.mask().shape() != MaskShape::Whole {
                return Err(Error::IncompatibleSymmetry("k-invariant subspace needs the whole-domain mask".into()));
            }
            project_k_invariant_in_place(grid, k, &mut vec![0.0; grid.len()])?;
            proj = move |v: &mut [f64]| {
                project_k_invariant_in_place(grid, k, v).expect("grid checked above");
            };
            Some(&proj)
        }
        _ => None,
    };
    let pairs = smallest_eigenpairs(a, m, shift_below(a), project, LanczosOptions::default())?;
    let mut eigenfields: Vec<Field> = pairs.vectors.iter().map(|v| a.extend(grid, v)).collect();
    if let (Subspace::Sector(_), Some(first)) = (&subspace, eigenfields.first_mut()) {
        if first.values().iter().sum::<f64>() < 0.0 {
            *first = first.scale(-1.0);
        }
    }
    Ok(SpectrumResult {
        eigenvalues: pairs.values,
        eigenfields,
        residuals: pairs.residuals,
        subspace,
        zero_tol: zero_tol(a),
    })
}

/// Stiffness of `L_u` on a mask.
pub fn linearized_operator(u: &Field, nl: &Nonlinearity, mask: &NodeMask) -> Result<OperatorMatrix> {
    let pot = nl.fp_field(u)?;
    Ok(build_laplacian(u.grid(), mask)?.with_potential(&pot))
}

/// Morse index of `L_u` on the full space (`k = None`) or the k-invariant
/// subspace, with the count of eigenvalues inside the zero band.
pub fn morse_index(u: &Field, nl: &Nonlinearity, k: Option<usize>) -> Result<MorseReport> {
    let g = u.grid().clone();
    let a = linearized_operator(u, nl, &NodeMask::whole(&g))?;
    let sub = match k {
        Some(k) => Subspace::KInvariant(k),
        None => Subspace::Full,
    };
    morse_from_operator(&a, &g, sub)
}

/// Whole spectrum of a whole-domain operator that commutes with every grid
/// rotation, restricted to angular modes `j ≡ 0 (mod k)`. Such an operator
/// is block-circulant in `θ`, so each mode `e^{ijθ}` leaves a symmetric
/// tridiagonal radial problem. Returns `None` when the operator is not
/// rotation invariant.
pub fn circulant_eigenvalues(a: &OperatorMatrix, g: &PolarGrid, k: usize) -> Option<Vec<f64>> {
    if a.mask().shape() != MaskShape::Whole || k == 0 || !g.n_theta().is_multiple_of(k) {
        return None;
    }
    let (n_r, n_theta) = (g.n_r(), g.n_theta());
    let mut diag = vec![0.0; n_r];
    let mut ang = vec![0.0; n_r];
    let mut rad = vec![0.0; n_r.saturating_sub(1)];
    for i in 0..n_r {
        let n0 = g.node(i, 0);
        diag[i] = a.get(n0, n0);
        ang[i] = a.get(n0, g.node(i, 1));
        if i + 1 < n_r {
            rad[i] = a.get(n0, g.node(i + 1, 0));
        }
        for j in 0..n_theta {
            let n = g.node(i, j);
            let expect_row = |c: usize| -> Option<f64> {
                let (ci, cj) = g.coords(c);
                if ci == i && (cj == (j + 1) % n_theta || cj == (j + n_theta - 1) % n_theta) {
                    Some(ang[i])
                } else if ci == i && cj == j {
                    Some(diag[i])
                } else if cj == j && ci == i + 1 {
                    Some(rad[i])
                } else if cj == j && ci + 1 == i {
                    Some(rad[i - 1])
                } else {
                    None
                }
            };
            if a.mass()[n] != a.mass()[n0] {
                return None;
            }
            for (c, v) in a.row(n) {
                if expect_row(c) != Some(v) {
                    return None;
                }
            }
        }
    }
    let dtheta = g.dtheta();
    let mut out = Vec::new();
    for j in (0..n_theta).step_by(k) {
        let shift = 2.0 * (j as f64 * dtheta).cos();
        let s: Vec<f64> = (0..n_r).map(|i| 1.0 / a.mass()[g.node(i, 0)].sqrt()).collect();
        let t = nalgebra::DMatrix::from_fn(n_r, n_r, |r, c| {
            if r == c {
                (diag[r] + shift * ang[r]) * s[r] * s[r]
            } else if r + 1 == c {
                rad[r] * s[r] * s[c]
            } else if c + 1 == r {
                rad[c] * s[r] * s[c]
            } else {
                0.0
            }
        });
        out.extend(t.symmetric_eigenvalues().iter().copied());
    }
    out.sort_by(f64::total_cmp);
    Some(out)
}

pub fn morse_from_operator(a: &OperatorMatrix, g: &Arc<PolarGrid>, sub: Subspace) -> Result<MorseReport> {
    let tol = zero_tol(a);
    let mode_step = match sub {
        Subspace::Full => Some(1),
        Subspace::KInvariant(k) => Some(k),
        Subspace::Sector(_) => None,
    };
    if let Some(all) = mode_step.and_then(|k| circulant_eigenvalues(a, g, k)) {
        return Ok(report_from_counts(
            all.iter().filter(|&&l| l < -tol).count(),
            all.iter().filter(|&&l| l <= tol).count(),
            all,
            tol,
        ));
    }
    let counts = match sub {
        Subspace::Full => inertia_counts(a, tol, |s| Some(SymBand::from_operator(a, s))),
        Subspace::KInvariant(k) => inertia_counts(a, tol, |s| k_quotient_band(a, g, k, s)),
        Subspace::Sector(_) => None,
    };
    if let Some((below, upto)) = counts {
        let eigenvalues = if upto == 0 { Vec::new() } else { smallest_eigs(a, g, upto, sub)?.eigenvalues };
        return Ok(report_from_counts(below, upto, eigenvalues, tol));
    }
    let mut nev = 4;
    loop {
        let spec = smallest_eigs(a, g, nev.min(a.dim()), sub.clone())?;
        let last = *spec.eigenvalues.last().unwrap_or(&f64::INFINITY);
        if last > tol || nev >= a.dim() {
            let below = spec.eigenvalues.iter().filter(|&&l| l < -tol).count();
            let upto = spec.eigenvalues.iter().filter(|&&l| l <= tol).count();
            return Ok(report_from_counts(below, upto, spec.eigenvalues, tol));
        }
        nev *= 2;
    }
}

/// Keeps the eigenvalues through the zero band.
fn report_from_counts(below: usize, upto: usize, mut eigenvalues: Vec<f64>, tol: f64) -> MorseReport {
    eigenvalues.truncate(upto);
    MorseReport { index: below, marginal: upto - below, eigenvalues, zero_tol: tol }
}

/// Eigenvalue counts below `-tol` and up to `tol`, from the inertia of the
/// shifted pencil.
fn inertia_counts(a: &OperatorMatrix, tol: f64, band: impl Fn(f64) -> Option<SymBand>) -> Option<(usize, usize)> {
    let below = band(-tol)?.inertia()?.negative;
    let upto = band(tol)?.inertia()?.negative;
    (upto >= below && upto <= a.dim()).then_some((below, upto))
}

/// `A - sigma·W` restricted to the k-invariant subspace, written on the
/// nodes of one period `j < N_theta/k`: entry `(p, q)` sums the couplings
/// of `p` to every rotated copy of `q`. `None` unless `a` acts on the whole
/// domain and commutes with the rotation by `2π/k`.
fn k_quotient_band(a: &OperatorMatrix, g: &PolarGrid, k: usize, sigma: f64) -> Option<SymBand> {
    if a.mask().shape() != MaskShape::Whole || k == 0 || !g.n_theta().is_multiple_of(k) {
        return None;
    }
    let (n_r, n_theta, n_t) = (g.n_r(), g.n_theta(), g.n_theta() / k);
    let fold = |node: usize| {
        let (i, j) = g.coords(node);
        i * n_t + j % n_t
    };
    let rot = |node: usize| {
        let (i, j) = g.coords(node);
        g.node(i, (j + n_t) % n_theta)
    };
    let scale = a.norm1();
    for r in 0..a.dim() {
        if a.mass()[rot(r)] != a.mass()[r] {
            return None;
        }
        for (c, v) in a.row(r) {
            if (a.get(rot(r), rot(c)) - v).abs() > 1e-12 * scale {
                return None;
            }
        }
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_r * n_t];
    for i in 0..n_r {
        for j in 0..n_t {
            let r = g.node(i, j);
            let row = &mut rows[i * n_t + j];
            for (c, v) in a.row(r) {
                let q = fold(c);
                match row.iter_mut().find(|(cc, _)| *cc == q) {
                    Some(e) => e.1 += v,
                    None => row.push((q, v)),
                }
            }
            match row.iter_mut().find(|(cc, _)| *cc == i * n_t + j) {
                Some(e) => e.1 -= sigma * a.mass()[r],
                None => row.push((i * n_t + j, -sigma * a.mass()[r])),
            }
        }
    }
    let mut b = 0;
    for (p, row) in rows.iter().enumerate() {
        for &(q, _) in row {
            b = b.max(p.abs_diff(q));
        }
    }
    let mut s = SymBand::zeros(rows.len(), b);
    for (p, row) in rows.iter().enumerate() {
        for &(q, v) in row {
            s.add(p, q, v);
        }
    }
    Some(s)
}

/// First Dirichlet eigenpair of `L_u` on a half-sector, `W`-normalized and
/// signed positive.
pub fn sector_lambda1(u: &Field, nl: &Nonlinearity, spec: &SectorSpec) -> Result<(f64, Field)> {
    if spec.part == SectorPart::Double {
        return Err(Error::Unsupported("sector_lambda1 takes a half-sector (Plus or Minus)".into()));
    }
    let g = u.grid().clone();
    let mask = sector_mask(&g, spec)?;
    let a = linearized_operator(u, nl, &mask.interior)?;
    let mut res = smallest_eigs(&a, &g, 1, Subspace::Sector(*spec))?;
    Ok((res.eigenvalues[0], res.eigenfields.swap_remove(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Direction, DomainSpec};
    use crate::linalg::dense_eigenpairs;

    fn grid(d: DomainSpec, n_r: usize, n_theta: usize) -> Arc<PolarGrid> {
        Arc::new(PolarGrid::new(d, n_r, n_theta).unwrap())
    }

    const LE3: Nonlinearity = Nonlinearity::LaneEmden { p: 3.0 };

    #[test]
    fn zero_field_has_index_zero() {
        let g = grid(DomainSpec::disk(1.0).unwrap(), 12, 16);
        let m = morse_index(&Field::zeros(&g), &LE3, None).unwrap();
        assert_eq!((m.index, m.marginal), (0, 0));
        assert!(m.eigenvalues.is_empty());
    }

    #[test]
    fn inertia_counts_match_the_spectrum() {
        let g = grid(DomainSpec::annulus(0.5, 1.0).unwrap(), 10, 24);
        let u = Field::from_fn(&g, |r, t| 120.0 * (r - 0.5) * (1.0 - r) * (1.0 + 0.6 * (3.0 * t).cos()));
        let a = linearized_operator(&u, &LE3, &NodeMask::whole(&g)).unwrap();
        let tol = zero_tol(&a);
        let dense = dense_eigenpairs(&a);
        let full = morse_from_operator(&a, &g, Subspace::Full).unwrap();
        assert_eq!(full.index, dense.values.iter().filter(|&&l| l < -tol).count());
        assert!(full.index >= 2, "{:?}", &dense.values[..4]);
        for (x, y) in full.eigenvalues.iter().zip(&dense.values) {
            assert!((x - y).abs() < 1e-8 * (1.0 + y.abs()));
        }
        let lz = smallest_eigs(&a, &g, 8, Subspace::KInvariant(3)).unwrap();
        let k3 = morse_from_operator(&a, &g, Subspace::KInvariant(3)).unwrap();
        assert_eq!(k3.index, lz.eigenvalues.iter().filter(|&&l| l < -tol).count());
        assert!(k3.index < full.index);
        // folding a non-invariant operator is refused
        assert!(k_quotient_band(&a, &g, 2, 0.0).is_none());
        assert!(k_quotient_band(&a, &g, 3, 0.0).is_some());
    }

    #[test]
    fn circulant_spectrum_matches_dense() {
        let g = grid(DomainSpec::annulus(0.5, 1.0).unwrap(), 8, 16);
        let u = Field::from_fn(&g, |r, _| 30.0 * (r - 0.5) * (1.0 - r));
        let a = linearized_operator(&u, &LE3, &NodeMask::whole(&g)).unwrap();
        let dense = dense_eigenpairs(&a);
        let all = circulant_eigenvalues(&a, &g, 1).unwrap();
        assert_eq!(all.len(), g.len());
        for (x, y) in all.iter().zip(&dense.values) {
            assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()), "{x} vs {y}");
        }
        let k4 = circulant_eigenvalues(&a, &g, 4).unwrap();
        let lz = smallest_eigs(&a, &g, 6, Subspace::KInvariant(4)).unwrap();
        for (x, y) in lz.eigenvalues.iter().zip(&k4) {
            assert!((x - y).abs() < 1e-8 * (1.0 + y.abs()), "{x} vs {y}");
        }
        let v = Field::from_fn(&g, |r, t| 30.0 * (r - 0.5) * (1.0 - r) * (1.0 + 0.1 * t.cos()));
        let b = linearized_operator(&v, &LE3, &NodeMask::whole(&g)).unwrap();
        assert!(circulant_eigenvalues(&b, &g, 1).is_none());
    }

    #[test]
    fn eigenfields_are_orthonormal() {
        let g = grid(DomainSpec::annulus(0.5, 1.0).unwrap(), 10, 24);
        let u = Field::from_fn(&g, |r, t| {
            4.0 * (2.0 * std::f64::consts::PI * (r - 0.5)).sin() * (1.0 + 0.2 * (3.0 * t).cos())
        });
        let a = linearized_operator(&u, &LE3, &NodeMask::whole(&g)).unwrap();
        let s = smallest_eigs(&a, &g, 6, Subspace::Full).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let d = s.eigenfields[i].dot(&s.eigenfields[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-8);
            }
        }
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let dense = dense_eigenpairs(&a);
        for (x, y) in s.eigenvalues.iter().zip(&dense.values) {
            assert!((x - y).abs() < 1e-8 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn k_invariant_spectrum_is_subset() {
        let g = grid(DomainSpec::disk(1.0).unwrap(), 10, 24);
        let u = Field::from_fn(&g, |r, t| 3.0 * (1.0 - r * r) * (1.0 + 0.3 * (3.0 * t).cos()));
        let u = crate::grid::project_k_invariant(&u, 3).unwrap();
        let a = linearized_operator(&u, &LE3, &NodeMask::whole(&g)).unwrap();
        let full = smallest_eigs(&a, &g, 12, Subspace::Full).unwrap();
        let inv = smallest_eigs(&a, &g, 3, Subspace::KInvariant(3)).unwrap();
        for (l, f) in inv.eigenvalues.iter().zip(&inv.eigenfields) {
            assert!(crate::grid::k_invariance_defect(f, 3).unwrap() < 1e-10);
            assert!(full.eigenvalues.iter().any(|x| (x - l).abs() < 1e-7 * (1.0 + l.abs())));
        }
        let mf = morse_index(&u, &LE3, None).unwrap();
        let mk = morse_index(&u, &LE3, Some(3)).unwrap();
        assert!(mf.index >= mk.index);
    }

    #[test]
    fn sector_ground_state_is_one_signed() {
        let g = grid(DomainSpec::disk(1.0).unwrap(), 12, 32);
        let u = Field::from_fn(&g, |r, t| 2.0 * (1.0 - r * r) * (1.0 + 0.4 * t.cos()));
        let spec = SectorSpec::new(2, Direction::lattice(3, 32), SectorPart::Plus);
        let (l, phi) = sector_lambda1(&u, &LE3, &spec).unwrap();
        assert!(l.is_finite());
        assert!(phi.values().iter().all(|&x| x >= -1e-10));
        assert!((phi.dot(&phi) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn plus_minus_agree_for_symmetric_field() {
        let g = grid(DomainSpec::annulus(0.5, 1.0).unwrap(), 10, 32);
        let u = Field::from_fn(&g, |r, t| 3.0 * (1.0 - r) * (r - 0.5) * 8.0 * (1.0 + 0.5 * (2.0 * t).cos()));
        let u = crate::grid::project_k_invariant(&u, 2).unwrap();
        let e = Direction::new(0.0);
        let (lp, _) = sector_lambda1(&u, &LE3, &SectorSpec::new(2, e, SectorPart::Plus)).unwrap();
        let (lm, _) = sector_lambda1(&u, &LE3, &SectorSpec::new(2, e, SectorPart::Minus)).unwrap();
        assert!((lp - lm).abs() < 1e-8 * (1.0 + lp.abs()));
    }

    #[test]
    fn sector_lambda1_decreases_with_opening() {
        let g = grid(DomainSpec::disk(1.0).unwrap(), 12, 32);
        let u = Field::zeros(&g);
        let e = Direction::new(0.0);
        let (l1, _) = sector_lambda1(&u, &LE3, &SectorSpec::new(1, e, SectorPart::Plus)).unwrap();
        let (l2, _) = sector_lambda1(&u, &LE3, &SectorSpec::new(2, e, SectorPart::Plus)).unwrap();
        assert!(l1 < l2 && l1 > 0.0);
    }

    #[test]
    fn double_sector_rejected() {
        let g = grid(DomainSpec::disk(1.0).unwrap(), 6, 16);
        let spec = SectorSpec::new(1, Direction::new(0.0), SectorPart::Double);
        assert!(sector_lambda1(&Field::zeros(&g), &LE3, &spec).is_err());
    }
}
