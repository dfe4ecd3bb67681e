//! Reflection differences, the rotating-axis scan, angular monotonicity and
//! the sector eigenfunction test `h(ψ)`; `classify` combines them into a
//! verdict.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{reflect_node_lattice, sector_mask, Direction, SectorPart, SectorSpec};
use crate::grid::{angular_derivative, k_invariance_defect, neg_laplacian_fourth_order, Field};
use crate::nonlin::{comparison_potentials, Nonlinearity};
use crate::spectra::{linearized_operator, sector_lambda1, smallest_eigs, zero_tol, Subspace};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// `||u_θ||∞ / ||u||∞` below this means radial.
    pub radial: f64,
    /// `||w_ψ||∞ / ||u||∞` below this means symmetric about `ψ`.
    pub sym: f64,
    /// Sign threshold for `u_θ` and `w`, relative to `||u||∞`.
    pub sign: f64,
    /// Admissible fraction of sign violations per half-sector.
    pub mono: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { radial: 1e-6, sym: 1e-3, sign: 1e-8, mono: 1e-3 }
    }
}

/// `w_e = u∘σ_e - u`.
pub fn difference_field(u: &Field, e: &Direction) -> Result<Field> {
    let g = u.grid().clone();
    let m = e.lattice_index(g.n_theta())?;
    Ok(difference_lattice(u, m))
}

fn difference_lattice(u: &Field, m: usize) -> Field {
    let g = u.grid();
    let v = u.values();
    u.map_nodes(|n, x| v[reflect_node_lattice(g, m, n)] - x)
}

fn lattice_psi(m: usize, n_theta: usize) -> f64 {
    Direction::lattice(m as i64, n_theta).psi()
}

fn check_invariant(u: &Field, k: usize) -> Result<()> {
    let defect = k_invariance_defect(u, k)?;
    if defect > 1e-10 * u.sup_norm().max(1.0) {
        return Err(Error::NotKInvariant { k, defect });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxisStat {
    pub m: usize,
    pub psi: f64,
    pub min: f64,
    pub max: f64,
    pub sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxisScan {
    /// Statistics of `w_ψ` on `S⁺_{k,ψ}` for `ψ = mπ/N_θ`, `0 <= m < 2N_θ/k`.
    pub table: Vec<AxisStat>,
    /// Number of leading directions with `min w_ψ >= -tol`.
    pub prefix: usize,
    pub psi_tilde: f64,
    pub resolution: f64,
    /// Direction index minimizing `||w_ψ||∞` (first on ties).
    pub best: usize,
    pub psi_star: f64,
    pub best_sup: f64,
    /// Directions within twice the minimal norm.
    pub near_minimal: Vec<usize>,
}

/// Scans every lattice direction in `[0, 2π/k)`.
pub fn axis_scan(u: &Field, k: usize, tol: &Tolerances) -> Result<AxisScan> {
    check_invariant(u, k)?;
    let g = u.grid().clone();
    let n_theta = g.n_theta();
    let count = 2 * n_theta / k;
    let mut table = Vec::with_capacity(count);
    for m in 0..count {
        let spec = SectorSpec::new(k, Direction::lattice(m as i64, n_theta), SectorPart::Plus);
        let mask = sector_mask(&g, &spec)?;
        let v = u.values();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &n in mask.interior.nodes() {
            let w = v[reflect_node_lattice(&g, m, n)] - v[n];
            lo = lo.min(w);
            hi = hi.max(w);
        }
        table.push(AxisStat { m, psi: lattice_psi(m, n_theta), min: lo, max: hi, sup: lo.abs().max(hi.abs()) });
    }
    let thresh = tol.sign * u.sup_norm();
    let half = n_theta / k;
    let prefix = table[..half].iter().take_while(|s| s.min >= -thresh).count();
    let mut best = 0;
    for (m, s) in table.iter().enumerate() {
        if s.sup < table[best].sup {
            best = m;
        }
    }
    let best_sup = table[best].sup;
    let near_minimal = table.iter().filter(|s| s.sup <= 2.0 * best_sup).map(|s| s.m).collect();
    let resolution = std::f64::consts::PI / n_theta as f64;
    Ok(AxisScan {
        prefix,
        psi_tilde: prefix as f64 * resolution,
        resolution,
        best,
        psi_star: table[best].psi,
        best_sup,
        near_minimal,
        table,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SideStats {
    pub nodes: usize,
    pub neg_fraction: f64,
    pub pos_fraction: f64,
}

impl SideStats {
    /// Sign of the majority of `u_θ` and the fraction of the other sign.
    fn dominant(&self) -> (f64, f64) {
        if self.pos_fraction >= self.neg_fraction {
            (1.0, self.neg_fraction)
        } else {
            (-1.0, self.pos_fraction)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Monotonicity {
    pub plus: SideStats,
    pub minus: SideStats,
    pub violation: f64,
    pub strict: bool,
}

/// Sign statistics of `u_θ` on `S^±_{k,e}`.
pub fn monotonicity_verdict(u: &Field, e: &Direction, k: usize, tol: &Tolerances) -> Result<Monotonicity> {
    let g = u.grid().clone();
    e.lattice_index(g.n_theta())?;
    let ut = angular_derivative(u);
    let thresh = tol.sign * u.sup_norm();
    let side = |part: SectorPart| -> Result<SideStats> {
        let mask = sector_mask(&g, &SectorSpec::new(k, *e, part))?;
        let nodes = mask.interior.len();
        let (mut neg, mut pos) = (0usize, 0usize);
        for &n in mask.interior.nodes() {
            let d = ut.values()[n];
            if d < -thresh {
                neg += 1;
            } else if d > thresh {
                pos += 1;
            }
        }
        let denom = nodes.max(1) as f64;
        Ok(SideStats { nodes, neg_fraction: neg as f64 / denom, pos_fraction: pos as f64 / denom })
    };
    let plus = side(SectorPart::Plus)?;
    let minus = side(SectorPart::Minus)?;
    let (sp, vp) = plus.dominant();
    let (sm, vm) = minus.dominant();
    let violation = vp.max(vm);
    let active = plus.pos_fraction + plus.neg_fraction > 0.0 && minus.pos_fraction + minus.neg_fraction > 0.0;
    Ok(Monotonicity { plus, minus, violation, strict: active && violation < tol.mono && sp != sm })
}

/// `||(-Δ - V_e) w_e||∞` on `S_{2k,e}`, with `-Δ` evaluated by an
/// independent fourth-order stencil on rings at least two cells away from
/// the radial walls.
pub fn residual_l_e(u: &Field, nl: &Nonlinearity, e: &Direction, k: usize) -> Result<f64> {
    let g = u.grid().clone();
    let w = difference_field(u, e)?;
    let (ve, _) = comparison_potentials(nl, u, e)?;
    let (lo, hi) = (2, g.n_r() - 2);
    let lap = neg_laplacian_fourth_order(&w, lo, hi)?;
    let mask = sector_mask(&g, &SectorSpec::new(k, *e, SectorPart::Double))?;
    let mut worst: f64 = 0.0;
    for &n in mask.interior.nodes() {
        let i = n / g.n_theta();
        if i >= lo && i < hi {
            worst = worst.max((lap.values()[n] - ve.values()[n] * w.values()[n]).abs());
        }
    }
    Ok(worst)
}

/// `(w¹, w²)` with `w¹ = w⁺ on S⁺, -w⁻ on S⁻` and `w² = -w⁻ on S⁺, w⁺ on S⁻`,
/// where `w⁺ = max(w, 0)` and `w⁻ = min(w, 0)`; both vanish off `S_{2k,e}`.
pub fn split_fields(w: &Field, e: &Direction, k: usize) -> Result<(Field, Field)> {
    let g = w.grid().clone();
    let plus = sector_mask(&g, &SectorSpec::new(k, *e, SectorPart::Plus))?;
    let minus = sector_mask(&g, &SectorSpec::new(k, *e, SectorPart::Minus))?;
    let mut w1 = Field::zeros(&g);
    let mut w2 = Field::zeros(&g);
    let v = w.values();
    for &n in plus.interior.nodes() {
        w1.values_mut()[n] = v[n].max(0.0);
        w2.values_mut()[n] = -v[n].min(0.0);
    }
    for &n in minus.interior.nodes() {
        w1.values_mut()[n] = -v[n].min(0.0);
        w2.values_mut()[n] = v[n].max(0.0);
    }
    Ok((w1, w2))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HSample {
    pub m: usize,
    pub psi: f64,
    pub h: f64,
    pub a: f64,
    pub b: f64,
    pub lambda1_plus: f64,
    pub lambda1_minus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XiDiagnostic {
    pub samples: Vec<HSample>,
    /// `|h(π/k) + h(0)|`.
    pub endpoint_defect: f64,
    /// `max_ψ |h(ψ)|`.
    pub endpoint_scale: f64,
    pub endpoint_ok: bool,
    /// Lattice interval `[m, m+1]` (or a single point) where `h` changes sign.
    pub sign_change: Option<(usize, usize)>,
    /// Sample index chosen inside the sign-change interval.
    pub located: Option<usize>,
    pub zero_tol: f64,
    /// `max(λ₁(S⁺), λ₁(S⁻)) >= -zero_tol` at the located direction.
    pub nonnegative_sector: bool,
}

/// Builds `ξ_ψ = A φ⁺ - B φ⁻` from the first sector eigenfunctions for each
/// lattice `ψ ∈ [0, π/k]` and evaluates `h(ψ) = ∫ ξ_ψ φ₂`, where `φ₁, φ₂` are
/// the first two k-invariant eigenfunctions of `L_u`.
pub fn xi_h_diagnostic(u: &Field, nl: &Nonlinearity, k: usize) -> Result<XiDiagnostic> {
    check_invariant(u, k)?;
    let g = u.grid().clone();
    let n_theta = g.n_theta();
    let whole = crate::geometry::NodeMask::whole(&g);
    let a = linearized_operator(u, nl, &whole)?;
    let ztol = zero_tol(&a);
    let spec = smallest_eigs(&a, &g, 4, Subspace::KInvariant(k))?;
    let index = spec.eigenvalues.iter().filter(|&&l| l < -ztol).count();
    if index != 2 {
        return Err(Error::IndexMismatch { expected: 2, found: index });
    }
    let mut phi1 = spec.eigenfields[0].clone();
    if phi1.values().iter().sum::<f64>() < 0.0 {
        phi1 = phi1.scale(-1.0);
    }
    let phi2 = &spec.eigenfields[1];

    let mut samples = Vec::new();
    for m in 0..=n_theta / k {
        let e = Direction::lattice(m as i64, n_theta);
        let (lp, fp) = sector_lambda1(u, nl, &SectorSpec::new(k, e, SectorPart::Plus))?;
        let (lm, fm) = sector_lambda1(u, nl, &SectorSpec::new(k, e, SectorPart::Minus))?;
        let ip = fp.dot(&phi1);
        let im = fm.dot(&phi1);
        for v in [ip, im] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::NonpositiveOverlap { psi: e.psi(), value: v });
            }
        }
        let aa = (im / ip).sqrt();
        let bb = 1.0 / aa;
        let h = aa * fp.dot(phi2) - bb * fm.dot(phi2);
        samples.push(HSample { m, psi: e.psi(), h, a: aa, b: bb, lambda1_plus: lp, lambda1_minus: lm });
    }
    let h0 = samples[0].h;
    let hk = samples.last().expect("nonempty lattice").h;
    let endpoint_defect = (hk + h0).abs();
    let endpoint_scale = samples.iter().fold(1e-300f64, |m, s| m.max(s.h.abs()));
    let endpoint_ok = endpoint_defect <= 1e-8 * endpoint_scale;

    let mut sign_change = None;
    let mut located = None;
    if h0 == 0.0 {
        sign_change = Some((0, 0));
        located = Some(0);
    } else {
        for t in 0..samples.len() - 1 {
            let (x, y) = (samples[t].h, samples[t + 1].h);
            if x == 0.0 || x * y <= 0.0 {
                sign_change = Some((t, t + 1));
                located = Some(if x.abs() <= y.abs() { t } else { t + 1 });
                break;
            }
        }
    }
    let nonnegative_sector = located.is_some_and(|t| samples[t].lambda1_plus.max(samples[t].lambda1_minus) >= -ztol);
    Ok(XiDiagnostic {
        samples,
        endpoint_defect,
        endpoint_scale,
        endpoint_ok,
        sign_change,
        located,
        zero_tol: ztol,
        nonnegative_sector,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    Radial,
    AxisSymmetricMonotone { psi: f64 },
    Violation { details: String },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Radial => "Radial",
            Verdict::AxisSymmetricMonotone { .. } => "AxisSymmetricMonotone",
            Verdict::Violation { .. } => "Violation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtremaPlacement {
    pub extrema: usize,
    /// Extrema within one angular step of an axis `ψ* + hπ/k` or on the
    /// innermost ring.
    pub on_axes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub verdict: Verdict,
    pub k: usize,
    pub angular_ratio: f64,
    pub scan: AxisScan,
    pub sym_ratio: f64,
    pub monotonicity: Monotonicity,
    pub lambda1_plus: f64,
    pub lambda1_minus: f64,
    pub extrema: ExtremaPlacement,
    pub h_samples: Option<XiDiagnostic>,
    pub tolerances: Tolerances,
}

fn extrema_placement(u: &Field, m_star: usize, k: usize, tol: &Tolerances) -> ExtremaPlacement {
    let g = u.grid();
    let (n_r, n_theta) = (g.n_r(), g.n_theta());
    let v = u.values();
    let thresh = tol.sign * u.sup_norm();
    let mut extrema = 0;
    let mut on_axes = 0;
    // axes ψ* + hπ/k in half-steps of π/N_θ
    let spacing = 2 * n_theta / (2 * k);
    let period = 2 * n_theta;
    for i in 0..n_r {
        for j in 0..n_theta {
            let n = g.node(i, j);
            let mut nb = vec![v[g.node(i, (j + 1) % n_theta)], v[g.node(i, (j + n_theta - 1) % n_theta)]];
            if i > 0 {
                nb.push(v[n - n_theta]);
            }
            if i + 1 < n_r {
                nb.push(v[n + n_theta]);
            }
            let x = v[n];
            let is_max = nb.iter().all(|&y| x > y + thresh);
            let is_min = nb.iter().all(|&y| x < y - thresh);
            if !(is_max || is_min) || i + 1 == n_r || (i == 0 && !g.domain().has_pole()) {
                continue;
            }
            extrema += 1;
            let h = (2 * j + period - m_star % period) % period;
            let off = h % spacing;
            let dist = off.min(spacing - off);
            if dist <= 2 || i == 0 {
                on_axes += 1;
            }
        }
    }
    ExtremaPlacement { extrema, on_axes }
}

/// Radial check, axis scan, monotonicity at the best axis and the sector
/// eigenvalues there.
pub fn classify(u: &Field, nl: &Nonlinearity, k: usize, tol: &Tolerances) -> Result<SymmetryReport> {
    check_invariant(u, k)?;
    let g = u.grid().clone();
    let un = u.sup_norm();
    let angular_ratio = if un == 0.0 { 0.0 } else { angular_derivative(u).sup_norm() / un };
    let scan = axis_scan(u, k, tol)?;
    let e = Direction::lattice(scan.best as i64, g.n_theta());
    let monotonicity = monotonicity_verdict(u, &e, k, tol)?;
    let (lambda1_plus, _) = sector_lambda1(u, nl, &SectorSpec::new(k, e, SectorPart::Plus))?;
    let (lambda1_minus, _) = sector_lambda1(u, nl, &SectorSpec::new(k, e, SectorPart::Minus))?;
    let sym_ratio = if un == 0.0 { 0.0 } else { scan.best_sup / un };
    let extrema = extrema_placement(u, scan.best, k, tol);
    let verdict = if angular_ratio < tol.radial {
        Verdict::Radial
    } else if sym_ratio < tol.sym && monotonicity.strict {
        Verdict::AxisSymmetricMonotone { psi: scan.psi_star }
    } else {
        let mut why = Vec::new();
        if sym_ratio >= tol.sym {
            why.push(format!("min_psi ||w_psi||/||u|| = {sym_ratio:.3e} >= {:.1e}", tol.sym));
        }
        if !monotonicity.strict {
            why.push(format!(
                "u_theta not one-signed at psi* (violation fraction {:.3e}, plus {:?}, minus {:?})",
                monotonicity.violation, monotonicity.plus, monotonicity.minus
            ));
        }
        Verdict::Violation { details: why.join("; ") }
    };
    Ok(SymmetryReport {
        verdict,
        k,
        angular_ratio,
        sym_ratio,
        scan,
        monotonicity,
        lambda1_plus,
        lambda1_minus,
        extrema,
        h_samples: None,
        tolerances: *tol,
    })
}
