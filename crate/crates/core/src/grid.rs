//! Polar tensor-product discretization.
//!
//! Nodes are cell-centred in `r` (`r_i = r_inner + (i + 1/2) dr`) and uniform
//! in `theta` (`theta_j = 2 pi j / n_theta`), indexed r-major: `node = i *
//! n_theta + j`. The pole of a disk is never a node.
//!
//! The discrete `-Δ` is the conservative five-point stencil
//! `-(1/r)(r u_r)_r - (1/r²) u_θθ`. Multiplying each row by the quadrature
//! weight `r_i dr dθ` makes it symmetric; that weighted matrix is the
//! *stiffness* `A`, and `-Δ_h = W⁻¹ A` with `W = diag(quad_w)`. Dirichlet
//! walls at cell faces use an odd ghost (`u_ghost = -u`), which keeps `A`
//! symmetric and second order.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{angular_offset, rotation_step, DomainSpec, MaskShape, NodeMask};

#[derive(Clone, Debug, PartialEq)]
pub struct PolarGrid {
    domain: DomainSpec,
    n_r: usize,
    n_theta: usize,
    dr: f64,
    dtheta: f64,
    radii: Vec<f64>,
    faces: Vec<f64>,
    ring_weight: Vec<f64>,
}

impl PolarGrid {
    pub fn new(domain: DomainSpec, n_r: usize, n_theta: usize) -> Result<Self> {
        domain.validate()?;
        if n_theta < 8 || !n_theta.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n_theta must be even and >= 8, got {n_theta}")));
        }
        if n_r < 2 {
            return Err(Error::InvalidGrid(format!("n_r must be >= 2, got {n_r}")));
        }
        let dr = (domain.r_outer - domain.r_inner) / n_r as f64;
        let dtheta = 2.0 * PI / n_theta as f64;
        let radii: Vec<f64> = (0..n_r).map(|i| domain.r_inner + (i as f64 + 0.5) * dr).collect();
        let faces: Vec<f64> = (0..=n_r).map(|i| domain.r_inner + i as f64 * dr).collect();
        let ring_weight = radii.iter().map(|r| r * dr * dtheta).collect();
        Ok(PolarGrid { domain, n_r, n_theta, dr, dtheta, radii, faces, ring_weight })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    #[inline]
    pub fn coords(&self, node: usize) -> (usize, usize) {
        (node / self.n_theta, node % self.n_theta)
    }

    pub fn position(&self, node: usize) -> [f64; 2] {
        let (i, j) = self.coords(node);
        let (r, t) = (self.radii[i], self.theta(j));
        [r * t.cos(), r * t.sin()]
    }

    /// Quadrature weight `r_i dr dθ` of a node.
    #[inline]
    pub fn quad_w(&self, node: usize) -> f64 {
        self.ring_weight[node / self.n_theta]
    }

    pub fn quad_weights(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.quad_w(n)).collect()
    }

    /// Stiffness coupling between rings `i` and `i + 1`.
    #[inline]
    fn radial_coupling(&self, face: usize) -> f64 {
        self.faces[face] * self.dtheta / self.dr
    }

    /// Stiffness coupling between angular neighbours on ring `i`.
    #[inline]
    fn angular_coupling(&self, i: usize) -> f64 {
        self.dr / (self.radii[i] * self.dtheta)
    }

    /// Stiffness coupling through the inner wall. For a disk the inner face
    /// is the pole, whose radius (and hence through-origin flux) is zero.
    #[inline]
    fn inner_wall(&self) -> f64 {
        self.radial_coupling(0)
    }

    #[inline]
    fn outer_wall(&self) -> f64 {
        self.radial_coupling(self.n_r)
    }
}

/// Real-valued grid function.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Arc<PolarGrid>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Arc<PolarGrid>) -> Self {
        Field { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: &Arc<PolarGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::MaskMismatch(format!("{} values for a grid of {} nodes", values.len(), grid.len())));
        }
        Ok(Field { grid: grid.clone(), values })
    }

    /// Samples `f(r, theta)` at every node.
    pub fn from_fn(grid: &Arc<PolarGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|n| {
                let (i, j) = grid.coords(n);
                f(grid.radius(i), grid.theta(j))
            })
            .collect();
        Field { grid: grid.clone(), values }
    }

    /// Lifts a ring profile to a radial field.
    pub fn from_radial(grid: &Arc<PolarGrid>, profile: &[f64]) -> Result<Self> {
        if profile.len() != grid.n_r() {
            return Err(Error::MaskMismatch(format!("profile of length {} for {} rings", profile.len(), grid.n_r())));
        }
        Ok(Field::from_fn(grid, |_, _| 0.0).map_nodes(|n, _| profile[grid.coords(n).0]))
    }

    pub fn grid(&self) -> &Arc<PolarGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.node(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn map_nodes(&self, f: impl Fn(usize, f64) -> f64) -> Field {
        Field { grid: self.grid.clone(), values: self.values.iter().enumerate().map(|(n, &v)| f(n, v)).collect() }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Quadrature inner product `∫ u v dx`.
    pub fn dot(&self, other: &Field) -> f64 {
        let g = &self.grid;
        self.values.iter().zip(&other.values).enumerate().map(|(n, (a, b))| g.quad_w(n) * a * b).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

/// Sparse symmetric stiffness over the nodes of a mask, plus the diagonal
/// quadrature mass.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    mask: NodeMask,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    mass: Vec<f64>,
}

impl OperatorMatrix {
    pub fn mask(&self) -> &NodeMask {
        &self.mask
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut s = 0.0;
            for t in a..b {
                s += self.vals[t] * x[self.cols[t]];
            }
            *yr = s;
        }
    }

    /// `A - diag(mass * pot)`, with `pot` sampled on the mask's nodes.
    pub fn with_potential(&self, pot: &Field) -> OperatorMatrix {
        let mut out = self.clone();
        for (r, &node) in self.mask.nodes().iter().enumerate() {
            let shift = self.mass[r] * pot.values()[node];
            for t in out.row_ptr[r]..out.row_ptr[r + 1] {
                if out.cols[t] == r {
                    out.vals[t] -= shift;
                }
            }
        }
        out
    }

    /// `A - sigma * M`.
    pub fn shifted(&self, sigma: f64) -> OperatorMatrix {
        let mut out = self.clone();
        for r in 0..self.dim() {
            for t in out.row_ptr[r]..out.row_ptr[r + 1] {
                if out.cols[t] == r {
                    out.vals[t] -= sigma * self.mass[r];
                }
            }
        }
        out
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|r| self.get(r, r)).collect()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        let mut colsum = vec![0.0; self.dim()];
        for r in 0..self.dim() {
            for (c, v) in self.row(r) {
                colsum[c] += v.abs();
            }
        }
        colsum.into_iter().fold(0.0, f64::max)
    }

    pub fn half_bandwidth(&self) -> usize {
        let mut b = 0;
        for r in 0..self.dim() {
            for (c, _) in self.row(r) {
                b = b.max(r.abs_diff(c));
            }
        }
        b
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim() {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Gershgorin bounds on the generalized spectrum of `(A, M)`.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..self.dim() {
            let mut d = 0.0;
            let mut off = 0.0;
            for (c, v) in self.row(r) {
                if c == r {
                    d = v;
                } else {
                    off += v.abs();
                }
            }
            lo = lo.min((d - off) / self.mass[r]);
            hi = hi.max((d + off) / self.mass[r]);
        }
        (lo, hi)
    }

    /// Gathers a full-grid field onto the mask.
    pub fn restrict(&self, f: &Field) -> Vec<f64> {
        self.mask.nodes().iter().map(|&n| f.values()[n]).collect()
    }

    /// Scatters mask values into a full-grid field (zero elsewhere).
    pub fn extend(&self, grid: &Arc<PolarGrid>, local: &[f64]) -> Field {
        let mut f = Field::zeros(grid);
        for (&n, &v) in self.mask.nodes().iter().zip(local) {
            f.values[n] = v;
        }
        f
    }

    /// `xᵀ A y` over the mask.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut ay = vec![0.0; self.dim()];
        self.matvec(y, &mut ay);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }
}

/// Assembles the Dirichlet stiffness of `-Δ` on a mask.
///
/// Sector edges are Dirichlet lines: a neighbour lying exactly on an edge
/// contributes zero, and a neighbour across an edge that falls between two
/// node columns is the mirror image of the row node (odd ghost).
pub fn build_laplacian(grid: &PolarGrid, mask: &NodeMask) -> Result<OperatorMatrix> {
    if mask.grid_len() != grid.len() {
        return Err(Error::IncompatibleSymmetry(format!(
            "mask built for {} nodes used on a grid of {}",
            mask.grid_len(),
            grid.len()
        )));
    }
    let n_theta = grid.n_theta();
    let n_r = grid.n_r();
    let dim = mask.len();
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::with_capacity(5 * dim);
    let mut vals = Vec::with_capacity(5 * dim);
    let mut mass = Vec::with_capacity(dim);
    row_ptr.push(0);

    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(5);
    for (r, &node) in mask.nodes().iter().enumerate() {
        let (i, j) = grid.coords(node);
        let mut diag = 0.0;
        entries.clear();

        // radial neighbours
        let c_in = if i == 0 { grid.inner_wall() } else { grid.radial_coupling(i) };
        if i == 0 {
            // odd ghost across the inner wall; zero weight at the pole
            diag += 2.0 * c_in;
        } else {
            diag += c_in;
            let nb = grid.node(i - 1, j);
            if let Some(l) = mask.local_index(nb) {
                entries.push((l, -c_in));
            }
        }
        let c_out = if i + 1 == n_r { grid.outer_wall() } else { grid.radial_coupling(i + 1) };
        if i + 1 == n_r {
            diag += 2.0 * c_out;
        } else {
            diag += c_out;
            let nb = grid.node(i + 1, j);
            if let Some(l) = mask.local_index(nb) {
                entries.push((l, -c_out));
            }
        }

        // angular neighbours
        let ct = grid.angular_coupling(i);
        match mask.shape() {
            MaskShape::Whole => {
                for jn in [(j + n_theta - 1) % n_theta, (j + 1) % n_theta] {
                    diag += ct;
                    entries.push((mask.local_index(grid.node(i, jn)).unwrap(), -ct));
                }
            }
            MaskShape::Sector { lower, width } => {
                let q = angular_offset(j, lower, n_theta) as i64;
                let w = width as i64;
                for (dq, jn) in [(-2i64, (j + n_theta - 1) % n_theta), (2, (j + 1) % n_theta)] {
                    let qn = q + dq;
                    if qn > 0 && qn < w {
                        diag += ct;
                        entries.push((mask.local_index(grid.node(i, jn)).unwrap(), -ct));
                    } else if qn == 0 || qn == w {
                        diag += ct;
                    } else {
                        diag += 2.0 * ct;
                    }
                }
            }
        }

        entries.push((r, diag));
        entries.sort_unstable_by_key(|e| e.0);
        for &(c, v) in &entries {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
        mass.push(grid.quad_w(node));
    }

    Ok(OperatorMatrix { mask: mask.clone(), row_ptr, cols, vals, mass })
}

/// `-Δ_h u` on the whole domain, evaluated in flux-difference form so that
/// rounding stays proportional to the local differences.
pub fn neg_laplacian(u: &Field) -> Field {
    let g = u.grid().clone();
    let (n_r, n_theta) = (g.n_r(), g.n_theta());
    let v = u.values();
    let mut out = vec![0.0; g.len()];
    for i in 0..n_r {
        let ct = g.angular_coupling(i);
        let c_in = g.radial_coupling(i);
        let c_out = g.radial_coupling(i + 1);
        let w = g.ring_weight[i];
        for j in 0..n_theta {
            let n = g.node(i, j);
            let x = v[n];
            let mut s = 0.0;
            s += if i == 0 { 2.0 * c_in * x } else { c_in * (x - v[n - n_theta]) };
            s += if i + 1 == n_r { 2.0 * c_out * x } else { c_out * (x - v[n + n_theta]) };
            let jm = if j == 0 { n_theta - 1 } else { j - 1 };
            let jp = if j + 1 == n_theta { 0 } else { j + 1 };
            s += ct * ((x - v[g.node(i, jm)]) + (x - v[g.node(i, jp)]));
            out[n] = s / w;
        }
    }
    Field { grid: g, values: out }
}

/// Dirichlet energy `uᵀ A v` on the whole domain, summed edge by edge.
pub fn stiffness_form(u: &Field, v: &Field) -> f64 {
    let g = u.grid();
    let (n_r, n_theta) = (g.n_r(), g.n_theta());
    let (a, b) = (u.values(), v.values());
    let mut s = 0.0;
    for i in 0..n_r {
        let ct = g.angular_coupling(i);
        for j in 0..n_theta {
            let n = g.node(i, j);
            let jp = if j + 1 == n_theta { g.node(i, 0) } else { n + 1 };
            s += ct * (a[n] - a[jp]) * (b[n] - b[jp]);
            if i + 1 < n_r {
                s += g.radial_coupling(i + 1) * (a[n] - a[n + n_theta]) * (b[n] - b[n + n_theta]);
            }
        }
    }
    let (c_in, c_out) = (g.inner_wall(), g.outer_wall());
    for j in 0..n_theta {
        let n0 = g.node(0, j);
        let n1 = g.node(n_r - 1, j);
        s += 2.0 * c_in * a[n0] * b[n0] + 2.0 * c_out * a[n1] * b[n1];
    }
    s
}

/// Fourth-order accurate `-Δ u` on rings `ring_lo..ring_hi`, used as an
/// independent reference stencil. Values below ring 0 of a disk are taken
/// through the origin at `theta + pi`; other out-of-range rings are rejected.
pub fn neg_laplacian_fourth_order(u: &Field, ring_lo: usize, ring_hi: usize) -> Result<Field> {
    let g = u.grid().clone();
    let (n_r, n_theta) = (g.n_r(), g.n_theta());
    let pole = g.domain().has_pole();
    if ring_hi + 2 > n_r || (!pole && ring_lo < 2) || ring_lo >= ring_hi {
        return Err(Error::InvalidGrid(format!(
            "fourth-order stencil needs two rings of margin, got {ring_lo}..{ring_hi} of {n_r}"
        )));
    }
    let v = u.values();
    let sample = |i: i64, j: usize| -> f64 {
        if i >= 0 {
            v[g.node(i as usize, j)]
        } else {
            v[g.node((-i - 1) as usize, (j + n_theta / 2) % n_theta)]
        }
    };
    let (dr, dt) = (g.dr(), g.dtheta());
    let mut out = Field::zeros(&g);
    for i in ring_lo..ring_hi {
        let r = g.radius(i);
        let ii = i as i64;
        for j in 0..n_theta {
            let jm1 = (j + n_theta - 1) % n_theta;
            let jm2 = (j + n_theta - 2) % n_theta;
            let jp1 = (j + 1) % n_theta;
            let jp2 = (j + 2) % n_theta;
            let (um2, um1, u0, up1, up2) =
                (sample(ii - 2, j), sample(ii - 1, j), sample(ii, j), sample(ii + 1, j), sample(ii + 2, j));
            let urr = (-up2 + 16.0 * up1 - 30.0 * u0 + 16.0 * um1 - um2) / (12.0 * dr * dr);
            let ur = (-up2 + 8.0 * up1 - 8.0 * um1 + um2) / (12.0 * dr);
            let (tm2, tm1, tp1, tp2) = (sample(ii, jm2), sample(ii, jm1), sample(ii, jp1), sample(ii, jp2));
            let utt = (-tp2 + 16.0 * tp1 - 30.0 * u0 + 16.0 * tm1 - tm2) / (12.0 * dt * dt);
            out.values[g.node(i, j)] = -(urr + ur / r + utt / (r * r));
        }
    }
    Ok(out)
}

/// Centred periodic difference `∂u/∂θ`.
pub fn angular_derivative(u: &Field) -> Field {
    let g = u.grid().clone();
    let n_theta = g.n_theta();
    let v = u.values();
    let inv = 1.0 / (2.0 * g.dtheta());
    let mut out = vec![0.0; g.len()];
    for i in 0..g.n_r() {
        let base = i * n_theta;
        for j in 0..n_theta {
            let jm = if j == 0 { n_theta - 1 } else { j - 1 };
            let jp = if j + 1 == n_theta { 0 } else { j + 1 };
            out[base + j] = (v[base + jp] - v[base + jm]) * inv;
        }
    }
    Field { grid: g, values: out }
}

/// Average over the `k` rotations by `2 pi / k`.
///
/// Each orbit is summed in sorted order, so the result is bitwise invariant
/// under the rotation group and equal inputs up to rotation give equal
/// outputs.
pub fn project_k_invariant(u: &Field, k: usize) -> Result<Field> {
    let mut out = u.clone();
    project_k_invariant_in_place(u.grid(), k, &mut out.values)?;
    Ok(out)
}

/// In-place form of [`project_k_invariant`] on raw r-major values.
pub fn project_k_invariant_in_place(g: &PolarGrid, k: usize, v: &mut [f64]) -> Result<()> {
    let step = rotation_step(g, k)?;
    if k == 1 {
        return Ok(());
    }
    let n_theta = g.n_theta();
    let mut orbit = vec![0.0; k];
    for i in 0..g.n_r() {
        let base = i * n_theta;
        for j0 in 0..step {
            for (s, o) in orbit.iter_mut().enumerate() {
                *o = v[base + j0 + s * step];
            }
            orbit.sort_unstable_by(f64::total_cmp);
            let mean = orbit.iter().sum::<f64>() / k as f64;
            for s in 0..k {
                v[base + j0 + s * step] = mean;
            }
        }
    }
    Ok(())
}

/// Largest deviation of `u` from its `k`-invariant projection.
pub fn k_invariance_defect(u: &Field, k: usize) -> Result<f64> {
    let p = project_k_invariant(u, k)?;
    Ok(u.sub(&p).sup_norm())
}

/// `Q(v, w) = vᵀ (A - W pot) w` over a mask; `v` and `w` must vanish off it.
pub fn quad_form(pot: &Field, v: &Field, w: &Field, mask: &NodeMask) -> Result<f64> {
    let g = v.grid().clone();
    if !(v.same_grid(w) && v.same_grid(pot)) {
        return Err(Error::MaskMismatch("fields live on different grids".into()));
    }
    for f in [v, w] {
        if let Some(n) = (0..g.len()).find(|&n| !mask.contains(n) && f.values()[n] != 0.0) {
            return Err(Error::MaskMismatch(format!("field is nonzero at node {n} outside the mask")));
        }
    }
    let op = build_laplacian(&g, mask)?.with_potential(pot);
    Ok(op.bilinear(&op.restrict(v), &op.restrict(w)))
}
