//! Banded factorizations and a shift-invert eigensolver for the symmetric
//! pencil `(A, M)` with diagonal `M`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::OperatorMatrix;

/// In-place projection applied to basis vectors.
pub type Projector<'a> = &'a dyn Fn(&mut [f64]);

/// Lower Cholesky factor of an SPD band matrix, stored row by row.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    b: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &OperatorMatrix) -> Result<Self> {
        let n = a.dim();
        let b = a.half_bandwidth();
        let w = b + 1;
        let mut l = vec![0.0; n * w];
        for r in 0..n {
            for (c, v) in a.row(r) {
                if c <= r {
                    l[r * w + (c + b - r)] = v;
                }
            }
        }
        for i in 0..n {
            let i0 = i.saturating_sub(b);
            for j in i0..=i {
                let k0 = i0.max(j.saturating_sub(b));
                let mut s = l[i * w + (j + b - i)];
                let ri = i * w + b - i;
                let rj = j * w + b - j;
                for k in k0..j {
                    s -= l[ri + k] * l[rj + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::SingularJacobian(i));
                    }
                    l[i * w + b] = s.sqrt();
                } else {
                    l[i * w + (j + b - i)] = s / l[j * w + b];
                }
            }
        }
        Ok(BandCholesky { n, b, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        for i in 0..n {
            let ri = i * w + b - i;
            let mut s = x[i];
            for k in i.saturating_sub(b)..i {
                s -= self.l[ri + k] * x[k];
            }
            x[i] = s / self.l[i * w + b];
        }
        for i in (0..n).rev() {
            x[i] /= self.l[i * w + b];
            let xi = x[i];
            let ri = i * w + b - i;
            for k in i.saturating_sub(b)..i {
                x[k] -= self.l[ri + k] * xi;
            }
        }
    }
}

/// LU factorization with partial pivoting of a band matrix, column-major
/// band storage with room for pivoting fill.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &OperatorMatrix) -> Result<Self> {
        let n = a.dim();
        let kl = a.half_bandwidth();
        let ku = kl;
        let kv = kl + ku;
        let ld = 2 * kl + ku + 1;
        let mut ab = vec![0.0; n * ld];
        for r in 0..n {
            for (c, v) in a.row(r) {
                ab[c * ld + kv + r - c] = v;
            }
        }
        let mut ipiv = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ld + kv;
            let mut jp = 0;
            let mut best = ab[col].abs();
            for t in 1..=km {
                let v = ab[col + t].abs();
                if v > best {
                    best = v;
                    jp = t;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularJacobian(j));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let base = c * ld + kv - c;
                    ab.swap(base + j, base + j + jp);
                }
            }
            let piv = ab[col];
            for t in 1..=km {
                ab[col + t] /= piv;
            }
            if km > 0 {
                for c in j + 1..=ju {
                    let base = c * ld + kv - c;
                    let ajc = ab[base + j];
                    if ajc != 0.0 {
                        for t in 1..=km {
                            ab[base + j + t] -= ab[col + t] * ajc;
                        }
                    }
                }
            }
        }
        Ok(BandLu { n, kl, ku, ab, ipiv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, kl) = (self.n, self.kl);
        let kv = kl + self.ku;
        let ld = 2 * kl + self.ku + 1;
        for j in 0..n {
            let lm = kl.min(n - 1 - j);
            let p = self.ipiv[j];
            if p != j {
                x.swap(p, j);
            }
            let xj = x[j];
            let col = j * ld + kv;
            for t in 1..=lm {
                x[j + t] -= self.ab[col + t] * xj;
            }
        }
        for j in (0..n).rev() {
            let base = j * ld + kv - j;
            x[j] /= self.ab[base + j];
            let xj = x[j];
            for i in j.saturating_sub(kv)..j {
                x[i] -= self.ab[base + i] * xj;
            }
        }
    }
}

/// Symmetric band matrix, lower half stored row by row.
#[derive(Clone, Debug)]
pub struct SymBand {
    n: usize,
    b: usize,
    l: Vec<f64>,
}

/// Signs of the pivots of an unpivoted `LDLᵀ`. By Sylvester's law of
/// inertia they count the eigenvalues of each sign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Inertia {
    pub negative: usize,
    pub positive: usize,
    /// `max |L_ij|² |D_j|` over `max |a_ij|`.
    pub growth: f64,
}

/// Largest pivot growth for which an inertia count is trusted.
pub const INERTIA_MAX_GROWTH: f64 = 1e6;

impl SymBand {
    pub fn zeros(n: usize, b: usize) -> Self {
        SymBand { n, b, l: vec![0.0; n * (b + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `v` at `(i, j)`; entries above the diagonal are ignored.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if j <= i {
            assert!(i - j <= self.b, "entry ({i}, {j}) outside the band");
            self.l[i * (self.b + 1) + (j + self.b - i)] += v;
        }
    }

    /// `a - sigma·diag(mass)` in band form.
    pub fn from_operator(a: &OperatorMatrix, sigma: f64) -> Self {
        let mut s = SymBand::zeros(a.dim(), a.half_bandwidth());
        for r in 0..a.dim() {
            for (c, v) in a.row(r) {
                s.add(r, c, v);
            }
            s.add(r, r, -sigma * a.mass()[r]);
        }
        s
    }

    /// Inertia from `LDLᵀ` without pivoting. `None` on a zero or
    /// non-finite pivot or when the growth exceeds [`INERTIA_MAX_GROWTH`].
    pub fn inertia(mut self) -> Option<Inertia> {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        let amax = self.l.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if amax == 0.0 {
            return None;
        }
        let l = &mut self.l;
        let mut big = 0.0f64;
        let (mut negative, mut positive) = (0, 0);
        for i in 0..n {
            let i0 = i.saturating_sub(b);
            let ri = i * w + b - i;
            // row i first holds c_ij = L_ij·D_j, then L_ij
            for j in i0..i {
                let rj = j * w + b - j;
                let k0 = i0.max(j.saturating_sub(b));
                let mut s = l[ri + j];
                for k in k0..j {
                    s -= l[ri + k] * l[rj + k];
                }
                l[ri + j] = s;
            }
            let mut d = l[ri + i];
            for j in i0..i {
                let dj = l[j * w + b];
                let c = l[ri + j];
                let lij = c / dj;
                d -= c * lij;
                big = big.max((c * lij).abs());
                l[ri + j] = lij;
            }
            if d == 0.0 || !d.is_finite() {
                return None;
            }
            l[ri + i] = d;
            if d < 0.0 {
                negative += 1;
            } else {
                positive += 1;
            }
        }
        let growth = big / amax;
        (growth <= INERTIA_MAX_GROWTH).then_some(Inertia { negative, positive, growth })
    }
}

/// Deterministic pseudo-random entry in `(-1, 1)` keyed by position.
fn start_entry(i: usize, t: usize) -> f64 {
    let mut z =
        (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add((t as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Eigenvectors on the operator's local index, `M`-orthonormal.
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub block: usize,
    pub max_basis: usize,
    pub tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { block: 4, max_basis: 480, tol: 1e-8 }
    }
}

/// Relative residual `||(A - λM)v|| / ||Mv||` scaled so that it is
/// dimensionless for `|λ| > 1`.
pub fn eigen_residual(a: &OperatorMatrix, lambda: f64, v: &[f64]) -> f64 {
    let mut av = vec![0.0; v.len()];
    a.matvec(v, &mut av);
    let m = a.mass();
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 0..v.len() {
        let mv = m[t] * v[t];
        num += (av[t] - lambda * mv).powi(2);
        den += mv * mv;
    }
    num.sqrt() / (den.sqrt() * lambda.abs().max(1.0))
}

fn m_dot(m: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for t in 0..x.len() {
        s += m[t] * x[t] * y[t];
    }
    s
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// The `nev` smallest eigenpairs of `A v = λ M v`.
///
/// Block Krylov iteration on `(A - σM)⁻¹ M` with a shift `σ` below the
/// spectrum, full `M`-orthogonal reorthogonalization and Rayleigh–Ritz on the
/// accumulated basis. `project`, when given, is applied to every basis
/// vector; it must be an `M`-orthogonal projector commuting with `A`.
pub fn smallest_eigenpairs(
    a: &OperatorMatrix,
    nev: usize,
    sigma: f64,
    project: Option<Projector>,
    opts: LanczosOptions,
) -> Result<EigenPairs> {
    let n = a.dim();
    let m = a.mass().to_vec();
    if nev == 0 || n == 0 {
        return Ok(EigenPairs { values: vec![], vectors: vec![], residuals: vec![] });
    }
    let chol = BandCholesky::factor(&a.shifted(sigma))?;
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut y: Vec<f64> = x.iter().zip(&m).map(|(a, b)| a * b).collect();
        chol.solve_in_place(&mut y);
        if let Some(p) = project {
            p(&mut y);
        }
        y
    };
    let block = opts.block.max(nev.min(n)).min(n);
    let max_basis = opts.max_basis.min(n);

    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut y: Vec<Vec<f64>> = Vec::new();
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut fresh = 0usize;

    // M-orthonormalizes `v` against the basis; None if it is (numerically)
    // inside the span.
    let orthonormalize = |q: &[Vec<f64>], mut v: Vec<f64>| -> Option<Vec<f64>> {
        let n0 = m_dot(&m, &v, &v).sqrt();
        if n0 == 0.0 || !n0.is_finite() {
            return None;
        }
        for _ in 0..2 {
            for b in q {
                let c = m_dot(&m, b, &v);
                axpy(-c, b, &mut v);
            }
        }
        let n1 = m_dot(&m, &v, &v).sqrt();
        if n1 < 1e-10 * n0 {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= n1);
        Some(v)
    };

    let mut pending: Vec<Vec<f64>> = (0..block)
        .map(|t| {
            let mut v: Vec<f64> = (0..n).map(|i| start_entry(i, t)).collect();
            if let Some(p) = project {
                p(&mut v);
            }
            v
        })
        .collect();

    let push = |q: &mut Vec<Vec<f64>>, y: &mut Vec<Vec<f64>>, h: &mut Vec<Vec<f64>>, v: Vec<f64>| {
        let yv = apply(&v);
        let col: Vec<f64> = q.iter().map(|b| m_dot(&m, b, &yv)).collect();
        let diag = m_dot(&m, &v, &yv);
        for (row, c) in h.iter_mut().zip(&col) {
            row.push(*c);
        }
        let mut new_row = col;
        new_row.push(diag);
        h.push(new_row);
        q.push(v);
        y.push(yv);
    };

    let mut worst_res = f64::INFINITY;
    let mut restarts = 0;
    // Ritz extraction is dense in the basis size, so convergence is only
    // tested at geometrically spaced basis sizes
    let mut next_check = nev.max(block);
    loop {
        let mut added = 0;
        for v in pending.drain(..) {
            if q.len() >= max_basis {
                break;
            }
            if let Some(v) = orthonormalize(&q, v) {
                push(&mut q, &mut y, &mut h, v);
                added += 1;
            }
        }
        if added == 0 && q.len() < max_basis {
            // the Krylov space is exhausted; continue with a fresh direction
            fresh += 1;
            let mut w: Vec<f64> = (0..n).map(|i| start_entry(i, 1000 + fresh)).collect();
            if let Some(p) = project {
                p(&mut w);
            }
            if let Some(w) = orthonormalize(&q, w) {
                push(&mut q, &mut y, &mut h, w);
                added = 1;
            }
        }
        let dim = q.len();
        let check = dim >= next_check || dim >= max_basis || added == 0;
        if dim >= nev && !check {
            let last = dim - added;
            pending = y[last..].to_vec();
            continue;
        }
        if dim >= nev {
            next_check = dim + block.max(dim / 4);
            let (theta, s) = ritz(&h);
            let pairs = ritz_pairs(a, sigma, &q, &theta, &s, nev);
            worst_res = pairs.residuals.iter().cloned().fold(0.0, f64::max);
            if worst_res < opts.tol || (added == 0 && dim == n) {
                return Ok(pairs);
            }
            if added == 0 {
                break;
            }
            if dim >= max_basis {
                if restarts >= MAX_RESTARTS {
                    break;
                }
                restarts += 1;
                // keep the leading Ritz vectors and continue from their images
                let keep = (2 * nev).max(nev + block).min(max_basis / 2).min(dim);
                let combine = |basis: &[Vec<f64>], c: usize| -> Vec<f64> {
                    let mut v = vec![0.0; n];
                    for (t, b) in basis.iter().enumerate() {
                        axpy(s[(t, c)], b, &mut v);
                    }
                    v
                };
                let nq: Vec<Vec<f64>> = (0..keep).map(|c| combine(&q, c)).collect();
                let ny: Vec<Vec<f64>> = (0..keep).map(|c| combine(&y, c)).collect();
                h = (0..keep).map(|i| (0..keep).map(|j| m_dot(&m, &nq[i], &ny[j])).collect()).collect();
                q = nq;
                y = ny;
                pending = y.clone();
                continue;
            }
        } else if added == 0 {
            break;
        }
        let last = dim - added;
        pending = y[last..].to_vec();
    }
    Err(Error::ConvergenceFailure { iterations: restarts * max_basis + q.len(), residual: worst_res })
}

const MAX_RESTARTS: usize = 40;

/// Ritz values of the projected operator in decreasing order, with their
/// coefficient vectors as columns.
fn ritz(h: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let dim = h.len();
    let hm = DMatrix::from_fn(dim, dim, |i, j| 0.5 * (h[i][j] + h[j][i]));
    let eig = SymmetricEigen::new(hm);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let theta = order.iter().map(|&c| eig.eigenvalues[c]).collect();
    let s = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    (theta, s)
}

fn ritz_pairs(
    a: &OperatorMatrix,
    sigma: f64,
    q: &[Vec<f64>],
    theta: &[f64],
    s: &DMatrix<f64>,
    nev: usize,
) -> EigenPairs {
    let n = a.dim();
    let m = a.mass();
    let mut values = Vec::with_capacity(nev);
    let mut vectors = Vec::with_capacity(nev);
    let mut residuals = Vec::with_capacity(nev);
    for c in 0..nev {
        let lambda = sigma + 1.0 / theta[c];
        let mut v = vec![0.0; n];
        for (t, b) in q.iter().enumerate() {
            axpy(s[(t, c)], b, &mut v);
        }
        let nv = m_dot(m, &v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        residuals.push(eigen_residual(a, lambda, &v));
        values.push(lambda);
        vectors.push(v);
    }
    EigenPairs { values, vectors, residuals }
}

/// Dense reference eigensolver for small problems.
pub fn dense_eigenpairs(a: &OperatorMatrix) -> EigenPairs {
    let n = a.dim();
    let m = a.mass();
    let s: Vec<f64> = m.iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut d = DMatrix::zeros(n, n);
    for r in 0..n {
        for (c, v) in a.row(r) {
            d[(r, c)] = v * s[r] * s[c];
        }
    }
    let eig = SymmetricEigen::new(d);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&c| eig.eigenvalues[c]).collect();
    let vectors: Vec<Vec<f64>> =
        order.iter().map(|&c| (0..n).map(|r| eig.eigenvectors[(r, c)] * s[r]).collect()).collect();
    let residuals = values.iter().zip(&vectors).map(|(&l, v)| eigen_residual(a, l, v)).collect();
    EigenPairs { values, vectors, residuals }
}
