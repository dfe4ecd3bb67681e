//! Directions, reflections, rotations and sector decompositions of radial
//! planar domains, realized as exact index maps on a [`PolarGrid`].
//!
//! Directions live on the lattice `psi_m = m * pi / n_theta`, so every
//! reflection `theta -> 2 psi - theta` is a permutation of the angular grid.
//! Angles inside this module are therefore tracked in *half-steps*: node `j`
//! sits at half-step `2 j`, and a direction with lattice index `m` sits at
//! half-step `m`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PolarGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainKind {
    Disk,
    Annulus,
    /// Stand-in for the exterior of a disk, truncated by a far-field wall.
    TruncatedExterior,
}

/// A radially symmetric planar domain `r_inner < |x| < r_outer`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl DomainSpec {
    pub fn disk(radius: f64) -> Result<Self> {
        Self::new(DomainKind::Disk, 0.0, radius)
    }

    pub fn annulus(r_inner: f64, r_outer: f64) -> Result<Self> {
        Self::new(DomainKind::Annulus, r_inner, r_outer)
    }

    pub fn new(kind: DomainKind, r_inner: f64, r_outer: f64) -> Result<Self> {
        let spec = DomainSpec { kind, r_inner, r_outer };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_inner.is_finite() && self.r_outer.is_finite()) {
            return Err(Error::InvalidDomain("radii must be finite".into()));
        }
        match self.kind {
            DomainKind::Disk if self.r_inner != 0.0 => {
                return Err(Error::InvalidDomain("a disk has r_inner = 0".into()))
            }
            DomainKind::Annulus | DomainKind::TruncatedExterior if self.r_inner <= 0.0 => {
                return Err(Error::InvalidDomain("annular domains need r_inner > 0".into()))
            }
            _ => {}
        }
        if self.r_outer <= self.r_inner {
            return Err(Error::InvalidDomain("r_outer must exceed r_inner".into()));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        PI * (self.r_outer * self.r_outer - self.r_inner * self.r_inner)
    }

    pub fn has_pole(&self) -> bool {
        self.kind == DomainKind::Disk
    }
}

/// A unit direction `e = (cos psi, sin psi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Direction {
    psi: f64,
}

impl Direction {
    pub fn new(psi: f64) -> Self {
        Direction { psi: psi.rem_euclid(2.0 * PI) }
    }

    /// The lattice direction `psi_m = m pi / n_theta`.
    pub fn lattice(m: i64, n_theta: usize) -> Self {
        let period = 2 * n_theta as i64;
        let m = m.rem_euclid(period);
        Direction { psi: m as f64 * PI / n_theta as f64 }
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn unit(&self) -> [f64; 2] {
        [self.psi.cos(), self.psi.sin()]
    }

    pub fn perp(&self) -> [f64; 2] {
        [-self.psi.sin(), self.psi.cos()]
    }

    /// Lattice index `m` in `0..2 n_theta` with `psi = m pi / n_theta`.
    pub fn lattice_index(&self, n_theta: usize) -> Result<usize> {
        let x = self.psi * n_theta as f64 / PI;
        let m = x.round();
        if (x - m).abs() > 1e-9 * x.abs().max(1.0) {
            return Err(Error::AxisNotGridAligned { psi: self.psi, n_theta });
        }
        Ok((m as i64).rem_euclid(2 * n_theta as i64) as usize)
    }

    /// Reflection of a planar point across the line spanned by `e`.
    pub fn reflect_point(&self, x: [f64; 2]) -> [f64; 2] {
        let n = self.perp();
        let d = x[0] * n[0] + x[1] * n[1];
        [x[0] - 2.0 * d * n[0], x[1] - 2.0 * d * n[1]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SectorPart {
    /// Angles in `(psi, psi + pi/k)`.
    Plus,
    /// Angles in `(psi - pi/k, psi)`.
    Minus,
    /// Angles in `(psi - pi/k, psi + pi/k)`, opening `2 pi / k`.
    Double,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SectorSpec {
    pub k: usize,
    pub direction: Direction,
    pub part: SectorPart,
}

impl SectorSpec {
    pub fn new(k: usize, direction: Direction, part: SectorPart) -> Self {
        SectorSpec { k, direction, part }
    }

    /// Lower edge and opening in half-steps.
    fn half_step_extent(&self, n_theta: usize) -> Result<(usize, usize)> {
        if self.k == 0 || !n_theta.is_multiple_of(2 * self.k) {
            return Err(Error::IncompatibleSymmetry(format!(
                "sector with k = {} needs n_theta = {} divisible by {}",
                self.k,
                n_theta,
                2 * self.k
            )));
        }
        let m = self.direction.lattice_index(n_theta)?;
        let half = n_theta / self.k;
        let period = 2 * n_theta;
        Ok(match self.part {
            SectorPart::Plus => (m, half),
            SectorPart::Minus => ((m + period - half) % period, half),
            SectorPart::Double => ((m + period - half) % period, 2 * half),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskShape {
    Whole,
    /// Open angular sector starting at half-step `lower` with opening `width`
    /// half-steps, spanning every ring.
    Sector {
        lower: usize,
        width: usize,
    },
}

/// Ordered subset of grid nodes with a reverse lookup table.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeMask {
    shape: MaskShape,
    nodes: Vec<usize>,
    local: Vec<u32>,
}

const NOT_IN_MASK: u32 = u32::MAX;

impl NodeMask {
    pub fn whole(grid: &PolarGrid) -> Self {
        let n = grid.len();
        NodeMask { shape: MaskShape::Whole, nodes: (0..n).collect(), local: (0..n as u32).collect() }
    }

    fn sector(grid: &PolarGrid, lower: usize, width: usize) -> Self {
        let n_theta = grid.n_theta();
        let mut nodes = Vec::new();
        let mut local = vec![NOT_IN_MASK; grid.len()];
        let offsets: Vec<(usize, usize)> = {
            let mut v: Vec<(usize, usize)> = (0..n_theta)
                .filter_map(|j| {
                    let q = angular_offset(j, lower, n_theta);
                    (q > 0 && q < width).then_some((q, j))
                })
                .collect();
            v.sort_unstable();
            v
        };
        for i in 0..grid.n_r() {
            for &(_, j) in &offsets {
                let node = grid.node(i, j);
                local[node] = nodes.len() as u32;
                nodes.push(node);
            }
        }
        NodeMask { shape: MaskShape::Sector { lower, width }, nodes, local }
    }

    pub fn shape(&self) -> MaskShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Global node indices in local order.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn contains(&self, node: usize) -> bool {
        self.local.get(node).is_some_and(|&l| l != NOT_IN_MASK)
    }

    pub fn local_index(&self, node: usize) -> Option<usize> {
        match self.local.get(node) {
            Some(&l) if l != NOT_IN_MASK => Some(l as usize),
            _ => None,
        }
    }

    pub fn grid_len(&self) -> usize {
        self.local.len()
    }
}

/// Half-step offset of node column `j` above the half-step `lower`.
pub(crate) fn angular_offset(j: usize, lower: usize, n_theta: usize) -> usize {
    let period = 2 * n_theta;
    (2 * j + period - lower % period) % period
}

/// Sector interior plus its labeled boundary node sets.
#[derive(Clone, Debug)]
pub struct SectorMask {
    pub spec: SectorSpec,
    /// Open-sector nodes.
    pub interior: NodeMask,
    /// Interior nodes whose radial stencil reaches `∂Ω`.
    pub gamma1: Vec<usize>,
    /// Grid nodes lying exactly on the ray `theta = psi`.
    pub gamma2: Vec<usize>,
    /// Grid nodes lying exactly on the far straight edge(s).
    pub gamma3: Vec<usize>,
}

/// `σ_e` as a node permutation: `(r_i, theta_j) -> (r_i, 2 psi - theta_j)`.
pub fn reflect_node(grid: &PolarGrid, e: &Direction, node: usize) -> Result<usize> {
    let m = e.lattice_index(grid.n_theta())?;
    Ok(reflect_node_lattice(grid, m, node))
}

pub(crate) fn reflect_node_lattice(grid: &PolarGrid, m: usize, node: usize) -> usize {
    let n_theta = grid.n_theta();
    let (i, j) = grid.coords(node);
    // 2 psi - theta_j = 2 pi (m - j) / n_theta
    let jr = (m + n_theta * 2 - j) % n_theta;
    grid.node(i, jr)
}

/// Rotation by `2 pi / k` as a node permutation.
pub fn rotate_node(grid: &PolarGrid, k: usize, node: usize) -> Result<usize> {
    let step = rotation_step(grid, k)?;
    Ok(rotate_node_steps(grid, step, node))
}

pub(crate) fn rotation_step(grid: &PolarGrid, k: usize) -> Result<usize> {
    if k == 0 || !grid.n_theta().is_multiple_of(k) {
        return Err(Error::IncompatibleSymmetry(format!("n_theta = {} is not divisible by k = {}", grid.n_theta(), k)));
    }
    Ok(grid.n_theta() / k)
}

pub(crate) fn rotate_node_steps(grid: &PolarGrid, steps: usize, node: usize) -> usize {
    let (i, j) = grid.coords(node);
    grid.node(i, (j + steps) % grid.n_theta())
}

pub fn sector_mask(grid: &PolarGrid, spec: &SectorSpec) -> Result<SectorMask> {
    let n_theta = grid.n_theta();
    let (lower, width) = spec.half_step_extent(n_theta)?;
    let interior = NodeMask::sector(grid, lower, width);
    let n_r = grid.n_r();

    let mut gamma1 = Vec::new();
    for &node in interior.nodes() {
        let (i, _) = grid.coords(node);
        let touches_inner = i == 0 && !grid.domain().has_pole();
        if touches_inner || i + 1 == n_r {
            gamma1.push(node);
        }
    }

    let m = spec.direction.lattice_index(n_theta)?;
    let half = n_theta / spec.k;
    let period = 2 * n_theta;
    let ray_nodes = |h: usize| -> Vec<usize> {
        if !h.is_multiple_of(2) {
            return Vec::new();
        }
        let j = (h % period) / 2;
        (0..n_r).map(|i| grid.node(i, j)).collect()
    };
    let gamma2 = ray_nodes(m);
    let gamma3 = match spec.part {
        SectorPart::Plus => ray_nodes((m + half) % period),
        SectorPart::Minus => ray_nodes((m + period - half) % period),
        SectorPart::Double => {
            let mut v = ray_nodes((m + period - half) % period);
            if 2 * half != period {
                v.extend(ray_nodes((m + half) % period));
            }
            v
        }
    };

    Ok(SectorMask { spec: *spec, interior, gamma1, gamma2, gamma3 })
}
