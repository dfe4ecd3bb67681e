//! Named initial fields.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{solve_radial, Mode};
use crate::error::{Error, Result};
use crate::grid::{Field, PolarGrid};
use crate::nonlin::Nonlinearity;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Seed {
    /// Lifted radial profile (one interior zero in nodal mode).
    Radial,
    /// Radial profile times `1 + 0.1 cos(kθ)`.
    CosMode(usize),
    /// Gaussian bumps on the mid-radius circle: `k` positive bumps at
    /// `2πj/k`, or in nodal mode `2k` bumps of alternating sign at `πj/k`.
    Peaks(usize),
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Seed::Radial => write!(f, "radial"),
            Seed::CosMode(k) => write!(f, "cos-mode({k})"),
            Seed::Peaks(k) => write!(f, "peaks({k})"),
        }
    }
}

impl FromStr for Seed {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "radial" {
            return Ok(Seed::Radial);
        }
        let arg = |prefix: &str| -> Option<std::result::Result<usize, String>> {
            let inner = s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
            Some(match inner.trim().parse::<usize>() {
                Ok(k) if k > 0 => Ok(k),
                _ => Err(format!("seed `{s}` needs a positive integer argument")),
            })
        };
        if let Some(k) = arg("cos-mode") {
            return k.map(Seed::CosMode);
        }
        if let Some(k) = arg("peaks") {
            return k.map(Seed::Peaks);
        }
        Err(format!("unknown seed `{s}` (expected radial, cos-mode(k) or peaks(k))"))
    }
}

impl Serialize for Seed {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Seed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Builds the seed field on `grid`.
pub fn resolve_seed(seed: Seed, grid: &Arc<PolarGrid>, nl: &Nonlinearity, mode: Mode) -> Result<Field> {
    let zeros = match mode {
        Mode::Positive => 0,
        Mode::Nodal => 1,
    };
    let domain = *grid.domain();
    match seed {
        Seed::Radial => solve_radial(&domain, nl, zeros, grid.n_r())?.lift(grid),
        Seed::CosMode(k) => {
            let base = solve_radial(&domain, nl, zeros, grid.n_r())?.lift(grid)?;
            let n_theta = grid.n_theta();
            Ok(base.map_nodes(|n, v| {
                let j = n % n_theta;
                v * (1.0 + 0.1 * (k as f64 * grid.theta(j)).cos())
            }))
        }
        Seed::Peaks(k) => {
            if !grid.n_theta().is_multiple_of(k) {
                return Err(Error::IncompatibleSymmetry(format!("peaks({k}) on n_theta = {}", grid.n_theta())));
            }
            let (count, signed) = match mode {
                Mode::Positive => (k, false),
                Mode::Nodal => (2 * k, true),
            };
            let width = domain.r_outer - domain.r_inner;
            let rm = 0.5 * (domain.r_inner + domain.r_outer);
            let spacing = 2.0 * std::f64::consts::PI * rm / count as f64;
            let sigma = (0.2 * width).min(0.35 * spacing);
            let centres: Vec<(f64, f64, f64)> = (0..count)
                .map(|j| {
                    let a = 2.0 * std::f64::consts::PI * j as f64 / count as f64;
                    let s = if signed && j % 2 == 1 { -1.0 } else { 1.0 };
                    (rm * a.cos(), rm * a.sin(), s)
                })
                .collect();
            Ok(Field::from_fn(grid, |r, t| {
                let (x, y) = (r * t.cos(), r * t.sin());
                let envelope = (r - domain.r_inner) * (domain.r_outer - r) / (width * width);
                centres
                    .iter()
                    .map(|&(cx, cy, s)| s * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sigma * sigma)).exp())
                    .sum::<f64>()
                    * envelope
            }))
        }
    }
}
