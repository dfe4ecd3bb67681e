//! Scenario documents: schema, validation and hashing.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::grid::PolarGrid;
use crate::nonlin::Nonlinearity;
use crate::solvers::{Mode, NehariOptions, Seed};
use crate::symmetry::Tolerances;

/// Positive count factor in the Hénon multiplicity bound.
pub const KAPPA: f64 = 5.1869;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Solve,
    Spectrum,
    Classify,
    Multiplicity,
    XiDiagnostic,
    Refinement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSize {
    pub n_r: usize,
    pub n_theta: usize,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_k_list() -> Vec<usize> {
    vec![1]
}

fn default_mode() -> Mode {
    Mode::Positive
}

fn default_n_eigs() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub experiment: Experiment,
    pub domain: DomainSpec,
    pub grid: GridSize,
    pub nonlinearity: Nonlinearity,
    #[serde(default = "default_k_list")]
    pub k_list: Vec<usize>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Seeds tried for every k; the standard set `radial, cos-mode(k),
    /// peaks(k)` when absent.
    #[serde(default)]
    pub seeds: Option<Vec<Seed>>,
    #[serde(default)]
    pub solver: NehariOptions,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Eigenvalues reported per spectrum.
    #[serde(default = "default_n_eigs")]
    pub n_eigs: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let bytes = std::fs::read(path)?;
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::config("", format!("not UTF-8: {e}")))?;
        Ok((Self::from_json(text)?, scenario_hash(&bytes)))
    }

    /// Seeds tried for a run at `k`.
    pub fn seeds_for(&self, k: usize) -> Vec<Seed> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => vec![Seed::Radial, Seed::CosMode(k), Seed::Peaks(k)],
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_list.iter().copied().max().unwrap_or(1)
    }

    /// Rejects every scenario violating a precondition of the pipeline it
    /// requests.
    pub fn validate(&self) -> Result<()> {
        self.domain.validate().map_err(|e| Error::config("domain", e.to_string()))?;
        self.nonlinearity.validate().map_err(|e| Error::config("nonlinearity", e.to_string()))?;
        let GridSize { n_r, n_theta } = self.grid;
        PolarGrid::new(self.domain, n_r, n_theta).map_err(|e| Error::config("grid", e.to_string()))?;
        if self.k_list.is_empty() {
            return Err(Error::config("k_list", "must not be empty"));
        }
        if let Some(i) = self.k_list.iter().position(|&k| k == 0) {
            return Err(Error::config(format!("k_list[{i}]"), "k must be positive"));
        }
        let l = self.k_list.iter().fold(1, |a, &k| lcm(a, k));
        if n_theta % (2 * l) != 0 {
            return Err(Error::config(
                "grid.n_theta",
                format!("n_theta = {n_theta} must be divisible by 2·lcm(k_list) = {}", 2 * l),
            ));
        }
        if self.n_eigs == 0 {
            return Err(Error::config("n_eigs", "must be positive"));
        }
        let t = &self.tolerances;
        for (name, v) in [("radial", t.radial), ("sym", t.sym), ("sign", t.sign), ("mono", t.mono)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("tolerances.{name}"), "must be positive and finite"));
            }
        }
        let s = &self.solver;
        if !(s.grad_tol > 0.0 && s.armijo > 0.0 && s.armijo < 1.0 && s.newton.tol > 0.0) {
            return Err(Error::config("solver", "tolerances must be positive (armijo below 1)"));
        }
        self.validate_seeds()?;
        match self.experiment {
            Experiment::Multiplicity | Experiment::XiDiagnostic if self.nonlinearity.exponent().is_none() => {
                return Err(Error::config(
                    "nonlinearity.kind",
                    format!("{:?} needs a power nonlinearity", self.experiment),
                ));
            }
            Experiment::Refinement => {
                if n_r % 4 != 0 || n_theta % 4 != 0 {
                    return Err(Error::config(
                        "grid",
                        "refinement halves the grid twice; n_r and n_theta must be divisible by 4",
                    ));
                }
                let coarse = n_theta / 4;
                PolarGrid::new(self.domain, n_r / 4, coarse)
                    .map_err(|e| Error::config("grid", format!("coarsest level: {e}")))?;
                if coarse % (2 * l) != 0 {
                    return Err(Error::config(
                        "grid.n_theta",
                        format!("coarsest n_theta = {coarse} must be divisible by {}", 2 * l),
                    ));
                }
            }
            _ => {}
        }
        if self.mode == Mode::Nodal && self.nonlinearity.exponent().is_none() {
            return Err(Error::config("mode", "nodal mode needs a power nonlinearity"));
        }
        Ok(())
    }

    fn validate_seeds(&self) -> Result<()> {
        let explicit = self.seeds.is_some();
        for &k in &self.k_list {
            for (i, seed) in self.seeds_for(k).iter().enumerate() {
                let path = if explicit { format!("seeds[{i}]") } else { "seeds".into() };
                if let Seed::Peaks(j) = seed {
                    if !self.grid.n_theta.is_multiple_of(*j) {
                        return Err(Error::config(path, format!("{seed} needs n_theta divisible by {j}")));
                    }
                }
                let needs_profile = matches!(seed, Seed::Radial | Seed::CosMode(_));
                let profile_ok = match self.nonlinearity {
                    Nonlinearity::SinhPoisson { .. } => false,
                    Nonlinearity::Gelfand { .. } => self.mode == Mode::Positive,
                    _ => true,
                };
                if needs_profile && !profile_ok && explicit {
                    return Err(Error::config(
                        path,
                        format!("{seed} needs a radial profile, unavailable for {}", self.nonlinearity.name()),
                    ));
                }
            }
        }
        Ok(())
    }
}

pub fn scenario_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Lower bounds on the number of distinct solutions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpectedCounts {
    /// Radial solution plus one nonradial k-minimizer per `k <= k_max`.
    pub rotational: usize,
    pub alpha: Option<f64>,
    /// `1 + ⌈α/2⌉`.
    pub henon_j1: Option<usize>,
    /// `1 + ⌈(2 + α)κ/2⌉`.
    pub henon_j2: Option<usize>,
}

pub fn expected_counts(k_max: usize, nl: &Nonlinearity) -> ExpectedCounts {
    let alpha = match *nl {
        Nonlinearity::Henon { alpha, .. } => Some(alpha),
        _ => None,
    };
    ExpectedCounts {
        rotational: k_max + 1,
        alpha,
        henon_j1: alpha.map(|a| 1 + (a / 2.0).ceil() as usize),
        henon_j2: alpha.map(|a| 1 + ((2.0 + a) * KAPPA / 2.0).ceil() as usize),
    }
}
