//! Field files (`<name>.json` header plus raw `<name>.f64` payload) and
//! graymap heatmaps.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::grid::{Field, PolarGrid};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub format_version: u32,
    pub domain: DomainSpec,
    #[serde(rename = "N_r")]
    pub n_r: usize,
    #[serde(rename = "N_theta")]
    pub n_theta: usize,
    pub byte_order: String,
    pub dtype: String,
    pub count: usize,
}

impl FieldHeader {
    pub fn for_grid(g: &PolarGrid) -> Self {
        FieldHeader {
            format_version: FORMAT_VERSION,
            domain: *g.domain(),
            n_r: g.n_r(),
            n_theta: g.n_theta(),
            byte_order: "little".into(),
            dtype: "float64".into(),
            count: g.len(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::format("format_version", format!("unsupported version {}", self.format_version)));
        }
        if self.byte_order != "little" {
            return Err(Error::format("byte_order", format!("expected \"little\", got {:?}", self.byte_order)));
        }
        if self.dtype != "float64" {
            return Err(Error::format("dtype", format!("expected \"float64\", got {:?}", self.dtype)));
        }
        if self.count != self.n_r * self.n_theta {
            return Err(Error::format(
                "count",
                format!("{} does not equal N_r·N_theta = {}", self.count, self.n_r * self.n_theta),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<PolarGrid>> {
        self.check()?;
        let g = PolarGrid::new(self.domain, self.n_r, self.n_theta).map_err(|e| Error::format("N_r", e.to_string()))?;
        Ok(Arc::new(g))
    }
}

fn payload_path(header: &Path) -> PathBuf {
    header.with_extension("f64")
}

/// Writes `dir/name.json` and `dir/name.f64`; returns the header path.
pub fn save_field(field: &Field, dir: &Path, name: &str) -> Result<PathBuf> {
    let header = dir.join(format!("{name}.json"));
    let h = FieldHeader::for_grid(field.grid());
    std::fs::write(&header, serde_json::to_string_pretty(&h)? + "\n")?;
    let bytes: Vec<u8> = field.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(payload_path(&header), bytes)?;
    Ok(header)
}

pub fn read_header(path: &Path) -> Result<FieldHeader> {
    let text = std::fs::read_to_string(path)?;
    let h: FieldHeader = serde_json::from_str(&text).map_err(|e| Error::format("header", e.to_string()))?;
    h.check()?;
    Ok(h)
}

/// Loads a field from its header path.
pub fn load_field(path: &Path) -> Result<Field> {
    let h = read_header(path)?;
    let grid = h.grid()?;
    let payload = payload_path(path);
    let bytes = std::fs::read(&payload)?;
    let expected = 8 * h.count;
    if bytes.len() != expected {
        return Err(Error::TruncatedPayload { path: payload, expected, found: bytes.len() });
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Field::from_values(&grid, values)
}

/// Loads a field and checks it lives on `grid`.
pub fn load_field_on(path: &Path, grid: &PolarGrid) -> Result<Field> {
    let h = read_header(path)?;
    if h.domain != *grid.domain() {
        return Err(Error::format("domain", format!("{:?} differs from {:?}", h.domain, grid.domain())));
    }
    if h.n_r != grid.n_r() {
        return Err(Error::format("N_r", format!("{} differs from {}", h.n_r, grid.n_r())));
    }
    if h.n_theta != grid.n_theta() {
        return Err(Error::format("N_theta", format!("{} differs from {}", h.n_theta, grid.n_theta())));
    }
    load_field(path)
}

/// Binary graymap, one row per angle and one column per ring, scaled
/// linearly from the field minimum (0) to its maximum (255).
pub fn pgm_bytes(field: &Field) -> Vec<u8> {
    let g = field.grid();
    let (n_r, n_theta) = (g.n_r(), g.n_theta());
    let v = field.values();
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let span = hi - lo;
    let mut out = format!("P5\n{n_r} {n_theta}\n255\n").into_bytes();
    for j in 0..n_theta {
        for i in 0..n_r {
            let x = v[g.node(i, j)];
            let level = if span > 0.0 { (255.0 * (x - lo) / span).round() } else { 0.0 };
            out.push(level.clamp(0.0, 255.0) as u8);
        }
    }
    out
}

pub fn write_pgm(field: &Field, path: &Path) -> Result<()> {
    std::fs::write(path, pgm_bytes(field))?;
    Ok(())
}
