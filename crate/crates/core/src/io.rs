//! Deterministic run persistence: fixed-width little-endian snapshot files
//! with a payload checksum (restarts must carry the accumulated phase
//! integral, so `chi` is part of the record), and machine-readable CSV/JSON
//! emission with reproducible bytes.

use crate::grid::GridSpec;
use crate::grid::{SpatialField, SpectralField};
use crate::solver::comoving::ComovingState;
use crate::solver::{Frame, NonlinearitySpec, SimulationState, SolverError};
use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("format version {0} not supported (expected {FORMAT_VERSION})")]
    VersionMismatch(u32),
    #[error("unknown frame tag {0}")]
    BadFrame(u32),
    #[error("snapshot file truncated")]
    Truncated,
    #[error("payload checksum mismatch (stored {stored:#10x}, computed {computed:#10x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// On-disk state record: enough to restart a run bit-exactly. The `state`
/// field holds `u` (fixed box) or the co-moving field `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    pub frame: Frame,
    pub n_points: u32,
    pub half_width: f64,
    pub t: f64,
    pub lambdas: Vec<f64>,
    pub step_count: u64,
    pub state: Vec<Complex64>,
    pub chi: Vec<f64>,
}

impl SnapshotRecord {
    pub fn from_box_state(state: &SimulationState, nl: &NonlinearitySpec) -> Self {
        SnapshotRecord {
            frame: Frame::FixedBox,
            n_points: state.u.grid.n_points() as u32,
            half_width: state.u.grid.half_width(),
            t: state.t,
            lambdas: nl.lambdas().to_vec(),
            step_count: state.step_count,
            state: state.u.values.clone(),
            chi: state.chi.clone(),
        }
    }

    pub fn from_comoving_state(state: &ComovingState, nl: &NonlinearitySpec) -> Self {
        SnapshotRecord {
            frame: Frame::Comoving,
            n_points: state.v.grid.n_points() as u32,
            half_width: state.v.grid.half_width(),
            t: state.t,
            lambdas: nl.lambdas().to_vec(),
            step_count: state.step_count,
            state: state.v.values.clone(),
            chi: state.chi.clone(),
        }
    }

    pub fn from_trajectory_snapshot(
        snap: &crate::solver::Snapshot,
        frame: Frame,
        grid: &GridSpec,
        nl: &NonlinearitySpec,
    ) -> Self {
        SnapshotRecord {
            frame,
            n_points: grid.n_points() as u32,
            half_width: grid.half_width(),
            t: snap.t,
            lambdas: nl.lambdas().to_vec(),
            step_count: snap.step_count,
            state: snap.state_values.clone(),
            chi: snap.chi.clone(),
        }
    }

    pub fn grid(&self) -> Result<GridSpec, IoError> {
        Ok(GridSpec::new(self.n_points as usize, self.half_width)?)
    }

    pub fn nonlinearity(&self) -> Result<NonlinearitySpec, IoError> {
        Ok(NonlinearitySpec::new(self.lambdas.clone())?)
    }

    pub fn to_box_state(&self) -> Result<SimulationState, IoError> {
        let grid = self.grid()?;
        Ok(SimulationState {
            t: self.t,
            u: SpatialField::new(grid, self.state.clone())?,
            chi: self.chi.clone(),
            step_count: self.step_count,
        })
    }

    pub fn to_comoving_state(&self) -> Result<ComovingState, IoError> {
        let grid = self.grid()?;
        Ok(ComovingState {
            t: self.t,
            v: SpectralField::new(grid, self.state.clone())?,
            chi: self.chi.clone(),
            step_count: self.step_count,
        })
    }
}

const MAX_LAMBDA_SLOTS: usize = 4;

fn payload_bytes(record: &SnapshotRecord) -> Vec<u8> {
    let n = record.state.len();
    let mut bytes = Vec::with_capacity(n * 24);
    for v in &record.state {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    for c in &record.chi {
        bytes.extend_from_slice(&c.to_le_bytes());
    }
    bytes
}

/// Byte-exact snapshot write: header, payload, CRC32 of the payload.
pub fn write_snapshot(record: &SnapshotRecord, path: &Path) -> Result<(), IoError> {
    debug_assert_eq!(record.state.len(), record.n_points as usize);
    debug_assert_eq!(record.chi.len(), record.n_points as usize);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = Vec::new();
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let frame_tag: u32 = match record.frame {
        Frame::FixedBox => 0,
        Frame::Comoving => 1,
    };
    out.extend_from_slice(&frame_tag.to_le_bytes());
    out.extend_from_slice(&record.n_points.to_le_bytes());
    out.extend_from_slice(&(record.lambdas.len() as u32).to_le_bytes());
    out.extend_from_slice(&record.half_width.to_le_bytes());
    out.extend_from_slice(&record.t.to_le_bytes());
    out.extend_from_slice(&record.step_count.to_le_bytes());
    let mut slots = [0.0_f64; MAX_LAMBDA_SLOTS];
    slots[..record.lambdas.len()].copy_from_slice(&record.lambdas);
    for l in slots {
        out.extend_from_slice(&l.to_le_bytes());
    }
    let payload = payload_bytes(record);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out.extend_from_slice(&payload);
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        if self.pos + n > self.bytes.len() {
            return Err(IoError::Truncated);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, IoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, IoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotRecord, IoError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(IoError::VersionMismatch(version));
    }
    let frame = match r.u32()? {
        0 => Frame::FixedBox,
        1 => Frame::Comoving,
        other => return Err(IoError::BadFrame(other)),
    };
    let n_points = r.u32()?;
    let d = r.u32()? as usize;
    let half_width = r.f64()?;
    let t = r.f64()?;
    let step_count = r.u64()?;
    let mut slots = [0.0_f64; MAX_LAMBDA_SLOTS];
    for slot in slots.iter_mut() {
        *slot = r.f64()?;
    }
    if d > MAX_LAMBDA_SLOTS {
        return Err(IoError::Truncated);
    }
    let stored_crc = r.u32()?;
    let payload = r.take(n_points as usize * 24)?;
    let computed = crc32fast::hash(payload);
    if computed != stored_crc {
        return Err(IoError::ChecksumMismatch {
            stored: stored_crc,
            computed,
        });
    }
    let n = n_points as usize;
    let mut state = Vec::with_capacity(n);
    for k in 0..n {
        let re = f64::from_le_bytes(payload[16 * k..16 * k + 8].try_into().unwrap());
        let im = f64::from_le_bytes(payload[16 * k + 8..16 * k + 16].try_into().unwrap());
        state.push(Complex64::new(re, im));
    }
    let chi_base = 16 * n;
    let chi = (0..n)
        .map(|k| {
            f64::from_le_bytes(
                payload[chi_base + 8 * k..chi_base + 8 * k + 8]
                    .try_into()
                    .unwrap(),
            )
        })
        .collect();
    Ok(SnapshotRecord {
        frame,
        n_points,
        half_width,
        t,
        lambdas: slots[..d].to_vec(),
        step_count,
        state,
        chi,
    })
}

/// 17-significant-digit float formatting: enough for a bit-exact f64
/// round-trip through text.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a frequency-indexed complex field as CSV `xi,re,im`.
pub fn write_field_csv(path: &Path, xi: &[f64], values: &[Complex64]) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = String::from("xi,re,im\n");
    for (x, v) in xi.iter().zip(values) {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(*x),
            fmt_f64(v.re),
            fmt_f64(v.im)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a time series as CSV with the given header.
pub fn write_series_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Serializes a JSON value with a trailing newline (serde_json preserves
/// struct field order, so identical inputs give identical bytes).
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// FNV-1a hash of the canonical config text; names the run directory.
pub fn config_hash(text: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// `<root>/runs/<config-hash>` with the standard subdirectories.
pub fn run_dir(root: &Path, config_text: &str) -> PathBuf {
    root.join("runs").join(config_hash(config_text))
}
