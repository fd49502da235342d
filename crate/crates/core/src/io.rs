//! CSV and JSON writers that prepend a metadata block to every file.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dissipation::BlochTrajectory;
use crate::dynamics1d::Trajectory1D;
use crate::ensemble::MomentumEnsemble;
use crate::error::Result;
use crate::units::UnitSystem;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub code_version: String,
    pub params_sha256: String,
    pub units: UnitSystem,
}

impl Metadata {
    pub fn for_params(params: &impl Serialize) -> Result<Self> {
        Ok(Self {
            code_version: CODE_VERSION.to_string(),
            params_sha256: params_hash(params)?,
            units: UnitSystem::default(),
        })
    }
}

/// SHA-256 of the canonical (key-sorted, compact) JSON form.
pub fn params_hash(params: &impl Serialize) -> Result<String> {
    let value = serde_json::to_value(params)?;
    Ok(sha256_hex(serde_json::to_string(&value)?.as_bytes()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut file = File::open(path)?;
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes `# key: value` comment lines followed by an RFC 4180 table.
pub fn write_csv<I, R>(path: &Path, meta: &Metadata, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# code_version: {}", meta.code_version)?;
    writeln!(out, "# params_sha256: {}", meta.params_sha256)?;
    writeln!(out, "# units: {}", serde_json::to_string(&meta.units)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    metadata: &'a Metadata,
    data: &'a T,
}

/// Writes `{"metadata": …, "data": …}` as pretty-printed JSON.
pub fn write_json<T: Serialize>(path: &Path, meta: &Metadata, data: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &Envelope { metadata: meta, data })?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Formats a float so that it round-trips exactly.
pub fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// Trajectory rows (t, p, Re/Im ψ⇓, Re/Im ψ⇑) for a 1D ensemble.
pub fn write_trajectory_csv(
    path: &Path,
    meta: &Metadata,
    traj: &Trajectory1D,
    ensemble: &MomentumEnsemble,
) -> Result<()> {
    let rows = traj.samples.iter().flat_map(|s| {
        ensemble.points().enumerate().map(move |(n, p)| {
            vec![
                fmt(s.time),
                fmt(p[0]),
                fmt(s.psi_down[n].re),
                fmt(s.psi_down[n].im),
                fmt(s.psi_up[n].re),
                fmt(s.psi_up[n].im),
            ]
        })
    });
    write_csv(
        path,
        meta,
        &["t", "p", "re_psi_down", "im_psi_down", "re_psi_up", "im_psi_up"],
        rows,
    )
}

pub fn write_bloch_csv(path: &Path, meta: &Metadata, traj: &BlochTrajectory) -> Result<()> {
    let rows = traj
        .samples
        .iter()
        .map(|s| vec![fmt(s.t), fmt(s.s_x), fmt(s.s_y), fmt(s.s_z)]);
    write_csv(path, meta, &["t", "S_X", "S_Y", "S_Z"], rows)
}
