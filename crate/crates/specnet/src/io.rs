//! On-disk artifact formats shared by the pipeline stages: per-trajectory
//! snapshot CSVs with a JSON sidecar, `re,im` spectrum CSVs, and JSON
//! helpers with missing-file errors that name the expected path.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::config::ModelSpec;
use crate::error::{Error, Result};

/// Simulated trajectories: `data[j]` is state-dim x (k+1), column per
/// snapshot.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub q: usize,
    pub k: usize,
    pub dt: f64,
    pub data: Vec<DMatrix<f64>>,
}

/// Sidecar describing how the snapshots were produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub q: usize,
    pub k: usize,
    pub dt: f64,
    pub state_dim: usize,
    pub selector: Vec<usize>,
    pub seed: u64,
    pub model: ModelSpec,
}

fn trajectory_path(dir: &Path, j: usize) -> PathBuf {
    dir.join(format!("traj_{j}.csv"))
}

fn meta_path(dir: &Path) -> PathBuf {
    dir.join("meta.json")
}

pub fn write_snapshots(dir: &Path, set: &SnapshotSet, meta: &SnapshotMeta) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (j, traj) in set.data.iter().enumerate() {
        let mut text = String::from("t");
        for i in 1..=traj.nrows() {
            text.push_str(&format!(",x_{i}"));
        }
        text.push('\n');
        for col in 0..traj.ncols() {
            text.push_str(&format!("{}", col as f64 * set.dt));
            for row in 0..traj.nrows() {
                text.push_str(&format!(",{}", traj[(row, col)]));
            }
            text.push('\n');
        }
        std::fs::write(trajectory_path(dir, j), text)?;
    }
    write_json(&meta_path(dir), meta)
}

pub fn read_snapshots(dir: &Path) -> Result<(SnapshotSet, SnapshotMeta)> {
    let meta: SnapshotMeta = read_json(&meta_path(dir))?;
    let mut data = Vec::with_capacity(meta.q);
    for j in 0..meta.q {
        let path = trajectory_path(dir, j);
        let text =
            std::fs::read_to_string(&path).map_err(|_| Error::MissingArtifact(path.clone()))?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('t') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != meta.state_dim + 1 {
                return Err(Error::Parse {
                    path: path.clone(),
                    detail: format!(
                        "row {} has {} fields, expected {}",
                        line_no + 1,
                        fields.len(),
                        meta.state_dim + 1
                    ),
                });
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                fields[1..].iter().map(|f| f.trim().parse()).collect();
            match parsed {
                Ok(v) => rows.push(v),
                Err(_) => {
                    return Err(Error::Parse {
                        path: path.clone(),
                        detail: format!("non-numeric state entry in row {}", line_no + 1),
                    })
                }
            }
        }
        if rows.len() != meta.k + 1 {
            return Err(Error::Parse {
                path,
                detail: format!("found {} snapshots, expected {}", rows.len(), meta.k + 1),
            });
        }
        data.push(DMatrix::from_fn(meta.state_dim, meta.k + 1, |r, c| rows[c][r]));
    }
    Ok((
        SnapshotSet {
            q: meta.q,
            k: meta.k,
            dt: meta.dt,
            data,
        },
        meta,
    ))
}

/// Writes complex values as `re,im` rows.
pub fn write_complex_csv(path: &Path, values: &[Complex64]) -> Result<()> {
    let mut text = String::from("re,im\n");
    for z in values {
        text.push_str(&format!("{},{}\n", z.re, z.im));
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_complex_csv(path: &Path) -> Result<Vec<Complex64>> {
    let text = std::fs::read_to_string(path).map_err(|_| Error::MissingArtifact(path.to_path_buf()))?;
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("re") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                detail: format!("row {} has {} fields, expected 2", line_no + 1, fields.len()),
            });
        }
        let re = fields[0].trim().parse();
        let im = fields[1].trim().parse();
        match (re, im) {
            (Ok(re), Ok(im)) => out.push(Complex64::new(re, im)),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    detail: format!("non-numeric entry in row {}", line_no + 1),
                })
            }
        }
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|_| Error::MissingArtifact(path.to_path_buf()))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}
