//! Trajectory wire format: JSON Lines, one object per trajectory, plus a
//! CSV export for interoperability.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use wstl_core::Trajectory;

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    label: i8,
    states: Vec<Vec<f64>>,
}

/// Loads trajectories from a JSONL file and validates dimensions and
/// labels; the result is sorted by id for stable ordering.
pub fn load_dataset(path: &Path) -> Result<Vec<Trajectory>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: malformed record", path.display(), lineno + 1))?;
        let traj = Trajectory::new(rec.id, rec.label, rec.states)
            .map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), lineno + 1))?;
        if let Some(d) = dim {
            if traj.dim() != d {
                bail!(
                    "{}:{}: state dimension {} differs from {}",
                    path.display(),
                    lineno + 1,
                    traj.dim(),
                    d
                );
            }
        } else {
            dim = Some(traj.dim());
        }
        out.push(traj);
    }
    out.sort_by(|a, b| a.id().cmp(b.id()));
    Ok(out)
}

/// Writes trajectories as JSONL in the given order.
pub fn save_dataset(path: &Path, data: &[Trajectory]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for traj in data {
        let rec = Record {
            id: traj.id().to_string(),
            label: traj.label(),
            states: traj.states().to_vec(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        writeln!(w)?;
    }
    Ok(())
}

/// CSV export: one row per timestep with trajectory id and label columns.
pub fn export_csv(path: &Path, data: &[Trajectory]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    let dim = data.first().map(|t| t.dim()).unwrap_or(0);
    let header: Vec<String> = ["id", "t", "label"]
        .iter()
        .map(|s| s.to_string())
        .chain((0..dim).map(|i| format!("x{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for traj in data {
        for (t, s) in traj.states().iter().enumerate() {
            let cells: Vec<String> = [traj.id().to_string(), t.to_string(), traj.label().to_string()]
                .into_iter()
                .chain(s.iter().map(|x| x.to_string()))
                .collect();
            writeln!(w, "{}", cells.join(","))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_dataset(&path).unwrap().is_empty());
    }

    #[test]
    fn roundtrip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        let data = vec![Trajectory::new(
            "t0".into(),
            1,
            vec![vec![0.1, -0.2], vec![0.30000000000000004, 2e-17]],
        )
        .unwrap()];
        save_dataset(&path, &data).unwrap();
        let first = std::fs::read(&path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded, data);
        save_dataset(&path, &loaded).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn malformed_record_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"label\":1,\"states\":[[0.0]]}\nnot-json\n",
        )
        .unwrap();
        let err = load_dataset(&path).unwrap_err().to_string();
        assert!(err.contains(":2"), "{err}");
    }

    #[test]
    fn bad_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"id\":\"a\",\"label\":2,\"states\":[[0.0]]}\n").unwrap();
        assert!(load_dataset(&path).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"label\":1,\"states\":[[0.0]]}\n{\"id\":\"b\",\"label\":1,\"states\":[[0.0,1.0]]}\n",
        )
        .unwrap();
        assert!(load_dataset(&path).is_err());
    }
}
