//! One run per file: little-endian `f64` (re, im) pairs, row-major over
//! (frequency, configuration), plus a JSON sidecar with the metadata.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FrequencyGrid, GestureLabel, SampleRecord, N_CONFIG, N_FREQ};
use crate::checksum::sha256_hex;
use crate::sequencer::Provenance;
use crate::{Complex64, Error, Result};

pub const ENCODING: &str = "f64le-complex-row-major";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSidecar {
    pub run_id: String,
    pub label: GestureLabel,
    pub provenance: Provenance,
    pub orientation_id: u32,
    pub seed: u64,
    pub grid: FrequencyGrid,
    pub n_config: usize,
    pub encoding: String,
    pub sha256: String,
}

pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

fn encode(rec: &SampleRecord) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(rec.s21.len() * 16);
    for v in &rec.s21 {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    bytes
}

/// SHA-256 of the record's binary encoding.
pub fn record_digest(rec: &SampleRecord) -> String {
    sha256_hex(&encode(rec))
}

/// Writes `bin` and its sidecar; returns the content checksum.
pub fn write_record(bin: &Path, rec: &SampleRecord) -> Result<String> {
    rec.validate()?;
    let bytes = encode(rec);
    let sha = sha256_hex(&bytes);
    if let Some(dir) = bin.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(bin, &bytes).map_err(|e| Error::io(bin, e))?;
    let side = RecordSidecar {
        run_id: rec.run_id.clone(),
        label: rec.label,
        provenance: rec.provenance,
        orientation_id: rec.orientation_id,
        seed: rec.seed,
        grid: rec.grid,
        n_config: N_CONFIG,
        encoding: ENCODING.to_string(),
        sha256: sha.clone(),
    };
    let sp = sidecar_path(bin);
    fs::write(&sp, serde_json::to_vec_pretty(&side)?).map_err(|e| Error::io(&sp, e))?;
    Ok(sha)
}

pub fn read_record(bin: &Path) -> Result<SampleRecord> {
    let sp = sidecar_path(bin);
    let text = fs::read(&sp).map_err(|e| Error::io(&sp, e))?;
    let side: RecordSidecar = serde_json::from_slice(&text)?;
    if side.encoding != ENCODING {
        return Err(Error::data(format!("{}: unknown encoding {:?}", sp.display(), side.encoding)));
    }
    if side.grid.points != N_FREQ || side.n_config != N_CONFIG {
        return Err(Error::data(format!(
            "{}: expected {N_FREQ}×{N_CONFIG}, sidecar says {}×{}",
            sp.display(),
            side.grid.points,
            side.n_config
        )));
    }
    let bytes = fs::read(bin).map_err(|e| Error::io(bin, e))?;
    if bytes.len() != N_FREQ * N_CONFIG * 16 {
        return Err(Error::data(format!(
            "{}: expected {} bytes, found {}",
            bin.display(),
            N_FREQ * N_CONFIG * 16,
            bytes.len()
        )));
    }
    let sha = sha256_hex(&bytes);
    if sha != side.sha256 {
        return Err(Error::data(format!("{}: checksum mismatch", bin.display())));
    }
    let s21 = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    Ok(SampleRecord {
        s21,
        grid: side.grid,
        label: side.label,
        provenance: side.provenance,
        orientation_id: side.orientation_id,
        run_id: side.run_id,
        seed: side.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> SampleRecord {
        SampleRecord {
            s21: (0..N_FREQ * N_CONFIG)
                .map(|n| Complex64::new((n as f64).sin() * 1e-3, 1.0 / (n as f64 + 0.3)))
                .collect(),
            grid: FrequencyGrid::default(),
            label: GestureLabel::ClosedHand,
            provenance: Provenance::Fcao,
            orientation_id: 4,
            run_id: "x".into(),
            seed: 17,
        }
    }

    #[test]
    fn bit_exact_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("runs/x.bin");
        let rec = record();
        let sha = write_record(&p, &rec).unwrap();
        assert_eq!(sha, record_digest(&rec));
        assert_eq!(read_record(&p).unwrap(), rec);
    }

    #[test]
    fn corrupted_payload_is_caught() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        write_record(&p, &record()).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes[100] ^= 1;
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_record(&p), Err(Error::Data(_))));
        fs::write(&p, &bytes[..32]).unwrap();
        assert!(read_record(&p).is_err());
    }
}
