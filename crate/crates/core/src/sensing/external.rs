//! Plain-text dataset layout used for exchange with other tools.
//!
//! ```text
//! <root>/index.csv             sample_id,label,provenance,orientation_id,file
//! <root>/samples/<id>.csv      freq_hz,re_0,im_0,re_1,im_1,...,re_389,im_389
//! ```
//!
//! `index.csv` lists one sample per line; `file` is relative to `<root>`.
//! Each sample file has a header and exactly 201 rows in increasing
//! frequency, one per grid point, with the 390 configurations as (re, im)
//! column pairs. Labels use `open_hand`, `two_fingers`, `closed_hand` or
//! `empty`; provenance is `random` or `fcao`. Numbers are written in shortest
//! round-trip decimal form, so export followed by import is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{materialize_sample, BaseRun, BuildInfo, Dataset, DatasetManifest, SampleRef};
use super::store::write_record;
use super::{FrequencyGrid, GestureLabel, SampleRecord, N_CONFIG, N_FREQ};
use crate::sequencer::Provenance;
use crate::{Complex64, Error, Result};

pub const INDEX_FILE: &str = "index.csv";
const INDEX_HEADER: [&str; 5] = ["sample_id", "label", "provenance", "orientation_id", "file"];

#[derive(Debug, Serialize, Deserialize)]
struct IndexRow {
    sample_id: String,
    label: String,
    provenance: String,
    orientation_id: u32,
    file: String,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::data(format!("{}: {e}", path.display()))
}

fn sample_header() -> Vec<String> {
    let mut h = vec!["freq_hz".to_string()];
    for c in 0..N_CONFIG {
        h.push(format!("re_{c}"));
        h.push(format!("im_{c}"));
    }
    h
}

fn write_sample_csv(path: &Path, rec: &SampleRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(sample_header()).map_err(|e| csv_err(path, e))?;
    for f in 0..N_FREQ {
        let mut row = Vec::with_capacity(1 + 2 * N_CONFIG);
        row.push(rec.grid.value(f).to_string());
        for v in rec.row(f) {
            row.push(v.re.to_string());
            row.push(v.im.to_string());
        }
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes the selected samples of `ds`, fully materialized, to `out`.
pub fn export_dataset(ds: &Dataset, out: &Path, select: impl Fn(&SampleRef) -> bool) -> Result<usize> {
    let dir = out.join("samples");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let rows = ds.map_samples(select, |s, base| {
        let rec = materialize_sample(base, s)?;
        let file = format!("samples/{}.csv", s.sample_id);
        write_sample_csv(&out.join(&file), &rec)?;
        Ok(IndexRow {
            sample_id: s.sample_id.clone(),
            label: s.label.to_string(),
            provenance: s.provenance.to_string(),
            orientation_id: s.orientation_id,
            file,
        })
    })?;
    let ip = out.join(INDEX_FILE);
    let mut w = csv::Writer::from_path(&ip).map_err(|e| csv_err(&ip, e))?;
    for r in &rows {
        w.serialize(r).map_err(|e| csv_err(&ip, e))?;
    }
    w.flush().map_err(|e| Error::io(&ip, e))?;
    Ok(rows.len())
}

struct ParsedSample {
    freqs: Vec<f64>,
    s21: Vec<Complex64>,
}

fn parse_sample(path: &Path) -> std::result::Result<ParsedSample, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    let want = sample_header();
    if header.len() != want.len() {
        return Err(format!("expected {} columns, header has {}", want.len(), header.len()));
    }
    if let Some((got, exp)) = header.iter().zip(&want).find(|(g, e)| g != e) {
        return Err(format!("unexpected column {got:?}, expected {exp:?}"));
    }
    let mut freqs = Vec::with_capacity(N_FREQ);
    let mut s21 = Vec::with_capacity(N_FREQ * N_CONFIG);
    for (n, row) in r.records().enumerate() {
        let row = row.map_err(|e| format!("row {}: {e}", n + 1))?;
        let num = |k: usize| -> std::result::Result<f64, String> {
            row[k]
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("row {}: column {:?} is not a number: {:?}", n + 1, want[k], &row[k]))
        };
        freqs.push(num(0)?);
        for c in 0..N_CONFIG {
            s21.push(Complex64::new(num(1 + 2 * c)?, num(2 + 2 * c)?));
        }
    }
    if freqs.len() != N_FREQ {
        return Err(format!("expected {N_FREQ} frequency rows, found {}", freqs.len()));
    }
    if freqs.windows(2).any(|w| w[1] <= w[0]) {
        return Err("frequencies must be strictly increasing".into());
    }
    Ok(ParsedSample { freqs, s21 })
}

/// Reads a directory in the exchange layout and stores it as a dataset under
/// `out`. Every malformed file is reported; nothing is written if any fails.
pub fn load_external_dataset(path: &Path, out: &Path) -> Result<DatasetManifest> {
    if !path.is_dir() {
        return Err(Error::data(format!("{} is not a directory", path.display())));
    }
    let ip = path.join(INDEX_FILE);
    if !ip.exists() {
        let empty = fs::read_dir(path).map_err(|e| Error::io(path, e))?.next().is_none();
        if empty {
            log::warn!("{} is empty; producing an empty manifest", path.display());
            let m = DatasetManifest::empty();
            m.save(out)?;
            return Ok(m);
        }
        return Err(Error::data(format!("{}: missing {INDEX_FILE}", path.display())));
    }
    let mut r = csv::Reader::from_path(&ip).map_err(|e| csv_err(&ip, e))?;
    let header = r.headers().map_err(|e| csv_err(&ip, e))?.clone();
    for (n, exp) in INDEX_HEADER.iter().enumerate() {
        match header.get(n) {
            Some(h) if h == *exp => {}
            Some(h) => {
                return Err(Error::data(format!("{}: unknown schema, field {h:?} (expected {exp:?})", ip.display())))
            }
            None => return Err(Error::data(format!("{}: unknown schema, missing field {exp:?}", ip.display()))),
        }
    }
    if let Some(extra) = header.get(INDEX_HEADER.len()) {
        return Err(Error::data(format!("{}: unknown schema, unexpected field {extra:?}", ip.display())));
    }
    let rows: Vec<IndexRow> = r
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| csv_err(&ip, e))?;

    let mut diagnostics = Vec::new();
    let mut parsed = Vec::new();
    let mut grid_freqs: Option<Vec<f64>> = None;
    for row in &rows {
        let fp = path.join(&row.file);
        let meta = (row.label.parse::<GestureLabel>(), row.provenance.parse::<Provenance>());
        let (label, provenance) = match meta {
            (Ok(l), Ok(p)) => (l, p),
            (Err(e), _) | (_, Err(e)) => {
                diagnostics.push(format!("{}: {e}", row.sample_id));
                continue;
            }
        };
        match parse_sample(&fp) {
            Ok(p) => {
                if let Some(g) = &grid_freqs {
                    if g.iter().zip(&p.freqs).any(|(a, b)| (a - b).abs() > 1e-6 * a.abs()) {
                        diagnostics.push(format!("{}: frequency grid differs from the first sample", fp.display()));
                        continue;
                    }
                } else {
                    grid_freqs = Some(p.freqs.clone());
                }
                parsed.push((row, label, provenance, p));
            }
            Err(msg) => diagnostics.push(format!("{}: {msg}", fp.display())),
        }
    }
    if !diagnostics.is_empty() {
        return Err(Error::data(format!("rejected external records:\n  {}", diagnostics.join("\n  "))));
    }

    let mut manifest = DatasetManifest::empty();
    if let Some(f) = &grid_freqs {
        manifest.grid = FrequencyGrid {
            start_hz: f[0],
            stop_hz: f[N_FREQ - 1],
            points: N_FREQ,
        };
    }
    for (row, label, provenance, p) in parsed {
        let rec = SampleRecord {
            s21: p.s21,
            grid: manifest.grid,
            label,
            provenance,
            orientation_id: row.orientation_id,
            run_id: row.sample_id.clone(),
            seed: 0,
        };
        let file = format!("runs/{provenance}/{}.bin", row.sample_id);
        let sha = write_record(&out.join(&file), &rec)?;
        manifest.base_runs.push(BaseRun {
            run_id: row.sample_id.clone(),
            label,
            provenance,
            orientation_id: row.orientation_id,
            seed: 0,
            file,
            sha256: sha,
        });
        manifest.samples.push(SampleRef {
            sample_id: row.sample_id.clone(),
            label,
            provenance,
            orientation_id: row.orientation_id,
            base_run: row.sample_id.clone(),
            replica: None,
        });
        manifest.builds.entry(provenance).or_insert_with(|| BuildInfo {
            source: format!("external:{}", path.display()),
            master_seed: None,
            sequence_sha256: None,
            base_noise_std: None,
            augmentation: None,
        });
    }
    manifest.recount();
    manifest.save(out)?;
    Ok(manifest)
}
