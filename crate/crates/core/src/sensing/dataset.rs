//! Dataset directories: base runs on disk, replicas as references.
//!
//! ```text
//! <root>/manifest.json
//! <root>/runs/<provenance>/<run_id>.bin   (+ .json sidecar)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::augment::{materialize_replica, materialize_replica_row, AugmentSpec, ReplicaNoise};
use super::store::{read_record, record_digest, write_record};
use super::{gesture_scene, synth_run, FrequencyGrid, GestureLabel, SampleRecord, SynthSetup, ORIENTATIONS};
use crate::checksum::sha256_hex;
use crate::sequencer::{ConfigSequence, Provenance};
use crate::{labels, rng, Complex64, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseRun {
    pub run_id: String,
    pub label: GestureLabel,
    pub provenance: Provenance,
    pub orientation_id: u32,
    pub seed: u64,
    /// Relative to the dataset root.
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRef {
    pub sample_id: String,
    pub label: GestureLabel,
    pub provenance: Provenance,
    pub orientation_id: u32,
    pub base_run: String,
    /// `None` when the sample is the base run itself.
    pub replica: Option<ReplicaNoise>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildInfo {
    pub source: String,
    pub master_seed: Option<u64>,
    pub sequence_sha256: Option<String>,
    pub base_noise_std: Option<f64>,
    pub augmentation: Option<AugmentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub grid: FrequencyGrid,
    pub builds: BTreeMap<Provenance, BuildInfo>,
    /// provenance → label → sample count.
    pub counts: BTreeMap<Provenance, BTreeMap<GestureLabel, usize>>,
    pub base_runs: Vec<BaseRun>,
    pub samples: Vec<SampleRef>,
}

impl DatasetManifest {
    pub fn empty() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            grid: FrequencyGrid::default(),
            builds: BTreeMap::new(),
            counts: BTreeMap::new(),
            base_runs: Vec::new(),
            samples: Vec::new(),
        }
    }

    pub fn recount(&mut self) {
        self.counts.clear();
        for s in &self.samples {
            *self.counts.entry(s.provenance).or_default().entry(s.label).or_default() += 1;
        }
    }

    pub fn count(&self, provenance: Provenance, label: GestureLabel) -> usize {
        self.counts.get(&provenance).and_then(|m| m.get(&label)).copied().unwrap_or(0)
    }

    pub fn total(&self, provenance: Provenance) -> usize {
        self.counts.get(&provenance).map(|m| m.values().sum()).unwrap_or(0)
    }

    /// Drops everything belonging to `provenance`.
    fn remove_provenance(&mut self, p: Provenance) {
        self.builds.remove(&p);
        self.base_runs.retain(|r| r.provenance != p);
        self.samples.retain(|s| s.provenance != p);
        self.recount();
    }

    pub fn save(&self, root: &Path) -> Result<PathBuf> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let p = root.join(MANIFEST_FILE);
        fs::write(&p, serde_json::to_vec_pretty(self)?).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    pub fn load(root: &Path) -> Result<Self> {
        let p = root.join(MANIFEST_FILE);
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        let m: Self = serde_json::from_slice(&bytes)?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::data(format!(
                "{}: unsupported manifest version {}",
                p.display(),
                m.format_version
            )));
        }
        Ok(m)
    }
}

/// An opened dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        Ok(Self {
            root: root.to_path_buf(),
            manifest: DatasetManifest::load(root)?,
        })
    }

    fn base_entry(&self, run_id: &str) -> Result<&BaseRun> {
        self.manifest
            .base_runs
            .iter()
            .find(|r| r.run_id == run_id)
            .ok_or_else(|| Error::data(format!("manifest has no base run {run_id:?}")))
    }

    pub fn base_record(&self, run_id: &str) -> Result<SampleRecord> {
        let entry = self.base_entry(run_id)?;
        let rec = read_record(&self.root.join(&entry.file))?;
        if record_digest(&rec) != entry.sha256 {
            return Err(Error::data(format!("base run {run_id} does not match its manifest checksum")));
        }
        Ok(rec)
    }

    /// Full record of one sample.
    pub fn materialize(&self, s: &SampleRef) -> Result<SampleRecord> {
        let base = self.base_record(&s.base_run)?;
        materialize_sample(&base, s)
    }

    /// Applies `f` to every sample (in manifest order), loading each base
    /// run once. Base runs are processed in parallel.
    pub fn map_samples<T, F>(&self, select: impl Fn(&SampleRef) -> bool, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&SampleRef, &SampleRecord) -> Result<T> + Sync,
    {
        let chosen: Vec<(usize, &SampleRef)> = self
            .manifest
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| select(s))
            .collect();
        let mut by_base: BTreeMap<&str, Vec<(usize, &SampleRef)>> = BTreeMap::new();
        for &(n, s) in &chosen {
            by_base.entry(s.base_run.as_str()).or_default().push((n, s));
        }
        let groups: Vec<_> = by_base.into_iter().collect();
        let results: Vec<Vec<(usize, T)>> = groups
            .par_iter()
            .map(|(run, samples)| -> Result<Vec<(usize, T)>> {
                let base = self.base_record(run)?;
                samples.iter().map(|&(n, s)| Ok((n, f(s, &base)?))).collect()
            })
            .collect::<Result<_>>()?;
        let mut flat: Vec<(usize, T)> = results.into_iter().flatten().collect();
        flat.sort_by_key(|(n, _)| *n);
        Ok(flat.into_iter().map(|(_, t)| t).collect())
    }

    /// SHA-256 of every selected sample's materialized content.
    pub fn sample_digests(&self, select: impl Fn(&SampleRef) -> bool) -> Result<Vec<String>> {
        self.map_samples(select, |s, base| Ok(record_digest(&materialize_sample(base, s)?)))
    }
}

/// A sample's full record, given its already-loaded base run.
pub fn materialize_sample(base: &SampleRecord, s: &SampleRef) -> Result<SampleRecord> {
    let mut rec = match &s.replica {
        None => base.clone(),
        Some(noise) => materialize_replica(base, noise)?,
    };
    rec.run_id = s.sample_id.clone();
    Ok(rec)
}

/// One frequency row of a sample, without materializing the rest.
pub fn sample_row(base: &SampleRecord, s: &SampleRef, f: usize) -> Vec<Complex64> {
    match &s.replica {
        None => base.row(f).to_vec(),
        Some(noise) => materialize_replica_row(base.row(f), base.peak_magnitude(), noise, f),
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub master_seed: u64,
    pub augmentation: AugmentSpec,
    /// Measurement noise of the base runs before augmentation.
    pub base_noise_std: f64,
    pub setup: SynthSetup,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            master_seed: 0,
            augmentation: AugmentSpec::default(),
            base_noise_std: 0.0,
            setup: SynthSetup::default(),
        }
    }
}

/// Synthesizes 9 orientations of every gesture under `seq`, stores the base
/// runs under `root` and records `replicas` augmented samples per run in the
/// manifest. Entries of other provenances already in `root` are kept.
pub fn build_dataset(root: &Path, seq: &ConfigSequence, opts: &BuildOptions) -> Result<DatasetManifest> {
    opts.augmentation.validate()?;
    let provenance = seq.provenance;
    let seq_sha = sha256_hex(&serde_json::to_vec(seq)?);
    let jobs: Vec<(GestureLabel, u32)> = GestureLabel::CLASSES
        .iter()
        .flat_map(|&l| (0..ORIENTATIONS).map(move |o| (l, o)))
        .collect();
    let built: Vec<(BaseRun, Vec<SampleRef>)> = jobs
        .par_iter()
        .map(|&(label, o)| -> Result<(BaseRun, Vec<SampleRef>)> {
            let m = opts.master_seed;
            let run_seed = rng::derive_seed(m, labels![provenance.as_str(), label.as_str(), o, "run"]);
            let aug_seed = rng::derive_seed(m, labels![provenance.as_str(), label.as_str(), o, "augment"]);
            let scene = gesture_scene(label, o)?;
            let mut rec = synth_run(&scene, seq, &opts.setup, opts.base_noise_std, run_seed)?;
            rec.run_id = format!("{provenance}-{label}-o{o}");
            let file = format!("runs/{provenance}/{}.bin", rec.run_id);
            let sha = write_record(&root.join(&file), &rec)?;
            let samples = opts
                .augmentation
                .plan(aug_seed)?
                .into_iter()
                .map(|noise| SampleRef {
                    sample_id: format!("{}-r{:03}", rec.run_id, noise.replica),
                    label,
                    provenance,
                    orientation_id: o,
                    base_run: rec.run_id.clone(),
                    replica: Some(noise),
                })
                .collect();
            Ok((
                BaseRun {
                    run_id: rec.run_id.clone(),
                    label,
                    provenance,
                    orientation_id: o,
                    seed: run_seed,
                    file,
                    sha256: sha,
                },
                samples,
            ))
        })
        .collect::<Result<_>>()?;

    let mut manifest = if root.join(MANIFEST_FILE).exists() {
        DatasetManifest::load(root)?
    } else {
        DatasetManifest::empty()
    };
    if manifest.grid != opts.setup.grid {
        if manifest.samples.is_empty() {
            manifest.grid = opts.setup.grid;
        } else {
            return Err(Error::data("existing dataset uses a different frequency grid"));
        }
    }
    manifest.remove_provenance(provenance);
    for (run, samples) in built {
        manifest.base_runs.push(run);
        manifest.samples.extend(samples);
    }
    manifest.builds.insert(
        provenance,
        BuildInfo {
            source: "synthetic".into(),
            master_seed: Some(opts.master_seed),
            sequence_sha256: Some(seq_sha),
            base_noise_std: Some(opts.base_noise_std),
            augmentation: Some(opts.augmentation.clone()),
        },
    );
    manifest.recount();
    let expected = ORIENTATIONS as usize * opts.augmentation.replicas as usize;
    for label in GestureLabel::CLASSES {
        let got = manifest.count(provenance, label);
        if got != expected {
            return Err(Error::data(format!("{provenance}/{label}: built {got} samples, expected {expected}")));
        }
    }
    manifest.save(root)?;
    Ok(manifest)
}
