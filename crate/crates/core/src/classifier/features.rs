use std::borrow::Cow;
use std::collections::HashMap;
use std::f64::consts::PI;

use super::train::FeatureSource;
use crate::sensing::{sample_row, Dataset, GestureLabel, SampleRecord, SampleRef, N_CONFIG, N_FREQ};
use crate::sequencer::{Provenance, DEFAULT_FRAMES, SLOTS_PER_FRAME};
use crate::{Complex64, Error, Result};

/// Frequency whose S21 row feeds model #1 (snapped to the grid).
pub const DESIGN_FREQUENCY: f64 = 5.91e9;
/// Magnitudes below this are clipped before normalization (dB).
pub const MAG_FLOOR_DB: f64 = -80.0;

/// Mean of `Re(S21)` over each frame's 39 configurations.
pub fn features_m1_row(row: &[Complex64]) -> Result<Vec<f64>> {
    if row.len() != N_CONFIG {
        return Err(Error::dims(format!("expected {N_CONFIG} configurations, got {}", row.len())));
    }
    Ok(row
        .chunks(SLOTS_PER_FRAME as usize)
        .map(|frame| frame.iter().map(|v| v.re).sum::<f64>() / frame.len() as f64)
        .collect())
}

pub fn features_m1(rec: &SampleRecord, f_design: f64) -> Result<Vec<f64>> {
    rec.validate()?;
    let f = rec.grid.nearest_index(f_design)?;
    features_m1_row(rec.row(f))
}

/// Magnitude (dB, clipped to `[-80, 0]`, mapped to `[0, 1]`) and phase
/// (`arg / π`) images of one record.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImageM2 {
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
}

impl FeatureImageM2 {
    /// Both channels back to back, the layout model #2 consumes.
    pub fn into_input(self) -> Vec<f64> {
        let mut v = self.magnitude;
        v.extend(self.phase);
        v
    }
}

pub fn features_m2(rec: &SampleRecord) -> Result<FeatureImageM2> {
    rec.validate()?;
    let magnitude = rec
        .s21
        .iter()
        .map(|v| {
            let db = 20.0 * v.norm().log10();
            let db = if db.is_nan() { MAG_FLOOR_DB } else { db.clamp(MAG_FLOOR_DB, 0.0) };
            (db - MAG_FLOOR_DB) / -MAG_FLOOR_DB
        })
        .collect();
    let phase = rec.s21.iter().map(|v| v.arg() / PI).collect();
    Ok(FeatureImageM2 { magnitude, phase })
}

/// Model #1 features and class indices of every gesture sample of one
/// provenance, in manifest order.
pub fn dataset_features_m1(ds: &Dataset, provenance: Provenance, f_design: f64) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let f = ds.manifest.grid.nearest_index(f_design)?;
    let select = |s: &SampleRef| s.provenance == provenance && s.label.class_index().is_some();
    let rows = ds.map_samples(select, |s, base| {
        let x = features_m1_row(&sample_row(base, s, f))?;
        Ok((x, s.label.class_index().expect("filtered to gesture classes")))
    })?;
    Ok(rows.into_iter().unzip())
}

/// Model #2 inputs generated on demand from a dataset's base runs.
pub struct LazyImages {
    bases: HashMap<String, SampleRecord>,
    samples: Vec<SampleRef>,
}

impl LazyImages {
    pub fn new(ds: &Dataset, provenance: Provenance) -> Result<Self> {
        let samples: Vec<SampleRef> = ds
            .manifest
            .samples
            .iter()
            .filter(|s| s.provenance == provenance && s.label.class_index().is_some())
            .cloned()
            .collect();
        let mut bases = HashMap::new();
        for s in &samples {
            if !bases.contains_key(&s.base_run) {
                bases.insert(s.base_run.clone(), ds.base_record(&s.base_run)?);
            }
        }
        Ok(Self { bases, samples })
    }

    pub fn labels(&self) -> Vec<GestureLabel> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

impl FeatureSource for LazyImages {
    fn len(&self) -> usize {
        self.samples.len()
    }

    fn input_len(&self) -> usize {
        2 * N_FREQ * N_CONFIG
    }

    fn input(&self, i: usize) -> Result<Cow<'_, [f64]>> {
        let s = &self.samples[i];
        let rec = crate::sensing::materialize_sample(&self.bases[&s.base_run], s)?;
        Ok(Cow::Owned(features_m2(&rec)?.into_input()))
    }

    fn label(&self, i: usize) -> usize {
        self.samples[i].label.class_index().expect("filtered to gesture classes")
    }
}

const _: () = assert!(DEFAULT_FRAMES * SLOTS_PER_FRAME as usize == N_CONFIG);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::FrequencyGrid;

    fn record(f: impl Fn(usize, usize) -> Complex64) -> SampleRecord {
        SampleRecord {
            s21: (0..N_FREQ * N_CONFIG).map(|n| f(n / N_CONFIG, n % N_CONFIG)).collect(),
            grid: FrequencyGrid::default(),
            label: GestureLabel::OpenHand,
            provenance: Provenance::Random,
            orientation_id: 0,
            run_id: String::new(),
            seed: 0,
        }
    }

    #[test]
    fn constant_record_gives_constant_features() {
        let r = record(|_, _| Complex64::new(0.25, -3.0));
        assert_eq!(features_m1(&r, DESIGN_FREQUENCY).unwrap(), vec![0.25; 10]);
    }

    #[test]
    fn zero_frame_gives_zero_component() {
        let r = record(|_, c| if c / 39 == 4 { Complex64::new(0.0, 0.0) } else { Complex64::new(1.0, 0.0) });
        let x = features_m1(&r, DESIGN_FREQUENCY).unwrap();
        assert_eq!(x[4], 0.0);
        assert_eq!(x[3], 1.0);
        assert!(features_m1(&r, 7e9).is_err());
    }

    #[test]
    fn unit_magnitude_and_real_positive_images() {
        let r = record(|_, _| Complex64::new(1.0, 0.0));
        let img = features_m2(&r).unwrap();
        assert!(img.magnitude.iter().all(|&v| v == 1.0));
        assert!(img.phase.iter().all(|&v| v == 0.0));
        let z = record(|_, _| Complex64::new(0.0, 0.0));
        assert!(features_m2(&z).unwrap().magnitude.iter().all(|&v| v == 0.0));
    }
}
