//! Gesture scenes, S21 run synthesis and everything built on top of it:
//! augmentation, dataset storage, external import/export and scene
//! reconstruction.

mod augment;
mod dataset;
pub mod external;
mod reconstruct;
mod store;

pub use augment::{augment, materialize_replica, materialize_replica_row, AugmentSpec, ReplicaNoise, DEFAULT_REPLICAS, DEFAULT_STD_SET};
pub use dataset::{build_dataset, materialize_sample, sample_row, BaseRun, BuildInfo, BuildOptions, Dataset, DatasetManifest, SampleRef, MANIFEST_FILE};
pub use external::{export_dataset, load_external_dataset};
pub use reconstruct::{reconstruct_scene, Reconstruction, ReconstructionMode};
pub use store::{read_record, record_digest, write_record, RecordSidecar};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{CellReflectionTable, ChannelGainMatrix, LinkBudget, PathTable, SceneGrid, GRID_DIMS, GROUPS, STATES};
use crate::sequencer::{ConfigSequence, MeasurementMatrix, Provenance};
use crate::{labels, rng, Complex64, Error, Result};

/// Frequency points per run.
pub const N_FREQ: usize = 201;
/// Configurations per run (10 frames × 39).
pub const N_CONFIG: usize = 390;
/// Reflection coefficient of an occupied cuboid in the templates.
pub const DEFAULT_ETA: f64 = 0.8;
/// Orientations per gesture, canonical included.
pub const ORIENTATIONS: u32 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GestureLabel {
    OpenHand,
    TwoFingers,
    ClosedHand,
    Empty,
}

impl GestureLabel {
    /// Gesture classes in report order.
    pub const CLASSES: [GestureLabel; 3] = [GestureLabel::OpenHand, GestureLabel::TwoFingers, GestureLabel::ClosedHand];

    pub fn as_str(self) -> &'static str {
        match self {
            GestureLabel::OpenHand => "open_hand",
            GestureLabel::TwoFingers => "two_fingers",
            GestureLabel::ClosedHand => "closed_hand",
            GestureLabel::Empty => "empty",
        }
    }

    /// Position in [`Self::CLASSES`]; `None` for `Empty`.
    pub fn class_index(self) -> Option<usize> {
        Self::CLASSES.iter().position(|&c| c == self)
    }
}

impl std::fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GestureLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open_hand" => Ok(GestureLabel::OpenHand),
            "two_fingers" => Ok(GestureLabel::TwoFingers),
            "closed_hand" => Ok(GestureLabel::ClosedHand),
            "empty" => Ok(GestureLabel::Empty),
            other => Err(Error::invalid(format!("unknown gesture label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GestureScene {
    pub label: GestureLabel,
    pub orientation_id: u32,
    pub scene: SceneGrid,
}

// Shift applied to the template, by orientation slot.
const SHIFTS: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

fn template(label: GestureLabel) -> Vec<[usize; 3]> {
    let block = |xs: std::ops::Range<usize>, ys: std::ops::Range<usize>, z: usize| {
        xs.flat_map(move |x| ys.clone().map(move |y| [x, y, z])).collect::<Vec<_>>()
    };
    match label {
        GestureLabel::Empty => Vec::new(),
        GestureLabel::ClosedHand => block(1..3, 1..3, 0),
        GestureLabel::OpenHand => block(0..3, 0..3, 0),
        GestureLabel::TwoFingers => {
            let mut cells = block(0..3, 0..3, 0);
            cells.extend(block(1..2, 1..3, 1));
            cells
        }
    }
}

/// Occupancy template for a gesture. Orientations 1–3 shift it by one
/// cuboid, 4–8 jitter the occupied coefficients by up to ±10 % on top of one
/// of the four placements.
pub fn gesture_scene(label: GestureLabel, orientation_id: u32) -> Result<GestureScene> {
    if orientation_id >= ORIENTATIONS {
        return Err(Error::invalid(format!(
            "orientation must be below {ORIENTATIONS}, got {orientation_id}"
        )));
    }
    let o = orientation_id as usize;
    let (dx, dy) = SHIFTS[o % SHIFTS.len()];
    let mut eta = vec![Complex64::new(0.0, 0.0); GRID_DIMS.iter().product()];
    let mut jitter = rng::stream(0, labels!["gesture-jitter", label.as_str(), u64::from(orientation_id)]);
    for [x, y, z] in template(label) {
        let (x, y) = (x + dx, y + dy);
        debug_assert!(x < GRID_DIMS[0] && y < GRID_DIMS[1]);
        let scale = if o >= 4 {
            1.0 + 0.1 * rand::Rng::random_range(&mut jitter, -1.0..=1.0)
        } else {
            1.0
        };
        eta[SceneGrid::index(x, y, z)] = Complex64::new(DEFAULT_ETA * scale, 0.0);
    }
    Ok(GestureScene {
        label,
        orientation_id,
        scene: SceneGrid::with_eta(eta)?,
    })
}

/// Uniform frequency grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self {
            start_hz: 5.0e9,
            stop_hz: 6.5e9,
            points: N_FREQ,
        }
    }
}

impl FrequencyGrid {
    pub fn step(&self) -> f64 {
        (self.stop_hz - self.start_hz) / (self.points - 1) as f64
    }

    pub fn value(&self, n: usize) -> f64 {
        self.start_hz + n as f64 * self.step()
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|n| self.value(n)).collect()
    }

    /// Index of the grid point nearest to `f`.
    pub fn nearest_index(&self, f: f64) -> Result<usize> {
        let step = self.step();
        if !(f >= self.start_hz - step / 2.0 && f <= self.stop_hz + step / 2.0) {
            return Err(Error::invalid(format!(
                "{f} Hz is outside the grid {}–{} Hz",
                self.start_hz, self.stop_hz
            )));
        }
        Ok((((f - self.start_hz) / step).round() as usize).min(self.points - 1))
    }
}

/// One measurement run: S21 for every (frequency, configuration).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    /// Row-major, `N_FREQ` rows of `N_CONFIG` entries.
    pub s21: Vec<Complex64>,
    pub grid: FrequencyGrid,
    pub label: GestureLabel,
    pub provenance: Provenance,
    pub orientation_id: u32,
    pub run_id: String,
    pub seed: u64,
}

impl SampleRecord {
    pub fn validate(&self) -> Result<()> {
        if self.grid.points != N_FREQ {
            return Err(Error::dims(format!("expected {N_FREQ} frequency rows, got {}", self.grid.points)));
        }
        if self.s21.len() != N_FREQ * N_CONFIG {
            return Err(Error::dims(format!(
                "expected {N_FREQ}×{N_CONFIG} S21 entries, got {}",
                self.s21.len()
            )));
        }
        Ok(())
    }

    pub fn row(&self, f: usize) -> &[Complex64] {
        &self.s21[f * N_CONFIG..(f + 1) * N_CONFIG]
    }

    pub fn get(&self, f: usize, c: usize) -> Complex64 {
        self.s21[f * N_CONFIG + c]
    }

    /// Largest |S21| in the record.
    pub fn peak_magnitude(&self) -> f64 {
        self.s21.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

fn check_sequence(seq: &ConfigSequence) -> Result<()> {
    seq.validate()?;
    if seq.len() != N_CONFIG {
        return Err(Error::dims(format!(
            "sequence has {} configurations, a run needs {N_CONFIG}",
            seq.len()
        )));
    }
    Ok(())
}

/// Per-configuration measurement matrix at one frequency: row `c` is
/// `Σ_l A[(l, s_l(c))]`.
pub fn configuration_matrix(seq: &ConfigSequence, a: &ChannelGainMatrix) -> Result<MeasurementMatrix> {
    seq.validate()?;
    if a.a.nrows() != GROUPS * STATES {
        return Err(Error::dims("gain matrix has the wrong number of rows"));
    }
    let configs: Vec<_> = seq.configurations().collect();
    let m = a.a.ncols();
    let gamma = DMatrix::from_fn(configs.len(), m, |c, j| {
        (0..GROUPS)
            .map(|l| a.a[(l * STATES + configs[c][l] as usize, j)])
            .sum()
    });
    Ok(MeasurementMatrix { gamma })
}

/// Shared inputs of [`synth_run`].
#[derive(Debug, Clone)]
pub struct SynthSetup {
    pub link: LinkBudget,
    pub table: CellReflectionTable,
    pub grid: FrequencyGrid,
}

impl Default for SynthSetup {
    fn default() -> Self {
        Self {
            link: LinkBudget::default(),
            table: CellReflectionTable::default(),
            grid: FrequencyGrid::default(),
        }
    }
}

/// Evaluates the channel for every configuration at every frequency, adding
/// circular complex Gaussian noise of total standard deviation `noise_std`.
pub fn synth_run(
    scene: &GestureScene,
    seq: &ConfigSequence,
    setup: &SynthSetup,
    noise_std: f64,
    seed: u64,
) -> Result<SampleRecord> {
    check_sequence(seq)?;
    scene.scene.validate()?;
    if setup.grid.points != N_FREQ {
        return Err(Error::dims(format!("run grid must have {N_FREQ} points")));
    }
    if !(noise_std >= 0.0) {
        return Err(Error::invalid("noise std must be non-negative"));
    }
    let paths = PathTable::new(&setup.link, &scene.scene.cuboids)?;
    let eta = DVector::from_column_slice(&scene.scene.eta);
    let configs: Vec<_> = seq.configurations().copied().collect();
    let pt = setup.link.pt;
    let normal = Normal::new(0.0, noise_std / 2f64.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let rows: Vec<Vec<Complex64>> = (0..N_FREQ)
        .into_par_iter()
        .map(|f| -> Result<Vec<Complex64>> {
            let a = paths.gain_matrix(setup.grid.value(f), &setup.table)?;
            let v = &a.a * &eta;
            let mut row: Vec<Complex64> = configs
                .iter()
                .map(|cfg| {
                    let mut s = Complex64::new(0.0, 0.0);
                    for (l, &b) in cfg.iter().enumerate() {
                        s += v[l * STATES + b as usize];
                    }
                    s * pt
                })
                .collect();
            if noise_std > 0.0 {
                let mut g = rng::stream(seed, labels!["synth", f]);
                for y in &mut row {
                    *y += Complex64::new(normal.sample(&mut g), normal.sample(&mut g));
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(SampleRecord {
        s21: rows.concat(),
        grid: setup.grid,
        label: scene.label,
        provenance: seq.provenance,
        orientation_id: scene.orientation_id,
        run_id: format!("{}-{}-o{}", seq.provenance, scene.label, scene.orientation_id),
        seed,
    })
}
