//! RIS configuration schedules.
//!
//! A schedule is described at two levels. The time-allocation matrix `T`
//! (`K × L·Na`) says, per frame `k` and group `l`, which fraction of the
//! frame duration `δ` the group spends in each state. A [`ConfigSequence`]
//! is its discrete realization: 39 group-state vectors per frame, applied
//! one after the other. A group that is ON in `n` of the 39 slots realizes
//! `t_ON = n δ / 39`. All constructors work in these integer units so that the
//! per-group sum constraint holds exactly.

mod fcao;

pub use fcao::{fcao_optimize, FcaoOptions, FcaoOutcome};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelGainMatrix, GROUPS, STATES};
use crate::{labels, rng, Complex64, Error, Result};

/// Configurations applied within one frame.
pub const SLOTS_PER_FRAME: u32 = 39;
/// Frames per measurement run.
pub const DEFAULT_FRAMES: usize = 10;

/// How a schedule was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Random,
    Fcao,
}

impl Provenance {
    pub const ALL: [Provenance; 2] = [Provenance::Random, Provenance::Fcao];

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Random => "random",
            Provenance::Fcao => "fcao",
        }
    }
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Provenance::Random),
            "fcao" | "optimized" | "optimised" => Ok(Provenance::Fcao),
            other => Err(Error::invalid(format!("unknown provenance {other:?}"))),
        }
    }
}

/// Time-allocation matrix, one row per frame, columns `(l, OFF), (l, ON)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeMatrix {
    delta: f64,
    groups: usize,
    rows: Vec<Vec<f64>>,
}

impl TimeMatrix {
    /// Exact matrix from per-(frame, group) ON-slot counts.
    pub fn from_on_counts(counts: &[Vec<u32>], slots: u32) -> Result<Self> {
        if counts.is_empty() || slots == 0 {
            return Err(Error::invalid("time matrix needs at least one frame and one slot"));
        }
        let groups = counts[0].len();
        let mut rows = Vec::with_capacity(counts.len());
        for (k, frame) in counts.iter().enumerate() {
            if frame.len() != groups {
                return Err(Error::dims(format!("frame {k} has {} groups, expected {groups}", frame.len())));
            }
            let mut row = Vec::with_capacity(groups * STATES);
            for &n in frame {
                if n > slots {
                    return Err(Error::invalid(format!("ON count {n} exceeds {slots} slots")));
                }
                row.push(f64::from(slots - n) / f64::from(slots));
                row.push(f64::from(n) / f64::from(slots));
            }
            rows.push(row);
        }
        Ok(Self {
            delta: 1.0,
            groups,
            rows,
        })
    }

    /// Validated matrix from raw rows (`δ`-normalized).
    pub fn from_rows(rows: Vec<Vec<f64>>, delta: f64) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() || rows[0].len() % STATES != 0 {
            return Err(Error::dims("time matrix rows must hold (OFF, ON) pairs"));
        }
        let groups = rows[0].len() / STATES;
        let tm = Self { delta, groups, rows };
        tm.check_feasible()?;
        Ok(tm)
    }

    pub fn check_feasible(&self) -> Result<()> {
        for (k, row) in self.rows.iter().enumerate() {
            if row.len() != self.groups * STATES {
                return Err(Error::dims(format!("frame {k} has {} columns", row.len())));
            }
            for (l, pair) in row.chunks(STATES).enumerate() {
                if pair.iter().any(|&t| !(0.0..=self.delta).contains(&t)) {
                    return Err(Error::invalid(format!("t[{k}][{l}] outside [0, δ]")));
                }
                let sum: f64 = pair.iter().sum();
                if (sum - self.delta).abs() > 1e-12 {
                    return Err(Error::invalid(format!(
                        "frame {k} group {l}: state durations sum to {sum}, expected δ = {}",
                        self.delta
                    )));
                }
            }
        }
        Ok(())
    }

    /// Frames `K`.
    pub fn frames(&self) -> usize {
        self.rows.len()
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    /// Columns `L · Na`.
    pub fn cols(&self) -> usize {
        self.groups * STATES
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, k: usize, l: usize, state: usize) -> f64 {
        self.rows[k][l * STATES + state]
    }

    /// ON-slot counts, failing when some `t_ON` is not a multiple of `δ/slots`.
    pub fn on_counts(&self, slots: u32) -> Result<Vec<Vec<u32>>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(k, row)| {
                row.chunks(STATES)
                    .enumerate()
                    .map(|(l, pair)| {
                        let x = pair[1] / self.delta * f64::from(slots);
                        let n = x.round();
                        if (x - n).abs() > 1e-9 {
                            Err(Error::invalid(format!(
                                "t[{k}][{l}] = {} is not realizable with {slots} slots",
                                pair[1]
                            )))
                        } else {
                            Ok(n as u32)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.frames(), self.cols(), |k, c| self.rows[k][c])
    }

    /// `Γ = T · A`.
    pub fn measurement_matrix(&self, a: &ChannelGainMatrix) -> Result<MeasurementMatrix> {
        if self.cols() != a.a.nrows() {
            return Err(Error::dims(format!(
                "T has {} columns, A has {} rows",
                self.cols(),
                a.a.nrows()
            )));
        }
        let t = self.to_matrix().map(|v| Complex64::new(v, 0.0));
        Ok(MeasurementMatrix { gamma: t * &a.a })
    }
}

/// Draws every `t_ON` uniformly from `{0, 1/39, ..., 39/39} · δ`.
pub fn random_time_matrix(frames: usize, groups: usize, seed: u64) -> Result<TimeMatrix> {
    if frames == 0 || groups == 0 {
        return Err(Error::invalid("need at least one frame and one group"));
    }
    let mut g = rng::stream(seed, labels!["random-time-matrix"]);
    let counts: Vec<Vec<u32>> = (0..frames)
        .map(|_| (0..groups).map(|_| g.random_range(0..=SLOTS_PER_FRAME)).collect())
        .collect();
    TimeMatrix::from_on_counts(&counts, SLOTS_PER_FRAME)
}

/// `Γ`, `K × M`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    pub gamma: DMatrix<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub max: f64,
    pub avg: f64,
}

/// Largest and mean normalized inner product over distinct column pairs.
pub fn mutual_coherence(g: &MeasurementMatrix) -> Result<Coherence> {
    let gm = &g.gamma;
    let m = gm.ncols();
    if m < 2 {
        return Err(Error::invalid("coherence needs at least two columns"));
    }
    let norms: Vec<f64> = (0..m).map(|j| gm.column(j).norm()).collect();
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::invalid(format!("column {j} of the measurement matrix is zero")));
    }
    let gram = gm.adjoint() * gm;
    let mut max = 0.0f64;
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..m {
        for j in (i + 1)..m {
            let c = (gram[(i, j)].norm() / (norms[i] * norms[j])).min(1.0);
            max = max.max(c);
            sum += c;
            pairs += 1;
        }
    }
    Ok(Coherence {
        max,
        avg: sum / pairs as f64,
    })
}

/// One configuration: the bit (0 = OFF, 1 = ON) of every group.
pub type GroupStates = [u8; GROUPS];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSequence {
    pub provenance: Provenance,
    pub seed: u64,
    pub delta: f64,
    pub frames: Vec<Vec<GroupStates>>,
}

impl ConfigSequence {
    pub fn frames(&self) -> usize {
        self.frames.len()
    }

    /// All configurations in application order.
    pub fn configurations(&self) -> impl Iterator<Item = &GroupStates> {
        self.frames.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::invalid("sequence has no frames"));
        }
        for (k, f) in self.frames.iter().enumerate() {
            if f.len() != SLOTS_PER_FRAME as usize {
                return Err(Error::dims(format!(
                    "frame {k} has {} configurations, expected {SLOTS_PER_FRAME}",
                    f.len()
                )));
            }
            if f.iter().flatten().any(|&b| b > 1) {
                return Err(Error::invalid(format!("frame {k} has a group bit other than 0/1")));
            }
        }
        Ok(())
    }
}

/// Schedules `round(39 · t_ON / δ)` ON slots per group, positions by seeded shuffle.
pub fn realize_sequence(
    t: &TimeMatrix,
    per_frame: u32,
    provenance: Provenance,
    seed: u64,
) -> Result<ConfigSequence> {
    if t.groups() != GROUPS {
        return Err(Error::dims(format!("sequence needs {GROUPS} groups, T has {}", t.groups())));
    }
    let counts = t.on_counts(per_frame)?;
    let mut frames = Vec::with_capacity(counts.len());
    for (k, frame_counts) in counts.iter().enumerate() {
        let mut configs = vec![[0u8; GROUPS]; per_frame as usize];
        for (l, &n) in frame_counts.iter().enumerate() {
            let mut slots: Vec<usize> = (0..per_frame as usize).collect();
            let mut g = rng::stream(seed, labels!["realize", k, l]);
            slots.shuffle(&mut g);
            for &c in &slots[..n as usize] {
                configs[c][l] = 1;
            }
        }
        frames.push(configs);
    }
    Ok(ConfigSequence {
        provenance,
        seed,
        delta: t.delta(),
        frames,
    })
}

/// Frame-wise mean of the per-state indicators.
pub fn time_matrix_from_sequence(c: &ConfigSequence) -> Result<TimeMatrix> {
    c.validate()?;
    let counts: Vec<Vec<u32>> = c
        .frames
        .iter()
        .map(|f| {
            (0..GROUPS)
                .map(|l| f.iter().filter(|cfg| cfg[l] == 1).count() as u32)
                .collect()
        })
        .collect();
    let mut t = TimeMatrix::from_on_counts(&counts, SLOTS_PER_FRAME)?;
    t.delta = c.delta;
    Ok(t)
}

#[derive(Serialize, Deserialize)]
struct SequenceFile {
    provenance: Provenance,
    seed: u64,
    delta: f64,
    frames: Vec<Vec<ConfigEntry>>,
}

#[derive(Serialize, Deserialize)]
struct ConfigEntry {
    groups: Vec<u8>,
}

impl Serialize for ConfigSequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SequenceFile {
            provenance: self.provenance,
            seed: self.seed,
            delta: self.delta,
            frames: self
                .frames
                .iter()
                .map(|f| f.iter().map(|g| ConfigEntry { groups: g.to_vec() }).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConfigSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let f = SequenceFile::deserialize(d)?;
        let mut frames = Vec::with_capacity(f.frames.len());
        for frame in f.frames {
            let mut cfgs = Vec::with_capacity(frame.len());
            for e in frame {
                let arr: GroupStates = e.groups.as_slice().try_into().map_err(|_| {
                    D::Error::custom(format!("expected {GROUPS} group bits, got {}", e.groups.len()))
                })?;
                cfgs.push(arr);
            }
            frames.push(cfgs);
        }
        Ok(ConfigSequence {
            provenance: f.provenance,
            seed: f.seed,
            delta: f.delta,
            frames,
        })
    }
}
