//! White-noise replicas of a base run.
//!
//! Each replica draws one standard deviation from the set, then adds
//! independent `N(0, σ²)` noise to the real and imaginary parts of the record
//! after dividing it by its peak magnitude; the result is scaled back. Noise
//! for frequency row `f` of replica `r` comes from its own sub-stream, so a
//! single row can be regenerated without touching the rest.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{SampleRecord, N_CONFIG, N_FREQ};
use crate::{labels, rng, Complex64, Error, Result};

pub const DEFAULT_REPLICAS: u32 = 115;
pub const DEFAULT_STD_SET: [f64; 4] = [0.08, 0.1, 0.15, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub replicas: u32,
    pub std_set: Vec<f64>,
    /// Scale the noise is defined on; recorded in every manifest.
    pub normalization: String,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            replicas: DEFAULT_REPLICAS,
            std_set: DEFAULT_STD_SET.to_vec(),
            normalization: "re/im channels divided by the record's peak |S21|".to_string(),
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.std_set.is_empty() || self.std_set.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::invalid("std set must be non-empty with finite non-negative entries"));
        }
        Ok(())
    }

    /// Noise parameters of every replica, in order.
    pub fn plan(&self, seed: u64) -> Result<Vec<ReplicaNoise>> {
        self.validate()?;
        Ok((0..self.replicas)
            .map(|r| {
                let mut g = rng::stream(seed, labels!["replica", r, "std"]);
                ReplicaNoise {
                    replica: r,
                    std: self.std_set[g.random_range(0..self.std_set.len())],
                    seed,
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaNoise {
    pub replica: u32,
    pub std: f64,
    pub seed: u64,
}

fn scale(peak: f64) -> f64 {
    if peak > 0.0 {
        peak
    } else {
        1.0
    }
}

/// Row `f` of a replica, given the base row and the base record's peak.
pub fn materialize_replica_row(base_row: &[Complex64], peak: f64, noise: &ReplicaNoise, f: usize) -> Vec<Complex64> {
    let s = scale(peak) * noise.std;
    let mut g = rng::stream(noise.seed, labels!["replica", noise.replica, "row", f]);
    base_row
        .iter()
        .map(|&v| {
            let re: f64 = StandardNormal.sample(&mut g);
            let im: f64 = StandardNormal.sample(&mut g);
            v + Complex64::new(re * s, im * s)
        })
        .collect()
}

pub fn materialize_replica(base: &SampleRecord, noise: &ReplicaNoise) -> Result<SampleRecord> {
    base.validate()?;
    let peak = base.peak_magnitude();
    let mut s21 = Vec::with_capacity(N_FREQ * N_CONFIG);
    for f in 0..N_FREQ {
        s21.extend(materialize_replica_row(base.row(f), peak, noise, f));
    }
    Ok(SampleRecord {
        s21,
        run_id: format!("{}-r{:03}", base.run_id, noise.replica),
        seed: noise.seed,
        ..base.clone()
    })
}

/// All replicas of `base`, materialized.
pub fn augment(base: &SampleRecord, spec: &AugmentSpec, seed: u64) -> Result<Vec<SampleRecord>> {
    spec.plan(seed)?
        .iter()
        .map(|n| materialize_replica(base, n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{FrequencyGrid, GestureLabel};
    use crate::sequencer::Provenance;

    fn base() -> SampleRecord {
        SampleRecord {
            s21: (0..N_FREQ * N_CONFIG)
                .map(|n| Complex64::from_polar(0.5 + 0.5 * ((n % 7) as f64 / 7.0), n as f64 * 0.01))
                .collect(),
            grid: FrequencyGrid::default(),
            label: GestureLabel::OpenHand,
            provenance: Provenance::Random,
            orientation_id: 0,
            run_id: "b".into(),
            seed: 0,
        }
    }

    #[test]
    fn zero_replicas_is_empty() {
        let spec = AugmentSpec {
            replicas: 0,
            ..Default::default()
        };
        assert!(augment(&base(), &spec, 1).unwrap().is_empty());
    }

    #[test]
    fn replicas_keep_label_and_shape_and_are_seeded() {
        let spec = AugmentSpec {
            replicas: 3,
            ..Default::default()
        };
        let a = augment(&base(), &spec, 5).unwrap();
        let b = augment(&base(), &spec, 5).unwrap();
        assert_eq!(a, b);
        for r in &a {
            r.validate().unwrap();
            assert_eq!(r.label, GestureLabel::OpenHand);
        }
        assert_ne!(a[0].s21, a[1].s21);
    }

    #[test]
    fn row_materialization_matches_full() {
        let b = base();
        let noise = AugmentSpec::default().plan(8).unwrap()[17];
        let full = materialize_replica(&b, &noise).unwrap();
        for f in [0, 57, 200] {
            assert_eq!(materialize_replica_row(b.row(f), b.peak_magnitude(), &noise, f), full.row(f));
        }
    }

    #[test]
    fn empirical_std_matches_drawn_std() {
        let b = base();
        let peak = b.peak_magnitude();
        for noise in AugmentSpec::default().plan(3).unwrap().iter().take(8) {
            let r = materialize_replica(&b, noise).unwrap();
            let diffs: Vec<f64> = r
                .s21
                .iter()
                .zip(&b.s21)
                .flat_map(|(x, y)| {
                    let d = (x - y) / peak;
                    [d.re, d.im]
                })
                .collect();
            let n = diffs.len() as f64;
            let mean = diffs.iter().sum::<f64>() / n;
            let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((sd - noise.std).abs() < 0.01 * noise.std, "{sd} vs {}", noise.std);
            assert!((0.08 * 0.8..=0.2 * 1.2).contains(&sd));
        }
    }

    #[test]
    fn plan_uses_every_std() {
        let plan = AugmentSpec::default().plan(11).unwrap();
        for s in DEFAULT_STD_SET {
            assert!(plan.iter().any(|p| p.std == s));
        }
    }
}
