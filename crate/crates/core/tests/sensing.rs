use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_sense::channel::{gain_matrix, SceneGrid};
use ris_sense::sensing::*;
use ris_sense::sequencer::*;
use ris_sense::Complex64;

fn sequence(p: Provenance, seed: u64) -> ConfigSequence {
    realize_sequence(&random_time_matrix(10, 16, seed).unwrap(), SLOTS_PER_FRAME, p, seed).unwrap()
}

fn scene(eta: Vec<Complex64>) -> GestureScene {
    GestureScene {
        label: GestureLabel::Empty,
        orientation_id: 0,
        scene: SceneGrid::with_eta(eta).unwrap(),
    }
}

fn random_eta(g: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..32).map(|_| Complex64::new(g.random_range(-1.0..1.0), g.random_range(-1.0..1.0))).collect()
}

#[test]
fn frame_average_equals_t_times_a() {
    let seq = sequence(Provenance::Random, 5);
    let setup = SynthSetup::default();
    let eta = gesture_scene(GestureLabel::TwoFingers, 2).unwrap();
    let rec = synth_run(&eta, &seq, &setup, 0.0, 0).unwrap();
    let t = time_matrix_from_sequence(&seq).unwrap();
    for f in [0, 77, 121, 200] {
        let a = gain_matrix(&setup.link, &setup.table, &eta.scene.cuboids, setup.grid.value(f)).unwrap();
        let gamma = t.measurement_matrix(&a).unwrap().gamma;
        let row = rec.row(f);
        for k in 0..10 {
            let mean = row[k * 39..(k + 1) * 39].iter().sum::<Complex64>() / 39.0;
            let want: Complex64 = (0..32).map(|m| gamma[(k, m)] * eta.scene.eta[m]).sum::<Complex64>() * setup.link.pt;
            assert!((mean - want).norm() <= 1e-10 * want.norm(), "f={f} k={k}");
        }
    }
}

#[test]
fn runs_superpose() {
    let seq = sequence(Provenance::Fcao, 1);
    let setup = SynthSetup::default();
    let mut g = ChaCha8Rng::seed_from_u64(1);
    let (e1, e2) = (random_eta(&mut g), random_eta(&mut g));
    let sum: Vec<Complex64> = e1.iter().zip(&e2).map(|(a, b)| a + b).collect();
    let run = |e: &[Complex64]| synth_run(&scene(e.to_vec()), &seq, &setup, 0.0, 0).unwrap();
    let (r1, r2, rs) = (run(&e1), run(&e2), run(&sum));
    let peak = rs.peak_magnitude();
    for n in 0..rs.s21.len() {
        assert!((rs.s21[n] - r1.s21[n] - r2.s21[n]).norm() <= 1e-10 * peak);
    }
}

#[test]
fn noisy_runs_repeat_bit_for_bit() {
    let seq = sequence(Provenance::Random, 2);
    let s = gesture_scene(GestureLabel::OpenHand, 0).unwrap();
    let setup = SynthSetup::default();
    let a = synth_run(&s, &seq, &setup, 1e-4, 9).unwrap();
    assert_eq!(a, synth_run(&s, &seq, &setup, 1e-4, 9).unwrap());
    assert_ne!(a, synth_run(&s, &seq, &setup, 1e-4, 10).unwrap());
    let empty = synth_run(&gesture_scene(GestureLabel::Empty, 0).unwrap(), &seq, &setup, 0.0, 9).unwrap();
    assert!(empty.s21.iter().all(|v| v.norm() == 0.0));
}

#[test]
fn ridge_recovers_from_full_rank_per_configuration_rows() {
    let mut g = ChaCha8Rng::seed_from_u64(4);
    let gamma = DMatrix::from_fn(390, 32, |_, _| Complex64::new(g.random_range(-1.0..1.0), g.random_range(-1.0..1.0)));
    let eta = random_eta(&mut g);
    let y: Vec<Complex64> = (0..390).map(|r| (0..32).map(|m| gamma[(r, m)] * eta[m]).sum()).collect();
    let out = reconstruct_scene(&y, &MeasurementMatrix { gamma }, ReconstructionMode::LeastSquaresRidge { mu: 0.0 }).unwrap();
    let err: f64 = out.eta.iter().zip(&eta).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let norm: f64 = eta.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    assert!(err / norm < 1e-8);
}

#[test]
fn ridge_of_zero_measurement_is_zero() {
    let gamma = DMatrix::from_fn(10, 32, |r, c| Complex64::new((r * 32 + c) as f64, 1.0));
    let out = reconstruct_scene(&[Complex64::new(0.0, 0.0); 10], &MeasurementMatrix { gamma }, ReconstructionMode::LeastSquaresRidge { mu: 0.1 })
        .unwrap();
    assert!(out.eta.iter().all(|v| v.norm() == 0.0));
}

#[test]
fn matching_pursuit_recovers_sparse_support() {
    let trials = 100;
    let mut hits = 0;
    for seed in 0..trials {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        // 10 distinct rows of the unitary 32-point DFT.
        let mut rows: Vec<usize> = (0..32).collect();
        rows.shuffle(&mut g);
        let gamma = DMatrix::from_fn(10, 32, |r, c| {
            Complex64::from_polar(1.0 / 32f64.sqrt(), -2.0 * PI * (rows[r] * c) as f64 / 32.0)
        });
        let mut support: Vec<usize> = (0..32).collect();
        support.shuffle(&mut g);
        support.truncate(3);
        let mut eta = vec![Complex64::new(0.0, 0.0); 32];
        for &m in &support {
            eta[m] = Complex64::from_polar(g.random_range(0.5..1.5), g.random_range(0.0..2.0 * PI));
        }
        let y: Vec<Complex64> = (0..10).map(|r| (0..32).map(|m| gamma[(r, m)] * eta[m]).sum()).collect();
        let out = reconstruct_scene(&y, &MeasurementMatrix { gamma }, ReconstructionMode::MatchingPursuit { sparsity: 3, tol: 1e-12 })
            .unwrap();
        assert!(out.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let mut got = out.support.clone();
        got.sort_unstable();
        support.sort_unstable();
        hits += usize::from(got == support);
    }
    assert!(hits * 100 >= 90 * trials as usize, "{hits}/{trials}");
}

#[test]
fn replica_mean_converges_to_base() {
    let seq = sequence(Provenance::Random, 3);
    let base = synth_run(&gesture_scene(GestureLabel::ClosedHand, 1).unwrap(), &seq, &SynthSetup::default(), 0.0, 0).unwrap();
    let spec = AugmentSpec { replicas: 1000, ..AugmentSpec::default() };
    let plan = spec.plan(17).unwrap();
    let peak = base.peak_magnitude();
    for f in [0, 121, 200] {
        let mut acc = vec![Complex64::new(0.0, 0.0); N_CONFIG];
        for noise in &plan {
            for (a, v) in acc.iter_mut().zip(materialize_replica_row(base.row(f), peak, noise, f)) {
                *a += v;
            }
        }
        let rms = (acc
            .iter()
            .zip(base.row(f))
            .map(|(a, b)| (a / 1000.0 - b).norm_sqr())
            .sum::<f64>()
            / N_CONFIG as f64)
            .sqrt();
        assert!(rms / peak < 1e-2, "row {f}: {}", rms / peak);
    }
}

#[test]
fn replicas_keep_label_shape_and_seed() {
    let seq = sequence(Provenance::Random, 3);
    let base = synth_run(&gesture_scene(GestureLabel::OpenHand, 4).unwrap(), &seq, &SynthSetup::default(), 0.0, 0).unwrap();
    let spec = AugmentSpec { replicas: 3, ..AugmentSpec::default() };
    let reps = augment(&base, &spec, 5).unwrap();
    assert_eq!(reps, augment(&base, &spec, 5).unwrap());
    for r in &reps {
        assert_eq!((r.label, r.s21.len(), r.orientation_id), (base.label, base.s21.len(), 4));
        // Per-component std normalized by the base peak.
        let n = (2 * r.s21.len()) as f64;
        let var = r.s21.iter().zip(&base.s21).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / n;
        let std = var.sqrt() / base.peak_magnitude();
        assert!((0.08 * 0.8..=0.2 * 1.2).contains(&std), "{std}");
    }
}

#[test]
fn within_gesture_dispersion_is_small() {
    let seq = sequence(Provenance::Random, 6);
    let setup = SynthSetup::default();
    for label in GestureLabel::CLASSES {
        let runs: Vec<Vec<f64>> = (0..ORIENTATIONS)
            .map(|o| {
                let r = synth_run(&gesture_scene(label, o).unwrap(), &seq, &setup, 0.0, 0).unwrap();
                r.s21.iter().map(|v| 20.0 * v.norm().log10()).collect()
            })
            .collect();
        let n = runs[0].len();
        let (lo, hi) = runs.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let mut mad = 0.0;
        for i in 0..n {
            let mean = runs.iter().map(|r| r[i]).sum::<f64>() / runs.len() as f64;
            mad += runs.iter().map(|r| (r[i] - mean).abs()).sum::<f64>() / runs.len() as f64;
        }
        mad /= n as f64;
        assert!(mad < 0.1 * (hi - lo), "{label}: MAD {mad:.2} dB over a {:.2} dB range", hi - lo);
    }
}

#[test]
fn builds_are_counted_merged_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let opts = BuildOptions {
        master_seed: 4,
        augmentation: AugmentSpec { replicas: 3, ..AugmentSpec::default() },
        ..BuildOptions::default()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for root in [&a, &b] {
        build_dataset(root, &sequence(Provenance::Random, 1), &opts).unwrap();
        build_dataset(root, &sequence(Provenance::Fcao, 2), &opts).unwrap();
    }
    let ma = std::fs::read(a.join(MANIFEST_FILE)).unwrap();
    assert_eq!(ma, std::fs::read(b.join(MANIFEST_FILE)).unwrap());
    let ds = Dataset::open(&a).unwrap();
    for p in Provenance::ALL {
        assert_eq!(ds.manifest.total(p), 81);
        for l in GestureLabel::CLASSES {
            assert_eq!(ds.manifest.count(p, l), 27);
        }
    }
    assert_eq!(ds.manifest.base_runs.len(), 54);
    let s = &ds.manifest.samples[5];
    let full = ds.materialize(s).unwrap();
    let base = ds.base_record(&s.base_run).unwrap();
    assert_eq!(sample_row(&base, s, 121), full.row(121));
}

#[test]
fn tampered_run_files_are_detected() {
    let dir = tempfile::tempdir().unwrap();
    let opts = BuildOptions {
        augmentation: AugmentSpec { replicas: 1, ..AugmentSpec::default() },
        ..BuildOptions::default()
    };
    let m = build_dataset(dir.path(), &sequence(Provenance::Random, 1), &opts).unwrap();
    let f = dir.path().join(&m.base_runs[0].file);
    let mut bytes = std::fs::read(&f).unwrap();
    bytes[100] ^= 1;
    std::fs::write(&f, bytes).unwrap();
    let ds = Dataset::open(dir.path()).unwrap();
    assert!(ds.base_record(&m.base_runs[0].run_id).is_err());
}

#[test]
fn external_round_trip_keeps_every_sample() {
    let dir = tempfile::tempdir().unwrap();
    let [data, csv, back, csv2, back2] = ["data", "csv", "back", "csv2", "back2"].map(|d| dir.path().join(d));
    let opts = BuildOptions {
        augmentation: AugmentSpec { replicas: 2, ..AugmentSpec::default() },
        ..BuildOptions::default()
    };
    build_dataset(&data, &sequence(Provenance::Fcao, 3), &opts).unwrap();
    let ds = Dataset::open(&data).unwrap();
    assert_eq!(export_dataset(&ds, &csv, |_| true).unwrap(), 54);
    let imported = load_external_dataset(&csv, &back).unwrap();
    assert_eq!(imported.counts, ds.manifest.counts);
    let ids = |m: &DatasetManifest| m.samples.iter().map(|s| (s.sample_id.clone(), s.label, s.orientation_id)).collect::<Vec<_>>();
    assert_eq!(ids(&imported), ids(&ds.manifest));
    let dsb = Dataset::open(&back).unwrap();
    assert_eq!(dsb.sample_digests(|_| true).unwrap(), ds.sample_digests(|_| true).unwrap());

    // Once in the exchange form, the round trip is a fixed point.
    export_dataset(&dsb, &csv2, |_| true).unwrap();
    let mut again = load_external_dataset(&csv2, &back2).unwrap();
    let mut first = imported.clone();
    for m in [&mut again, &mut first] {
        m.builds.values_mut().for_each(|b| b.source.clear());
    }
    assert_eq!(again, first);
}

#[test]
fn short_records_are_rejected_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let [data, csv, out] = ["data", "csv", "out"].map(|d| dir.path().join(d));
    let opts = BuildOptions {
        augmentation: AugmentSpec { replicas: 1, ..AugmentSpec::default() },
        ..BuildOptions::default()
    };
    build_dataset(&data, &sequence(Provenance::Random, 3), &opts).unwrap();
    export_dataset(&Dataset::open(&data).unwrap(), &csv, |_| true).unwrap();
    let victims = ["random-open_hand-o0-r000", "random-closed_hand-o8-r000"];
    for v in victims {
        let f = csv.join("samples").join(format!("{v}.csv"));
        let text = std::fs::read_to_string(&f).unwrap();
        let keep: Vec<&str> = text.lines().take(201).collect();
        std::fs::write(&f, keep.join("\n") + "\n").unwrap();
    }
    let err = load_external_dataset(&csv, &out).unwrap_err().to_string();
    for v in victims {
        assert!(err.contains(v), "{err}");
    }
    assert!(err.contains("expected 201 frequency rows, found 200"), "{err}");
    assert!(!out.join(MANIFEST_FILE).exists());
}

#[test]
fn empty_directory_imports_as_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (src, out) = (dir.path().join("src"), dir.path().join("out"));
    std::fs::create_dir(&src).unwrap();
    let m = load_external_dataset(&src, &out).unwrap();
    assert!(m.samples.is_empty());
    assert!(out.join(MANIFEST_FILE).exists());
}

#[test]
fn unknown_index_schema_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.csv"), "sample_id,gesture,provenance,orientation_id,file\n").unwrap();
    let err = load_external_dataset(dir.path(), &dir.path().join("out")).unwrap_err().to_string();
    assert!(err.contains("\"gesture\""), "{err}");
}
