use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ris_sense::classifier::*;
use ris_sense::classifier::{Architecture, Model};
use ris_sense::sensing::{GestureLabel, N_CONFIG};
use ris_sense::Complex64;

/// Class `c` sits 3 units out along axis `c`, with unit-variance-0.09 noise.
fn separable(per_class: usize, dims: usize, seed: u64) -> InMemory {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for c in 0..3 {
        for _ in 0..per_class {
            let mut x: Vec<f64> = (0..dims).map(|_| 0.3 * g.sample::<f64, _>(StandardNormal)).collect();
            x[c] += 3.0;
            inputs.push(x);
            labels.push(c);
        }
    }
    InMemory::new(inputs, labels).unwrap()
}

fn quick(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        ..TrainConfig::new(ModelKind::M1, seed)
    }
}

#[test]
fn m1_features_match_two_loop_average() {
    let mut g = ChaCha8Rng::seed_from_u64(3);
    let row: Vec<Complex64> = (0..N_CONFIG).map(|_| Complex64::new(g.random_range(-1.0..1.0), g.random())).collect();
    let got = features_m1_row(&row).unwrap();
    assert_eq!(got.len(), 10);
    for k in 0..10 {
        let mut s = 0.0;
        for j in 0..39 {
            s += row[k * 39 + j].re;
        }
        assert!((got[k] - s / 39.0).abs() < 1e-12);
    }
    assert!(features_m1_row(&row[1..]).is_err());
}

#[test]
fn separable_fixture_is_learned_exactly() {
    let data = separable(60, 10, 1);
    let (model, report) = train(&data, &quick(7, 200)).unwrap();
    assert_eq!(report.test.accuracy, 1.0);
    assert_eq!(report.split_sizes, [144, 18, 18]);
    let diag: usize = (0..3).map(|c| report.test.confusion[c][c]).sum();
    assert_eq!(diag, report.test.total);
    assert_eq!(model.arch.classes, GestureLabel::CLASSES);
}

#[test]
fn permuted_labels_sit_at_chance() {
    let mut data = separable(1000, 10, 2);
    data.labels.shuffle(&mut ChaCha8Rng::seed_from_u64(2));
    let (_, report) = train(&data, &quick(3, 100)).unwrap();
    let acc = report.test.accuracy;
    assert!((acc - 1.0 / 3.0).abs() <= 0.1, "{acc}");
}

#[test]
fn equal_seeds_give_equal_models() {
    let data = separable(20, 10, 4);
    let (a, ra) = train(&data, &quick(11, 20)).unwrap();
    let (b, rb) = train(&data, &quick(11, 20)).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    let (c, _) = train(&data, &quick(12, 20)).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn parallel_batches_match_serial() {
    let data = separable(40, 10, 5);
    let (a, ra) = train(&data, &quick(1, 15)).unwrap();
    let (b, rb) = train(&data, &TrainConfig { parallel: true, ..quick(1, 15) }).unwrap();
    for (x, y) in ra.train_loss.iter().zip(&rb.train_loss) {
        assert!((x - y).abs() <= 1e-6);
    }
    assert_eq!(a.params, b.params);
    assert!(rb.deterministic);
}

#[test]
fn scheduled_training_loss_never_rises() {
    let data = separable(30, 10, 6);
    let (_, r) = train(&data, &TrainConfig { learning_rate: 0.05, ..quick(2, 60) }).unwrap();
    assert!(r.train_loss.windows(2).all(|w| w[1] <= w[0]));
    for &e in &r.rollbacks {
        if e + 1 < r.learning_rate.len() {
            assert_eq!(r.learning_rate[e + 1], r.learning_rate[e] / 2.0);
        }
    }
}

#[test]
fn too_few_samples_per_class_is_rejected() {
    let mut data = separable(20, 10, 1);
    data.inputs.truncate(49);
    data.labels.truncate(49);
    assert!(train(&data, &quick(0, 1)).is_err());
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let data = separable(3, 10, 8);
    let data = InMemory::new(data.inputs[..8].to_vec(), data.labels[..8].to_vec()).unwrap();
    let net = m1_network(10);
    let params = net.init_params(&mut ChaCha8Rng::seed_from_u64(8));
    let fine = gradient_check(&net, &params, &data, 1e-5, usize::MAX).unwrap();
    assert!(fine < 1e-4, "{fine}");
    let coarse = gradient_check(&net, &params, &data, 1e-3, usize::MAX).unwrap();
    assert!(fine < coarse, "{fine} vs {coarse}");
}

#[test]
fn m2_gradients_match_finite_differences() {
    let net = m2_network(12, 14).unwrap();
    let mut g = ChaCha8Rng::seed_from_u64(9);
    let params = net.init_params(&mut g);
    let inputs = (0..4).map(|_| (0..net.input_len()).map(|_| g.random_range(-1.0..1.0)).collect()).collect();
    let data = InMemory::new(inputs, vec![0, 1, 2, 1]).unwrap();
    let dev = gradient_check(&net, &params, &data, 1e-5, 400).unwrap();
    assert!(dev < 1e-4, "{dev}");
}

#[test]
fn zero_network_has_zero_hidden_gradient() {
    // All weights zero: every hidden activation is zero, so only the output
    // bias receives gradient, and the finite-difference check agrees.
    let net = m1_network(10);
    let params = vec![0.0; net.param_count()];
    let data = InMemory::new(vec![vec![0.0; 10]; 3], vec![0, 1, 2]).unwrap();
    let tr = net.forward(&params, &data.inputs[0]).unwrap();
    let (_, d) = cross_entropy(tr.logits(), 0);
    let mut grad = vec![0.0; params.len()];
    net.backward(&params, &tr, &d, &mut grad);
    let ranges = net.param_ranges();
    let (out_bias_start, _, _) = *ranges.last().unwrap();
    assert!(grad[..out_bias_start].iter().all(|&v| v == 0.0));
    assert!(gradient_check(&net, &params, &data, 1e-5, usize::MAX).unwrap() < 1e-4);
}

fn fixed_model(kind: ModelKind, params: Vec<f64>, net: Network) -> Model {
    Model {
        arch: Architecture {
            kind,
            network: net,
            classes: GestureLabel::CLASSES.to_vec(),
            standardization: None,
            design_frequency_hz: None,
            training_seed: 0,
        },
        params,
    }
}

#[test]
fn constant_and_perfect_predictors() {
    let data = InMemory::new(
        (0..12).map(|i| { let mut x = vec![0.0; 3]; x[i % 3] = 1.0; x }).collect(),
        (0..12).map(|i| i % 3).collect(),
    )
    .unwrap();
    let idx: Vec<usize> = (0..10).collect();
    let net = Network::new([3, 1, 1], vec![LayerSpec::Dense { inputs: 3, outputs: 3 }]).unwrap();
    // Output bias favours class 1, weights zero.
    let mut constant = vec![0.0; net.param_count()];
    let (bias, _, _) = net.param_ranges()[1];
    constant[bias + 1] = 1.0;
    let r = evaluate(&fixed_model(ModelKind::M1, constant, net.clone()), &data, &idx).unwrap();
    for t in 0..3 {
        for p in [0, 2] {
            assert_eq!(r.confusion[t][p], 0);
        }
    }
    assert_eq!(r.accuracy, 3.0 / 10.0);
    // Identity weights predict the hot coordinate.
    let mut identity = vec![0.0; net.param_count()];
    let (w, _, _) = net.param_ranges()[0];
    for c in 0..3 {
        identity[w + c * 3 + c] = 1.0;
    }
    let r = evaluate(&fixed_model(ModelKind::M1, identity, net), &data, &idx).unwrap();
    assert_eq!(r.accuracy, 1.0);
    assert_eq!(r.confusion, vec![vec![4, 0, 0], vec![0, 3, 0], vec![0, 0, 3]]);
    assert_eq!(r.recall, vec![1.0; 3]);
    assert!(evaluate(&fixed_model(ModelKind::M1, vec![0.0; 12], Network::new([3, 1, 1], vec![LayerSpec::Dense { inputs: 3, outputs: 3 }]).unwrap()), &data, &[]).is_err());
}

#[test]
fn model_files_round_trip() {
    let data = separable(15, 10, 3);
    let (m, _) = train(&data, &quick(5, 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.bin");
    save_model(&p, &m).unwrap();
    assert_eq!(&std::fs::read(&p).unwrap()[..4], MODEL_MAGIC);
    assert_eq!(load_model(&p).unwrap(), m);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_stratified(counts in prop::collection::vec(10usize..60, 3), seed in any::<u64>()) {
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
        let s = stratified_split(&labels, 3, 0.8, 0.1, seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for (c, &n) in counts.iter().enumerate() {
            for (part, frac) in [(&s.train, 0.8), (&s.val, 0.1), (&s.test, 0.1)] {
                let got = part.iter().filter(|&&i| labels[i] == c).count() as f64;
                prop_assert!((got - n as f64 * frac).abs() <= 1.0 + 1e-9);
            }
        }
    }
}
