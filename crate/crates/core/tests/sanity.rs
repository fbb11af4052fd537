mod common;

use common::*;
use proptest::prelude::*;
use scorecam_core::io::encode_model;
use scorecam_core::sanity::{average_ranks, cascading_test, randomize_from, rank_correlation, std_dev};
use scorecam_core::synthetic::{region_instance, tiny_cnn};
use scorecam_core::{Error, Layer, SaliencyMap, ScoreCamConfig, Tensor};

fn weights(layer: &Layer<f32>) -> Option<Vec<f64>> {
    match layer {
        Layer::Conv2d(s) => Some(s.weights.data().iter().map(|&v| v as f64).collect()),
        Layer::Dense(s) => Some(s.weights.data().iter().map(|&v| v as f64).collect()),
        _ => None,
    }
}

fn smap(v: Vec<f64>) -> SaliencyMap<f64> {
    let n = v.len();
    SaliencyMap::from_values(tensor64(&[1, 1, n], v)).unwrap()
}

/// Pearson correlation of ranks computed by counting, not sorting.
fn spearman_oracle(a: &[f64], b: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|x| {
                let less = v.iter().filter(|y| *y < x).count() as f64;
                let equal = v.iter().filter(|y| *y == x).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (ra, rb) = (rank(a), rank(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn randomizing_past_the_end_changes_nothing() {
    let m = tiny_cnn(1);
    assert_eq!(randomize_from(&m, m.layers().len(), 5).unwrap(), m);
    assert!(matches!(
        randomize_from(&m, m.layers().len() + 1, 5),
        Err(Error::LayerOutOfRange { .. })
    ));
}

#[test]
fn same_seed_same_graph() {
    let m = tiny_cnn(1);
    assert_eq!(randomize_from(&m, 0, 9).unwrap(), randomize_from(&m, 0, 9).unwrap());
    assert_ne!(randomize_from(&m, 0, 9).unwrap(), randomize_from(&m, 0, 10).unwrap());
}

#[test]
fn sampled_std_tracks_original() {
    let m = tiny_cnn(1);
    let r = randomize_from(&m, 0, 3).unwrap();
    let mut checked = 0;
    for (a, b) in m.layers().iter().zip(r.layers()) {
        let (Some(wa), Some(wb)) = (weights(a), weights(b)) else {
            continue;
        };
        assert_ne!(wa, wb);
        if wa.len() >= 256 {
            let (sa, sb) = (std_dev(&wa), std_dev(&wb));
            assert!((sb / sa - 1.0).abs() < 0.2, "std {sa} vs {sb}");
            checked += 1;
        }
    }
    assert_eq!(checked, 2);
}

#[test]
fn earlier_layers_and_source_untouched() {
    let m = tiny_cnn(1);
    let before = encode_model(&m);
    let r = randomize_from(&m, 3, 4).unwrap();
    assert_eq!(encode_model(&m), before);
    assert_eq!(r.layers()[0], m.layers()[0]);
    assert_ne!(r.layers()[3], m.layers()[3]);
    assert_ne!(r.layers()[7], m.layers()[7]);
    // Layers randomized by both cascades agree.
    let all = randomize_from(&m, 0, 4).unwrap();
    assert_eq!(all.layers()[3], r.layers()[3]);
    assert_eq!(all.layers()[7], r.layers()[7]);
}

#[test]
fn correlation_examples() {
    let v = uniform(&mut rng(3), 30, 0.0, 1.0);
    let a = smap(v.clone());
    assert_eq!(rank_correlation(&a, &a).unwrap(), 1.0);
    let inv = smap(v.iter().map(|x| 1.0 - x).collect());
    assert!((rank_correlation(&a, &inv).unwrap() + 1.0).abs() < 1e-12);
    let other = SaliencyMap::from_values(tensor64(&[1, 5, 6], v)).unwrap();
    assert!(matches!(rank_correlation(&a, &other), Err(Error::Shape(_))));
}

#[test]
fn correlation_matches_rank_then_pearson() {
    let mut r = rng(88);
    for _ in 0..10 {
        // Quantised values force ties.
        let a: Vec<f64> = uniform(&mut r, 64, 0.0, 1.0)
            .iter()
            .map(|v| (v * 10.0).floor() / 10.0)
            .collect();
        let b = uniform(&mut r, 64, 0.0, 1.0);
        let got = rank_correlation(
            &SaliencyMap::from_values(tensor64(&[1, 8, 8], a.clone())).unwrap(),
            &SaliencyMap::from_values(tensor64(&[1, 8, 8], b.clone())).unwrap(),
        )
        .unwrap();
        assert!((got - spearman_oracle(&a, &b)).abs() < 1e-9);
    }
}

#[test]
fn cascade_structure_and_determinism() {
    let inst = region_instance(2);
    let cfg = ScoreCamConfig::for_class(0);
    let a = cascading_test(&inst.model, &inst.image, &cfg, 6).unwrap();
    let b = cascading_test(&inst.model, &inst.image, &cfg, 6).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.stages[0].similarity, 1.0);
    assert_eq!(a.stages[0].l2_distance, 0.0);
    assert_eq!(a.stages.len(), 1 + inst.model.weighted_layer_indices().len());
    for pair in a.stages.windows(2) {
        assert!(pair[1].randomized_layers.len() == pair[0].randomized_layers.len() + 1);
        assert!(pair[0]
            .randomized_layers
            .iter()
            .all(|l| pair[1].randomized_layers.contains(l)));
        assert!(pair[1].randomized_from < pair[0].randomized_from);
    }
    for s in &a.stages {
        assert!((-1.0..=1.0).contains(&s.similarity));
    }
}

#[test]
fn cascade_on_tiny_cnn_pins_layer_and_class() {
    let m = tiny_cnn(4);
    let x = scorecam_core::synthetic::tiny_image(4, 32);
    let report = cascading_test(&m, &x, &ScoreCamConfig::default(), 1).unwrap();
    assert_eq!(report.layer, 3);
    assert_eq!(report.stages.len(), 4);
    assert_eq!(report.stages.last().unwrap().randomized_layers, vec![0, 3, 7]);
}

proptest! {
    #[test]
    fn ranks_sum_is_triangular(v in prop::collection::vec(0u8..6, 1..30)) {
        let vals: Vec<f64> = v.iter().map(|&b| b as f64).collect();
        let n = vals.len() as f64;
        prop_assert!((average_ranks(&vals).iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn correlation_is_symmetric(a in prop::collection::vec(0.0f64..1.0, 2..40), seed in any::<u64>()) {
        let b = uniform(&mut rng(seed), a.len(), 0.0, 1.0);
        let (x, y) = (smap(a), smap(b));
        let (p, q) = (rank_correlation(&x, &y).unwrap(), rank_correlation(&y, &x).unwrap());
        prop_assert!((p - q).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&p));
    }

    #[test]
    fn correlation_ignores_monotone_transforms(a in prop::collection::vec(0.0f64..1.0, 2..40), seed in any::<u64>()) {
        let b = uniform(&mut rng(seed), a.len(), 0.0, 1.0);
        let base = rank_correlation(&smap(a.clone()), &smap(b.clone())).unwrap();
        let squared = smap(a.iter().map(|v| v * v).collect());
        let rooted = smap(b.iter().map(|v| v.sqrt()).collect());
        prop_assert!((rank_correlation(&squared, &rooted).unwrap() - base).abs() < 1e-12);
    }
}

#[test]
fn constant_maps() {
    let z = smap(vec![0.0; 8]);
    let t = SaliencyMap::from_values(Tensor::from_fn(vec![1, 1, 8], |i| i as f64 / 7.0).unwrap()).unwrap();
    assert_eq!(rank_correlation(&z, &z).unwrap(), 1.0);
    assert_eq!(rank_correlation(&z, &t).unwrap(), 0.0);
}
