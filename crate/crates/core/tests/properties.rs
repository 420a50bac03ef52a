use proptest::prelude::*;

use spectramut_core::cluster::{Dendrogram, SAMPLING_RATES};
use spectramut_core::metrics::{average_ranks, spearman_rho};
use spectramut_core::model::{argmax, Activation, Classifier, DataPoint, DenseLayer, FcnnClassifier, LabeledDataset};
use spectramut_core::mutation::MutantId;
use spectramut_core::spectral::{
    dft_magnitude, mutant_distance, stratified_sample, FeatureKind, MutantFeatures, SampleSet, SimilarityGraph,
    SpectraSet,
};

fn naive(series: &[f64]) -> Vec<f64> {
    let n = series.len() as f64;
    (0..series.len())
        .map(|k| {
            let (re, im) = series.iter().enumerate().fold((0.0, 0.0), |(re, im), (j, v)| {
                let a = -2.0 * std::f64::consts::PI * (k * j) as f64 / n;
                (re + v * a.cos(), im + v * a.sin())
            });
            f64::hypot(re, im)
        })
        .collect()
}

fn spectra(q: usize, n: usize, vectors: Vec<Vec<f64>>) -> SpectraSet {
    let sample = SampleSet { indices: (0..n).collect(), per_class: n, seed: 0, saturated_classes: Vec::new() };
    let entries =
        vectors.into_iter().enumerate().map(|(i, v)| (MutantId(i as u32), MutantFeatures::Ready(v))).collect();
    SpectraSet::from_entries(FeatureKind::Spectral, sample, q, entries).unwrap()
}

fn graph_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (2usize..10).prop_flat_map(|n| (Just(n), prop::collection::vec(0.001f64..=1.0, n * (n - 1) / 2)))
}

fn graph(n: usize, weights: &[f64]) -> SimilarityGraph {
    let mut it = weights.iter();
    SimilarityGraph::from_fn((0..n as u32).map(MutantId).collect(), |_, _| *it.next().unwrap()).unwrap()
}

proptest! {
    #[test]
    fn dft_matches_definition(series in prop::collection::vec(-10.0f64..10.0, 1..96)) {
        let fast = dft_magnitude(&series).unwrap();
        let slow = naive(&series);
        let scale = slow.iter().cloned().fold(1e-12, f64::max);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() / scale < 1e-9);
        }
    }

    #[test]
    fn parseval_holds(series in prop::collection::vec(-10.0f64..10.0, 1..300)) {
        let mag = dft_magnitude(&series).unwrap();
        let time: f64 = series.iter().map(|v| v * v).sum();
        let freq = mag.iter().map(|v| v * v).sum::<f64>() / series.len() as f64;
        prop_assert!((time - freq).abs() <= 1e-9 * time.max(1.0));
    }

    #[test]
    fn magnitudes_ignore_cyclic_shift(series in prop::collection::vec(-5.0f64..5.0, 2..64), shift in 0usize..64) {
        let mut rotated = series.clone();
        let len = rotated.len();
        rotated.rotate_left(shift % len);
        let a = dft_magnitude(&series).unwrap();
        let b = dft_magnitude(&rotated).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn distance_is_a_pseudometric(
        (q, n, vs) in (1usize..4, 1usize..20).prop_flat_map(|(q, n)| {
            (Just(q), Just(n), prop::collection::vec(prop::collection::vec(0.0f64..5.0, q * n), 3))
        })
    ) {
        let set = spectra(q, n, vs);
        let id = MutantId;
        let d = |a: u32, b: u32| mutant_distance(id(a), id(b), &set).unwrap();
        for a in 0..3 {
            prop_assert_eq!(d(a, a), 0.0);
            for b in 0..3 {
                prop_assert!(d(a, b) >= 0.0);
                prop_assert_eq!(d(a, b), d(b, a));
                for c in 0..3 {
                    prop_assert!(d(a, c) <= d(a, b) + d(b, c) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn cuts_partition_and_coarsen((n, weights) in graph_strategy(), t1 in 0.01f64..0.99, t2 in 0.01f64..0.99) {
        let dendrogram = Dendrogram::build(&graph(n, &weights));
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let coarse = dendrogram.cut(lo);
        let fine = dendrogram.cut(hi);
        prop_assert!(coarse.len() <= fine.len());
        prop_assert_eq!(dendrogram.cluster_count_at(hi), fine.len());
        let mut members: Vec<MutantId> = fine.clusters.iter().flatten().copied().collect();
        members.sort();
        prop_assert_eq!(members, (0..n as u32).map(MutantId).collect::<Vec<_>>());
        // Every fine cluster sits inside exactly one coarse cluster.
        for f in &fine.clusters {
            prop_assert!(coarse.clusters.iter().any(|c| f.iter().all(|m| c.contains(m))));
        }
    }

    #[test]
    fn merge_linkages_never_increase((n, weights) in graph_strategy()) {
        let dendrogram = Dendrogram::build(&graph(n, &weights));
        prop_assert_eq!(dendrogram.merges().len(), n - 1);
        for w in dendrogram.merges().windows(2) {
            prop_assert!(w[1].linkage <= w[0].linkage + 1e-12);
        }
    }

    #[test]
    fn softmax_keeps_logit_argmax(
        weights in prop::collection::vec(-2.0f64..2.0, 12),
        biases in prop::collection::vec(-1.0f64..1.0, 4),
        x in prop::collection::vec(-3.0f64..3.0, 3),
    ) {
        let model = FcnnClassifier::new(vec![
            DenseLayer::new(3, 4, weights, biases, Activation::Softmax).unwrap(),
        ])
        .unwrap();
        let out = model.forward(&x).unwrap();
        let logits = model.logits(&x).unwrap();
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut sorted = logits.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        // Near-ties may flip under rounding.
        prop_assume!(sorted[0] - sorted[1] > 1e-9);
        prop_assert_eq!(argmax(&out), argmax(&logits));
    }

    #[test]
    fn ranks_sum_and_reverse(values in prop::collection::vec(-100i32..100, 2..40)) {
        let xs: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let n = xs.len() as f64;
        let ranks = average_ranks(&xs);
        prop_assert!((ranks.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
        let negated: Vec<f64> = xs.iter().map(|v| -v).collect();
        match spearman_rho(&xs, &negated) {
            Some(r) => prop_assert!((r + 1.0).abs() < 1e-12),
            None => prop_assert!(xs.iter().all(|v| *v == xs[0])),
        }
    }

    #[test]
    fn stratified_sample_shape(sizes in prop::collection::vec(1usize..30, 2..6), pick in 0usize..11, seed in any::<u64>()) {
        let per_class = SAMPLING_RATES[pick];
        let mut points = Vec::new();
        for (label, &count) in sizes.iter().enumerate() {
            for _ in 0..count {
                points.push(DataPoint { features: vec![points.len() as f64], label });
            }
        }
        let ds = LabeledDataset::new(points, 1, sizes.len()).unwrap();
        let s = stratified_sample(&ds, per_class, seed).unwrap();
        prop_assert_eq!(s.len(), sizes.iter().map(|&c| c.min(per_class)).sum::<usize>());
        let keys: Vec<(usize, usize)> = s.indices.iter().map(|&i| (ds.points()[i].label, i)).collect();
        prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(&s, &stratified_sample(&ds, per_class, seed).unwrap());
    }
}
