mod common;

use ndarray::Array2;
use proptest::prelude::*;

use pressure_embed::affinity::{
    build_affinities, conditional_probabilities, AffinityConfig, BandwidthMode, RepulsionWeights,
};
use pressure_embed::data_io::{
    generate_rings, generate_swissroll, load_delimited, load_embedding, load_report, load_trace,
    save_dataset, save_embedding, save_report, save_trace, RingsConfig,
};
use pressure_embed::{pairwise_sqdist, Dataset, Embedding, MethodTag, PressureReport, TraceRecord};

use common::*;

#[test]
fn noiseless_swissroll_has_full_rank_but_no_more() {
    let data = generate_swissroll(1000, 0.0, 1).unwrap();
    let mean = data.points.mean_axis(ndarray::Axis(0)).unwrap();
    let centered = &data.points - &mean;
    let m = nalgebra::DMatrix::from_fn(1000, 3, |i, j| centered[[i, j]]);
    let sv = m.svd(false, false).singular_values;
    assert_eq!(sv.len(), 3);
    assert!(sv.iter().all(|&s| s > 1e-6 * sv[0]));
}

#[test]
fn perplexity_rows_recomputed_independently() {
    let mut r = rng(21);
    let pts = random_coords(10, 4, 2.0, &mut r);
    let sq = pairwise_sqdist(pts.view()).unwrap();
    let (p, _) = conditional_probabilities(&sq, 5.0).unwrap();
    for (i, row) in p.rows().into_iter().enumerate() {
        assert_eq!(row[i], 0.0);
        assert!((row.sum() - 1.0).abs() <= 1e-12);
        let h: f64 = row.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
        assert!(
            (h.exp() - 5.0).abs() <= 1e-3,
            "row {i}: perplexity {}",
            h.exp()
        );
    }
}

#[test]
fn degrees_are_row_sums() {
    let data = generate_rings(
        &RingsConfig {
            n_objects: 2,
            points_per_ring: 15,
            ..RingsConfig::default()
        },
        5,
    )
    .unwrap();
    let cfg = AffinityConfig {
        mode: BandwidthMode::Perplexity(8.0),
        lambda: 1.0,
        w_minus_mode: RepulsionWeights::Sqdist,
    };
    let g = build_affinities(&data, &cfg).unwrap();
    for (k, row) in g.w_plus().rows().into_iter().enumerate() {
        assert!((row.sum() - g.d_plus()[k]).abs() <= 1e-12 * g.d_plus()[k]);
    }
    assert!((g.w_plus().sum() - 1.0).abs() <= 1e-12);
}

#[test]
fn generated_rings_shape() {
    let data = generate_rings(&RingsConfig::default(), 0).unwrap();
    assert_eq!(data.n(), 720);
    assert_eq!(data.dim(), 3);
    let labels = data.labels.as_ref().unwrap();
    for c in 0..10 {
        assert_eq!(labels.iter().filter(|&&l| l == c).count(), 72);
    }
}

#[test]
fn report_and_trace_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let report =
        PressureReport::from_values(MethodTag::Sne, vec![0.0, 0.1 + 0.2, 1.0 / 3.0, 0.0], vec![]);
    save_report(dir.path().join("r.jsonl"), &report).unwrap();
    let back = load_report(dir.path().join("r.jsonl")).unwrap();
    assert_eq!(back.pressure, report.pressure);
    assert_eq!(back.pressured_set, report.pressured_set);

    let trace: Vec<TraceRecord> = (0..4)
        .map(|i| TraceRecord {
            iter: i,
            objective: 1.0 / (i as f64 + 3.0),
            start_objective: 1.0 / (i as f64 + 2.0),
            base_objective: std::f64::consts::PI * i as f64,
            step: 0.8f64.powi(i as i32),
            pressured_fraction: 0.25 * i as f64,
            mu: 0.1 * i as f64,
        })
        .collect();
    save_trace(dir.path().join("t.jsonl"), &trace).unwrap();
    assert_eq!(load_trace(dir.path().join("t.jsonl")).unwrap(), trace);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn delimited_round_trip_is_lossless(
        values in proptest::collection::vec(-1e300..1e300f64, 12),
        labels in proptest::collection::vec(-5i64..5, 4),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let pts = Array2::from_shape_vec((4, 3), values).unwrap();
        let data = Dataset::new(pts.clone(), Some(labels.clone())).unwrap();
        let path = dir.path().join("d.csv");
        save_dataset(&path, &data, b';').unwrap();
        let back = load_delimited(&path, b';', true).unwrap();
        prop_assert_eq!(&back.points, &pts);
        prop_assert_eq!(back.labels, Some(labels));

        let e = Embedding::new(pts.clone()).unwrap();
        save_embedding(dir.path().join("e.csv"), &e).unwrap();
        let back = load_embedding(dir.path().join("e.csv"), b',').unwrap();
        prop_assert_eq!(back.coords(), &pts);
    }

    #[test]
    fn sqdist_is_translation_invariant(seed in 0u64..10_000, shift in proptest::collection::vec(-10.0..10.0f64, 3)) {
        let mut r = rng(seed);
        let pts = random_coords(6, 3, 2.0, &mut r);
        let moved = &pts + &ndarray::Array1::from(shift);
        let a = pairwise_sqdist(pts.view()).unwrap();
        let b = pairwise_sqdist(moved.view()).unwrap();
        prop_assert!((&a - &b).iter().all(|d| d.abs() <= 1e-9));
    }

    #[test]
    fn generators_are_functions_of_the_seed(seed in 0u64..1_000) {
        prop_assert_eq!(generate_swissroll(50, 0.1, seed).unwrap().points, generate_swissroll(50, 0.1, seed).unwrap().points);
        let cfg = RingsConfig { n_objects: 3, points_per_ring: 10, ..RingsConfig::default() };
        prop_assert_eq!(generate_rings(&cfg, seed).unwrap().points, generate_rings(&cfg, seed).unwrap().points);
    }
}
