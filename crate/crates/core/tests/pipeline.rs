use channel_chart::io::{read_dataset, write_dataset};
use channel_chart::synth::preset_quadriga_like;
use channel_chart::{
    build_distance_matrix, chart_channels, exec, generate_scenario, geodesic_distances, knn_graph,
    quality_curves, ChannelDataset, ChannelVector, ChartParams, Measure, ScenarioConfig,
};
use num_complex::Complex64;

fn small_scenario(seed: u64) -> ScenarioConfig {
    let mut cfg = preset_quadriga_like();
    cfg.user_count = 150;
    cfg.rng_seed = seed;
    cfg
}

#[test]
fn phase_rotated_copies_collapse_to_one_point() {
    let base = ChannelVector::from_antennas(vec![
        Complex64::new(1.0, 0.5),
        Complex64::new(-0.3, 0.8),
        Complex64::new(0.2, -1.1),
    ])
    .unwrap();
    let channels = [0.0, 1.3, -2.9]
        .iter()
        .map(|&t| base.scaled(Complex64::from_polar(1.0, t)))
        .collect();
    let ds = ChannelDataset::new(channels, None, vec![1e9], "").unwrap();
    let params = ChartParams { k: 2, ..ChartParams::default() };
    let result = chart_channels(&ds, &params).unwrap();
    for row in result.chart.points().rows() {
        assert!(row.iter().all(|z| z.abs() < 1e-6), "{row:?}");
    }
}

#[test]
fn sequential_and_parallel_runs_agree_bitwise() {
    let ds = generate_scenario(&small_scenario(21)).unwrap();
    let params = ChartParams { k: 10, ..ChartParams::default() };
    let par = chart_channels(&ds, &params).unwrap();
    let seq = exec::sequential(|| chart_channels(&ds, &params)).unwrap();
    assert_eq!(par, seq);

    let seq_ds = exec::sequential(|| generate_scenario(&small_scenario(21))).unwrap();
    assert_eq!(ds, seq_ds);

    let pos = ds.positions().unwrap();
    let ks = [5, 10, 20];
    let par_q = quality_curves(pos, par.chart.points(), &ks).unwrap();
    let seq_q = exec::sequential(|| quality_curves(pos, seq.chart.points(), &ks)).unwrap();
    assert_eq!(par_q, seq_q);
}

#[test]
fn dataset_round_trips_through_binary_format() {
    let ds = generate_scenario(&small_scenario(5)).unwrap();
    let mut buf = Vec::new();
    let written = write_dataset(&ds, &mut buf).unwrap();
    assert_eq!(written as usize, buf.len());
    let back = read_dataset(buf.as_slice()).unwrap();
    assert_eq!(back.channels(), ds.channels());
    assert_eq!(back.positions(), ds.positions());
    assert_eq!(back.frequency_grid(), ds.frequency_grid());

    // the chart depends only on what was persisted
    let params = ChartParams { k: 10, ..ChartParams::default() };
    assert_eq!(chart_channels(&back, &params).unwrap(), chart_channels(&ds, &params).unwrap());
}

#[test]
fn stages_compose_like_the_driver() {
    let ds = generate_scenario(&small_scenario(9)).unwrap();
    let d = build_distance_matrix(&ds, Measure::PhaseInsensitive).unwrap();
    let graph = knn_graph(&d, 10).unwrap();
    for i in 0..d.size() {
        assert!(graph.neighbors(i).len() >= 10);
    }
    let g = geodesic_distances(&graph).unwrap();
    // shortest paths never undercut the direct dissimilarity
    for i in 0..d.size() {
        for j in 0..d.size() {
            assert!(g.get(i, j) >= d.get(i, j) * (1.0 - 1e-12), "{i} {j}");
        }
    }
}

#[test]
fn chart_quality_beats_chance_on_a_synthetic_scene() {
    let ds = generate_scenario(&small_scenario(3)).unwrap();
    let params = ChartParams { k: 10, ..ChartParams::default() };
    let chart = chart_channels(&ds, &params).unwrap().chart;
    let (ct, tw) = quality_curves(ds.positions().unwrap(), chart.points(), &[10]).unwrap();
    assert!(ct.scores[0] > 0.6, "CT {}", ct.scores[0]);
    assert!(tw.scores[0] > 0.6, "TW {}", tw.scores[0]);
}
