//! Public-API runs across module boundaries.

use proptest::prelude::*;

use slade_core::datasets::checkpoint::{load_checkpoint, save_checkpoint};
use slade_core::datasets::inject::{inject_anomalies, InjectionConfig, InjectionMode};
use slade_core::datasets::synth::generate_normal_stream;
use slade_core::datasets::{load_edges, load_tags, save_edges, save_tags};
use slade_core::score::{new_memory, score_test_split, stream_inference, InferenceConfig};
use slade_core::{train, EdgeStream, MetricReport, ModelConfig, RunConfig, Slade, TemporalEdge, TypeTag};

fn small_run_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    for (k, v) in [
        ("memory_dim", "8"),
        ("message_dim", "4"),
        ("time_dim", "4"),
        ("neighbors", "5"),
        ("batch_size", "50"),
        ("lr", "0.001"),
        ("epochs", "2"),
        ("seed", "3"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg
}

fn injected_stream() -> (EdgeStream, Vec<TypeTag>) {
    let base = generate_normal_stream(60, 3000, 4, 3).unwrap();
    let mut inj = InjectionConfig::new(InjectionMode::Hijack, 3);
    inj.n_anomalous_nodes = 3;
    let out = inject_anomalies(&base, &inj).unwrap();
    (out.stream, out.tags)
}

#[test]
fn edges_and_tags_survive_files() {
    let dir = tempfile::tempdir().unwrap();
    let (stream, tags) = injected_stream();
    let edges = dir.path().join("d.csv");
    let tag_file = dir.path().join("d.tags.csv");
    save_edges(&stream, &edges).unwrap();
    save_tags(&tags, &tag_file).unwrap();
    assert_eq!(load_edges(&edges).unwrap().edges, stream.edges);
    assert_eq!(load_tags(&tag_file).unwrap(), tags);
}

#[test]
fn restored_checkpoint_scores_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_run_config();
    let (stream, _) = injected_stream();
    let (train_part, _, _) = stream.chronological_split(cfg.split).unwrap();
    let mut model = Slade::new(cfg.model.clone(), cfg.seed).unwrap();
    let report = train(&mut model, &train_part, &cfg.train).unwrap();
    assert_eq!(report.epoch_means().len(), 2);

    let path = dir.path().join("m.ckpt");
    save_checkpoint(&path, &cfg, &model, None).unwrap();
    let restored = load_checkpoint(&path).unwrap();
    assert_eq!(restored.config.to_text(), cfg.to_text());

    let a = score_test_split(&model, &stream, cfg.split, &cfg.inference).unwrap();
    let b = score_test_split(&restored.model, &stream, cfg.split, &cfg.inference).unwrap();
    assert_eq!(a, b);
    let metrics = MetricReport::from_records(&a).unwrap();
    assert!(metrics.n_pos > 0 && metrics.n_neg > 0);
    assert!((0.0..=1.0).contains(&metrics.auc));
}

#[test]
fn config_text_round_trips() {
    let cfg = small_run_config();
    let back = RunConfig::parse_text(&cfg.to_text()).unwrap();
    assert_eq!(back.to_text(), cfg.to_text());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scores_stay_in_unit_interval(
        pairs in prop::collection::vec((0usize..12, 0usize..12, 0.0f64..500.0), 1..60),
        seed in 0u64..1000,
        batch in 1usize..8,
    ) {
        let mut t = 0.0;
        let edges: Vec<TemporalEdge> = pairs
            .into_iter()
            .filter(|(a, b, _)| a != b)
            .map(|(a, b, gap)| {
                t += gap;
                TemporalEdge::new(a, b, t)
            })
            .collect();
        let stream = EdgeStream::from_edges(edges);
        let cfg = ModelConfig { memory_dim: 6, message_dim: 4, time_dim: 4, neighbors: 3, ..ModelConfig::default() };
        let model = Slade::new(cfg, seed).unwrap();
        let mut memory = new_memory(&model);
        let inference = InferenceConfig { batch_size: batch, score_destinations: true };
        let records = stream_inference(&model, &mut memory, &stream.edges, 0, &inference).unwrap();
        prop_assert_eq!(records.len(), 2 * stream.len());
        for r in records {
            prop_assert!((0.0..=1.0).contains(&r.sc));
            prop_assert!((0.0..=2.0).contains(&r.sc_c) && (0.0..=2.0).contains(&r.sc_g));
        }
    }
}
