//! Randomized invariants over graph partitioning, serialization, and batching.

use augraph_core::graph::{batch_graphs, make_benchmark, partition_graph, BenchmarkSpec, Label};
use augraph_core::io::{load_graph, save_graph};
use augraph_core::Rng;
use proptest::prelude::*;

fn arb_graph() -> impl Strategy<Value = augraph_core::graph::Graph> {
    (
        0u64..1000,
        20usize..200,
        2usize..12,
        1u32..100, // outlier_frac in (0.01, 0.5)
        0u32..4,
        any::<bool>(),
    )
        .prop_map(|(seed, n, d, frac, num_types, timed)| {
            let mut rng = Rng::new(seed);
            make_benchmark(
                &mut rng,
                BenchmarkSpec {
                    n,
                    d,
                    outlier_frac: 0.01 + frac as f64 * 0.0049,
                    cohesion: 1.0,
                    num_edge_types: num_types,
                    with_time: timed,
                },
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partitions_cover_every_node_exactly_once(g in arb_graph(), b in 2usize..64) {
        let p = partition_graph(&g, b);
        prop_assert_eq!(p.assignment.len(), g.n);
        let mut seen = vec![false; g.n];
        for pid in 0..p.num_partitions {
            let members = p.members(pid);
            prop_assert!(!members.is_empty(), "partition {} is empty", pid);
            for i in members {
                prop_assert!(!seen[i], "node {} assigned twice", i);
                seen[i] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s), "some node is unassigned");
    }

    #[test]
    fn graph_save_load_round_trips(g in arb_graph()) {
        let dir = tempfile::tempdir().unwrap();
        save_graph(&g, dir.path()).unwrap();
        let back = load_graph(dir.path()).unwrap();
        prop_assert_eq!(back.n, g.n);
        prop_assert_eq!(back.d, g.d);
        prop_assert_eq!(back.features, g.features);
        prop_assert_eq!(back.labels, g.labels);
        prop_assert_eq!(back.edges, g.edges);
        prop_assert_eq!(back.edge_time, g.edge_time);
        prop_assert_eq!(back.edge_type, g.edge_type);
        prop_assert_eq!(back.num_edge_types, g.num_edge_types);
        prop_assert_eq!(back.train_mask, g.train_mask);
        prop_assert_eq!(back.val_mask, g.val_mask);
        prop_assert_eq!(back.test_mask, g.test_mask);
    }

    #[test]
    fn batching_preserves_real_nodes_bit_exactly(g in arb_graph(), synth_seed in 0u64..100) {
        let mut rng = Rng::new(synth_seed);
        let mut synth = make_benchmark(
            &mut rng,
            BenchmarkSpec {
                n: 30,
                d: g.d,
                outlier_frac: 0.4,
                cohesion: 1.0,
                num_edge_types: g.num_edge_types,
                with_time: g.has_time(),
            },
        )
        .unwrap();
        // batching expects synthetic graphs to carry outliers only
        synth.labels = vec![Label::Outlier; synth.n];
        synth.train_mask = vec![true; synth.n];
        synth.val_mask = vec![false; synth.n];
        synth.test_mask = vec![false; synth.n];
        let merged = batch_graphs(&g, &synth).unwrap();
        prop_assert_eq!(merged.n, g.n + synth.n);
        prop_assert_eq!(&merged.features[..g.n * g.d], &g.features[..]);
        prop_assert_eq!(&merged.labels[..g.n], &g.labels[..]);
        prop_assert_eq!(&merged.edges[..g.edges.len()], &g.edges[..]);
        prop_assert_eq!(&merged.train_mask[..g.n], &g.train_mask[..]);
        prop_assert_eq!(&merged.val_mask[..g.n], &g.val_mask[..]);
        prop_assert_eq!(&merged.test_mask[..g.n], &g.test_mask[..]);
        for i in g.n..merged.n {
            prop_assert_eq!(merged.labels[i], Label::Outlier);
            prop_assert!(merged.train_mask[i]);
        }
        merged.validate().unwrap();
    }
}
