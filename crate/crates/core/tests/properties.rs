//! Invariants as property tests.


use std::sync::Arc;

use pcnsim::analysis::{closeness_centrality, eigenvector_centrality};
use pcnsim::{
    betweenness_centrality, degree_vector, load_snapshot, normalize_allocations, select_nodes,
    simulate_step, Action, ChannelGraph, Env, EnvConfig, FlowConfig, HeuristicKind,
};
use pcnsim::{scale_free_graph, SyntheticConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn history() -> impl Strategy<Value = Vec<Action>> {
    prop::collection::vec((0usize..200, 1u32..=10).prop_map(|(node, bucket)| Action { node, bucket }), 1..40)
}

fn relabel(g: &ChannelGraph, perm: &[usize]) -> ChannelGraph {
    // node i of `g` becomes node perm[i]
    let mut inverse = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inverse[p] = i;
    }
    let mut out = ChannelGraph::new();
    for &old in &inverse {
        let n = g.node(old);
        out.add_node(n.node_id.clone(), n.is_provider).unwrap();
    }
    for c in 0..g.channel_count() {
        let (ab, ba) = g.channel_edges(c);
        let (e, f) = (g.edge(ab), g.edge(ba));
        out.add_channel(perm[e.src], perm[e.dst], e.balance, f.balance, e.policy(), f.policy())
            .unwrap();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn budget_is_conserved(h in history(), budget in 1u64..=20_000_000_000) {
        let alloc = normalize_allocations(&h, budget);
        prop_assert_eq!(alloc.values().sum::<u64>(), budget);
        // every node gets its floored share, plus the residual for the last one
        let total: u64 = h.iter().map(|a| a.bucket as u64).sum();
        for (&node, &c) in &alloc {
            let share: u128 = h.iter().filter(|a| a.node == node).map(|a| a.bucket as u128 * budget as u128 / total as u128).sum();
            let exact = h.iter().filter(|a| a.node == node).map(|a| a.bucket as f64).sum::<f64>() / total as f64 * budget as f64;
            prop_assert!(c as u128 >= share);
            prop_assert!((c as f64 - exact).abs() <= h.len() as f64 + 1.0 + exact * 1e-12);
        }
    }

    #[test]
    fn scaling_buckets_changes_nothing(h in history(), factor in 1u32..50) {
        let scaled: Vec<Action> = h.iter().map(|a| Action { node: a.node, bucket: a.bucket * factor }).collect();
        prop_assert_eq!(normalize_allocations(&h, 10_000_000_000), normalize_allocations(&scaled, 10_000_000_000));
    }

    #[test]
    fn traffic_conserves_capacity(seed in any::<u64>(), n in 2usize..12, bias in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = oracles::random_graph(&mut rng, n, 50_000_000);
        let caps: Vec<u64> = g.channels().iter().map(|c| c.capacity).collect();
        let cfg = FlowConfig { count_per_tier: 30, provider_bias: bias, ..Default::default() };
        let flow = simulate_step(&mut g, &cfg, None, &mut rng);
        prop_assert_eq!(flow.succeeded + flow.failed, 90);
        for (c, &cap) in caps.iter().enumerate() {
            let (ab, ba) = g.channel_edges(c);
            prop_assert_eq!(g.edge(ab).balance + g.edge(ba).balance, cap);
        }
        g.check_invariants().map_err(TestCaseError::fail)?;
        // forwarded volume is inbound flow minus what the node received as payee
        for v in 0..n {
            let inbound: u64 = (0..g.edge_count()).filter(|&e| g.edge(e).dst == v).map(|e| flow.edge_flows[e].iter().sum::<u64>()).sum();
            let received: u64 = flow.log.iter().filter(|t| t.success && t.tx.receiver == v).map(|t| t.tx.amount).sum();
            prop_assert_eq!(flow.node_volume[v], inbound - received);
        }
    }

    #[test]
    fn centralities_are_permutation_equivariant(seed in any::<u64>(), n in 1usize..14) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = oracles::random_simple_graph(&mut rng, n, 0.35);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let h = relabel(&g, &perm);
        let pairs: [(Vec<f64>, Vec<f64>, f64); 4] = [
            (degree_vector(&g), degree_vector(&h), 0.0),
            (betweenness_centrality(&g), betweenness_centrality(&h), 1e-12),
            (closeness_centrality(&g), closeness_centrality(&h), 1e-12),
            (eigenvector_centrality(&g).unwrap(), eigenvector_centrality(&h).unwrap(), 1e-6),
        ];
        for (a, b, tol) in pairs {
            for i in 0..n {
                prop_assert!((a[i] - b[perm[i]]).abs() <= tol, "{:?} {:?}", a, b);
            }
        }
    }

    #[test]
    fn snapshot_round_trip_is_identity(seed in any::<u64>(), n in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = oracles::random_graph(&mut rng, n, 10_000_000);
        let text = pcnsim::snapshot::snapshot_to_string(&g);
        let back = load_snapshot(text.as_bytes()).unwrap();
        prop_assert_eq!(&pcnsim::snapshot::snapshot_to_string(&back), &text);
        let mut a: Vec<_> = g.edges().iter().map(|e| (g.node(e.src).node_id.clone(), g.node(e.dst).node_id.clone(), e.balance, e.base_fee, e.fee_rate.to_bits())).collect();
        let mut b: Vec<_> = back.edges().iter().map(|e| (back.node(e.src).node_id.clone(), back.node(e.dst).node_id.clone(), e.balance, e.base_fee, e.fee_rate.to_bits())).collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn heuristic_picks_are_distinct(seed in any::<u64>(), n in 3usize..20, k in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = oracles::random_simple_graph(&mut rng, n, 0.3);
        let k = k.min(n);
        for kind in HeuristicKind::ALL {
            let mut picks = select_nodes(&g, kind, k, &mut rng).unwrap();
            prop_assert_eq!(picks.len(), k);
            picks.sort_unstable();
            picks.dedup();
            prop_assert_eq!(picks.len(), k);
        }
        let metric = degree_vector(&g);
        let mut distinct = metric.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if 2 * k <= distinct.len() {
            let top = select_nodes(&g, HeuristicKind::TopKDegree, k, &mut rng).unwrap();
            let bottom = select_nodes(&g, HeuristicKind::BottomKDegree, k, &mut rng).unwrap();
            prop_assert!(top.iter().all(|t| !bottom.contains(t)));
        }
    }
}

fn env_snapshot() -> Arc<ChannelGraph> {
    Arc::new(
        scale_free_graph(&SyntheticConfig {
            nodes: 300,
            seed: 21,
            ..Default::default()
        })
        .unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn episodes_respect_env_invariants(seed in any::<u64>(), picks in prop::collection::vec((0usize..20, 1u32..=10), 4)) {
        let mut cfg = EnvConfig::setting(20, 4);
        cfg.flow.count_per_tier = 25;
        let mut env = Env::new(env_snapshot(), cfg.clone()).unwrap();
        let first = env.reset(seed).unwrap();
        prop_assert!(first.column(3).all(|a| a == 0.0));
        let mut replica = Env::new(env_snapshot(), cfg.clone()).unwrap();
        prop_assert_eq!(&replica.reset(seed).unwrap(), &first);
        for (t, &(node, bucket)) in picks.iter().enumerate() {
            let out = env.step(Action { node, bucket }).unwrap();
            prop_assert_eq!(&replica.step(Action { node, bucket }).unwrap(), &out);
            prop_assert!(out.reward >= 0.0);
            prop_assert_eq!(out.done, t + 1 == picks.len());
            prop_assert_eq!(out.observation.rows, 20);
            for (i, &v) in out.observation.data.iter().enumerate() {
                prop_assert!((0.0..=1.0).contains(&v));
                if i % 4 == 1 {
                    prop_assert!(v == 0.0 || v == 1.0);
                }
            }
            let agent = env.agent().unwrap();
            let graph = env.graph().unwrap();
            let funded: u64 = graph.out_edges(agent).iter().map(|&e| graph.channel(graph.edge(e).channel).capacity / 2).sum();
            prop_assert_eq!(funded, cfg.budget_msat);
            if out.info.revenue_msat == 0 {
                prop_assert_eq!(out.reward, 0.0);
            }
        }
    }
}
