//! End-to-end checks on generated snapshots: loading at scale, sampling,
//! full episodes and the evolution experiment.


use std::collections::BTreeSet;
use std::sync::Arc;

use pcnsim::analysis::{evolve_network, heuristic_policy, EvolutionConfig};
use pcnsim::{
    execute_transaction, load_snapshot, run_heuristic, sample_stream, scale_free_graph, Action,
    ChannelGraph, Env, EnvConfig, HeuristicKind, SampleConfig, Sampler, SyntheticConfig,
};

fn synthetic(nodes: usize, seed: u64) -> ChannelGraph {
    scale_free_graph(&SyntheticConfig {
        nodes,
        seed,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn capacity_only_documents_split_evenly() {
    let doc = r#"{"nodes":[{"id":"a","provider":false},{"id":"b","provider":true}],
        "channels":[{"id":"c1","a":"a","b":"b","capacity_msat":2000000}]}"#;
    let g = load_snapshot(doc.as_bytes()).unwrap();
    assert_eq!((g.node_count(), g.edge_count()), (2, 2));
    assert!(g.edges().iter().all(|e| e.balance == 1_000_000));
    let empty = load_snapshot(r#"{"nodes":[{"id":"x"},{"id":"y"}],"channels":[]}"#.as_bytes()).unwrap();
    assert_eq!((empty.node_count(), empty.edge_count()), (2, 0));
}

#[test]
fn sixteen_thousand_node_snapshot_round_trips() {
    let g = synthetic(16_000, 4);
    let text = pcnsim::snapshot::snapshot_to_string(&g);
    let back = load_snapshot(text.as_bytes()).unwrap();
    assert_eq!(back.node_count(), 16_000);
    assert_eq!(back.channel_count(), g.channel_count());
    assert_eq!(back.edge_count(), 2 * back.channel_count());
    back.check_invariants().unwrap();
}

#[test]
fn thousand_samples_are_connected_and_induced() {
    let parent = Arc::new(synthetic(2000, 0));
    let sampler = Sampler::new(parent.clone());
    let cfg = SampleConfig {
        target_size: 50,
        seed: 1000,
        ..Default::default()
    };
    for (i, s) in sample_stream(&sampler, &cfg, 1000).enumerate() {
        let s = s.unwrap();
        assert_eq!(s.node_count(), 50);
        assert!(oracles::is_connected(&s), "sample {i} disconnected");
        if i % 100 == 0 {
            let ids: BTreeSet<&str> = s.nodes().iter().map(|n| n.node_id.as_str()).collect();
            let inside = (0..parent.channel_count())
                .filter(|&c| {
                    let (ab, _) = parent.channel_edges(c);
                    let e = parent.edge(ab);
                    ids.contains(parent.node(e.src).node_id.as_str())
                        && ids.contains(parent.node(e.dst).node_id.as_str())
                })
                .count();
            assert_eq!(s.channel_count(), inside);
        }
    }
}

#[test]
fn samples_differ_across_seeds() {
    let sampler = Sampler::new(Arc::new(synthetic(2000, 0)));
    let cfg = SampleConfig::default();
    let sets: Vec<BTreeSet<String>> = sample_stream(&sampler, &cfg, 3)
        .map(|s| s.unwrap().nodes().iter().map(|n| n.node_id.clone()).collect())
        .collect();
    for i in 0..3 {
        for j in i + 1..3 {
            let inter = sets[i].intersection(&sets[j]).count() as f64;
            let union = sets[i].union(&sets[j]).count() as f64;
            assert!(inter / union < 1.0);
        }
    }
}

#[test]
fn samples_of_a_preferential_attachment_graph_stay_skewed() {
    let parent = scale_free_graph(&SyntheticConfig {
        nodes: 2000,
        attach: 2,
        attach_shape: None,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let sampler = Sampler::new(Arc::new(parent));
    let ratios: Vec<f64> = sample_stream(&sampler, &SampleConfig::default(), 100)
        .map(|s| {
            let s = s.unwrap();
            let degrees: Vec<usize> = (0..s.node_count()).map(|v| s.degree(v)).collect();
            let mean = degrees.iter().sum::<usize>() as f64 / degrees.len() as f64;
            *degrees.iter().max().unwrap() as f64 / mean
        })
        .collect();
    let avg = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(avg > 2.0, "max/mean degree {avg}");
}

fn episode_env(nodes: usize, steps: usize) -> Env {
    Env::new(Arc::new(synthetic(2000, 0)), EnvConfig::setting(nodes, steps)).unwrap()
}

#[test]
fn episode_revenue_matches_transaction_log_replay() {
    let mut env = episode_env(50, 5);
    let earning = (0..20).filter(|&seed| replay_episode(&mut env, seed) > 0).count();
    assert!(earning > 0, "the agent never forwarded anything");
}

/// Plays a fixed action sequence and checks every step's revenue against an
/// independent rebuild of the step graph plus the recorded transaction log.
fn replay_episode(env: &mut Env, seed: u64) -> u64 {
    env.reset(seed).unwrap();
    let actions = [(3, 4), (10, 2), (3, 7), (25, 1), (41, 10)];
    let budget = env.config().budget_msat;
    let norm = env.config().reward_norm_msat as f64;
    let mut total = 0u64;
    for (t, &(node, bucket)) in actions.iter().enumerate() {
        let out = env.step(Action { node, bucket }).unwrap();

        // allocation recomputed by hand: floor shares, residual to the last pick
        let history = &actions[..=t];
        let sum: u64 = history.iter().map(|a| a.1 as u64).sum();
        let mut alloc = std::collections::BTreeMap::new();
        for &(n, b) in history {
            *alloc.entry(n).or_insert(0u64) += b as u64 * budget / sum;
        }
        let assigned: u64 = alloc.values().sum();
        *alloc.get_mut(&node).unwrap() += budget - assigned;

        let mut g = env.sample_graph().unwrap().clone();
        let agent = g.add_node("agent", false).unwrap();
        let policy = env.agent_policy().unwrap();
        for (&n, &c) in &alloc {
            g.add_channel(agent, n, c, c, policy, policy).unwrap();
        }
        let log = &env.last_flow().unwrap().log;
        assert_eq!(log.len(), 600);
        let mut revenue = 0;
        for entry in log {
            let (route, credits) = execute_transaction(&mut g, &entry.tx).unwrap();
            assert_eq!(route.success, entry.success);
            revenue += credits.iter().filter(|c| c.0 == agent).map(|c| c.1).sum::<u64>();
        }
        assert_eq!(revenue, out.info.revenue_msat);
        assert_eq!(out.reward, revenue as f64 / norm);

        // same revenue from the per-edge forwarded amounts on the agent's inbound edges
        let graph = env.graph().unwrap();
        let flows = &env.last_flow().unwrap().edge_flows;
        let a = env.agent().unwrap();
        let inbound: u64 = graph
            .out_edges(a)
            .iter()
            .map(|&e| pcnsim::ChannelGraph::reverse_edge(e))
            .map(|e| {
                let edge = graph.edge(e);
                flows[e].iter().map(|&f| oracles::fee(f, edge.base_fee, edge.fee_rate)).sum::<u64>()
            })
            .sum();
        // forwards entering the agent always leave it again: it is never a payee
        assert_eq!(inbound, revenue);
        total += revenue;
    }
    assert!(env.is_done());
    total
}

#[test]
fn channel_construction_follows_allocations() {
    let mut env = episode_env(30, 3);
    let budget = env.config().budget_msat;
    env.reset(2).unwrap();
    let capacities = |env: &Env| -> Vec<u64> {
        let g = env.graph().unwrap();
        let a = env.agent().unwrap();
        g.out_edges(a).iter().map(|&e| g.channel(g.edge(e).channel).capacity).collect()
    };
    env.step(Action { node: 5, bucket: 6 }).unwrap();
    assert_eq!(capacities(&env), vec![2 * budget]);
    env.step(Action { node: 5, bucket: 6 }).unwrap();
    assert_eq!(capacities(&env), vec![2 * budget]);
    assert!(env.step(Action { node: 9, bucket: 11 }).is_err());
    env.step(Action { node: 9, bucket: 10 }).unwrap();
    assert_eq!(env.step(Action { node: 1, bucket: 1 }).unwrap_err().to_string(), pcnsim::Error::EpisodeDone.to_string());

    env.reset(3).unwrap();
    env.step(Action { node: 1, bucket: 4 }).unwrap();
    env.step(Action { node: 2, bucket: 4 }).unwrap();
    assert_eq!(capacities(&env), vec![budget, budget]);
}

#[test]
fn uniform_heuristics_fund_every_pick_equally() {
    for steps in [1, 5] {
        let mut env = episode_env(50, steps);
        let budget = env.config().budget_msat;
        for kind in HeuristicKind::ALL {
            env.reset(8).unwrap();
            run_heuristic(&mut env, kind, 8).unwrap();
            let alloc: Vec<u64> = env.allocations().unwrap().values().copied().collect();
            assert_eq!(alloc.len(), steps);
            let (lo, hi) = (alloc.iter().min().unwrap(), alloc.iter().max().unwrap());
            assert!(hi - lo <= 1, "{kind}: {alloc:?}");
            assert_eq!(alloc.iter().sum::<u64>(), budget);
        }
    }
}

#[test]
fn evolution_on_a_500_node_base() {
    let base = synthetic(500, 6);
    let cfg = EvolutionConfig { env: EnvConfig::setting(50, 5), ..Default::default() };
    let out = evolve_network(&base, 50, &cfg, heuristic_policy(HeuristicKind::Random)).unwrap();
    let r = &out.report;
    assert_eq!(r.evolved_nodes, 550);
    assert_eq!(r.evolved_channels, r.base_channels + r.channels_added);
    assert_eq!(r.channels_added, 250);
    let eig = r.centralities.iter().find(|c| c.centrality == "eigenvector").unwrap();
    // The reference direction is an increase; the magnitude depends on the snapshot.
    println!(
        "eigenvector Shannon delta {:+.4} ({})",
        eig.delta.shannon,
        if eig.delta.shannon > 0.0 { "same sign as reference" } else { "opposite sign to reference" }
    );
    for c in &r.centralities {
        assert_eq!(c.histogram.base_counts.iter().sum::<usize>(), 500);
        assert_eq!(c.histogram.evolved_counts.iter().sum::<usize>(), 550);
        assert_eq!(c.histogram.edges.len(), cfg.bins + 1);
    }
}
