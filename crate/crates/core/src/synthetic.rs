//! Synthetic Lightning-like snapshots for tests, benchmarks and offline runs.
//!
//! Topology is preferential attachment where each joining node opens a
//! heavy-tailed number of channels, so the graph has many single-channel
//! nodes and a few large hubs. Each node picks one fee policy for all of its
//! outbound directions, mimicking operators who set a node-wide default.
//! Capacities are log-normal, with larger channels between well connected
//! nodes and small ones at the periphery.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ChannelGraph, FeePolicy, Msat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub nodes: usize,
    /// Channels opened by every node joining after the seed clique, or the
    /// minimum when `attach_shape` is set.
    pub attach: usize,
    /// Pareto shape for a heavy-tailed per-node channel count (many
    /// single-channel nodes, a few very well connected ones).
    pub attach_shape: Option<f64>,
    pub provider_fraction: f64,
    pub median_capacity_msat: Msat,
    /// Log-normal shape parameter of channel capacities.
    pub capacity_sigma: f64,
    /// Channel capacity median scales with `(min endpoint degree / mean
    /// degree) ^ capacity_degree_exponent`; 0 makes capacity independent of
    /// topology.
    pub capacity_degree_exponent: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            nodes: 2000,
            attach: 1,
            attach_shape: Some(1.0),
            provider_fraction: 0.1,
            median_capacity_msat: 1_000_000_000,
            capacity_sigma: 1.2,
            capacity_degree_exponent: 1.0,
            seed: 0,
        }
    }
}

fn node_policy(rng: &mut impl Rng) -> FeePolicy {
    // Most operators keep the implementation default of 1 sat + 1 ppm.
    let base_fee = match rng.gen_range(0..10) {
        0..=6 => 1000,
        7 => 0,
        _ => rng.gen_range(1..=10) * 500,
    };
    let fee_rate = if rng.gen_bool(0.6) {
        0.000_001
    } else {
        let ppm: f64 = LogNormal::new(100f64.ln(), 1.5).unwrap().sample(rng);
        ppm.round().clamp(1.0, 50_000.0) / 1e6
    };
    FeePolicy { base_fee, fee_rate }
}

/// Builds a connected preferential-attachment channel graph.
pub fn scale_free_graph(cfg: &SyntheticConfig) -> Result<ChannelGraph> {
    if cfg.attach == 0 || cfg.nodes <= cfg.attach {
        return Err(Error::Config(format!(
            "need nodes > attach >= 1 (nodes {}, attach {})",
            cfg.nodes, cfg.attach
        )));
    }
    if !(0.0..=1.0).contains(&cfg.provider_fraction) {
        return Err(Error::Config("provider_fraction must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spread = LogNormal::new(0.0, cfg.capacity_sigma).map_err(|e| Error::Config(e.to_string()))?;

    let mut graph = ChannelGraph::new();
    let providers = (cfg.provider_fraction * cfg.nodes as f64).round() as usize;
    let mut is_provider = vec![false; cfg.nodes];
    for i in sample(&mut rng, cfg.nodes, providers) {
        is_provider[i] = true;
    }
    let mut policies = Vec::with_capacity(cfg.nodes);
    for (i, &p) in is_provider.iter().enumerate() {
        graph.add_node(format!("node{i:05}"), p)?;
        policies.push(node_policy(&mut rng));
    }

    // Every endpoint occurrence, so uniform picks are degree-proportional.
    let mut endpoints: Vec<usize> = Vec::new();
    let seed_size = cfg.attach + 1;
    for u in 0..seed_size {
        for v in (u + 1)..seed_size {
            endpoints.extend([u, v]);
        }
    }
    for u in seed_size..cfg.nodes {
        let wanted = match cfg.attach_shape {
            Some(shape) => {
                let x: f64 = rand_distr::Pareto::new(cfg.attach as f64, shape)
                    .map_err(|e| Error::Config(e.to_string()))?
                    .sample(&mut rng);
                (x.floor() as usize).clamp(cfg.attach, u)
            }
            None => cfg.attach,
        };
        let mut targets: Vec<usize> = Vec::with_capacity(wanted);
        while targets.len() < wanted {
            let v = endpoints[rng.gen_range(0..endpoints.len())];
            if !targets.contains(&v) {
                targets.push(v);
            }
        }
        for v in targets {
            endpoints.extend([u, v]);
        }
    }

    let mut degree = vec![0usize; cfg.nodes];
    endpoints.iter().for_each(|&u| degree[u] += 1);
    let mean_degree = endpoints.len() as f64 / cfg.nodes as f64;
    for pair in endpoints.chunks_exact(2) {
        let (u, v) = (pair[0], pair[1]);
        let small = degree[u].min(degree[v]) as f64 / mean_degree;
        let median = cfg.median_capacity_msat as f64 * small.powf(cfg.capacity_degree_exponent);
        let cap = ((median * spread.sample(&mut rng)).round() as Msat).max(20_000_000);
        graph.add_channel(u, v, cap / 2, cap - cap / 2, policies[u], policies[v])?;
    }
    Ok(graph)
}
