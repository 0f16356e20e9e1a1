//! Grows a base graph by deploying one revenue-seeking node per episode and
//! compares centrality distributions before and after.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::centrality::CentralityReport;
use super::community::louvain;
use super::distribution::{Binning, DistributionMetrics, DEFAULT_BINS, DEFAULT_RENYI_ORDER};
use crate::env::{Env, EnvConfig};
use crate::error::{Error, Result};
use crate::graph::ChannelGraph;
use crate::heuristics::{run_heuristic, HeuristicKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub env: EnvConfig,
    /// Episode `i` resets with `seed + i`; Louvain uses `seed`.
    pub seed: u64,
    pub bins: usize,
    pub renyi_order: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            env: EnvConfig::default(),
            seed: 0,
            bins: DEFAULT_BINS,
            renyi_order: DEFAULT_RENYI_ORDER,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub shannon: f64,
    pub renyi: f64,
    pub gini: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramTable {
    pub edges: Vec<f64>,
    pub base_counts: Vec<usize>,
    pub evolved_counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralityComparison {
    pub centrality: String,
    pub base: DistributionMetrics,
    pub evolved: DistributionMetrics,
    /// Evolved minus base.
    pub delta: MetricDelta,
    pub histogram: HistogramTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub episodes: usize,
    pub channels_added: usize,
    pub base_nodes: usize,
    pub base_channels: usize,
    pub evolved_nodes: usize,
    pub evolved_channels: usize,
    pub modularity_base: f64,
    pub modularity_evolved: f64,
    pub renyi_order: f64,
    pub centralities: Vec<CentralityComparison>,
}

pub struct Evolution {
    pub graph: ChannelGraph,
    pub report: EvolutionReport,
}

/// Plays a heuristic episode on a freshly reset environment.
pub fn heuristic_policy(kind: HeuristicKind) -> impl FnMut(&mut Env, u64) -> Result<()> {
    move |env, seed| run_heuristic(env, kind, seed).map(|_| ())
}

/// For every episode: sample the current global graph, let `policy` play the
/// episode, then add the agent to the global graph as a new node with one
/// channel per allocated counterparty (both sides funded with the allocation,
/// both directions at the agent's fee policy). Finally compares the base and
/// evolved graphs on identical binning.
pub fn evolve_network<P>(
    base: &ChannelGraph,
    episodes: usize,
    cfg: &EvolutionConfig,
    mut policy: P,
) -> Result<Evolution>
where
    P: FnMut(&mut Env, u64) -> Result<()>,
{
    let mut global = base.clone();
    let mut channels_added = 0;
    for episode in 0..episodes {
        let seed = cfg.seed.wrapping_add(episode as u64);
        let mut env = Env::new(Arc::new(global.clone()), cfg.env.clone())?;
        env.reset(seed)?;
        policy(&mut env, seed)?;

        let sample = env.sample_graph()?;
        let fee = env.agent_policy()?;
        let mut id = format!("agent{episode:05}");
        while global.index_of(&id).is_some() {
            id.push('_');
        }
        let agent = global.add_node(id, false)?;
        for (&node, &amount) in env.allocations()? {
            let peer_id = &sample.node(node).node_id;
            let peer = global
                .index_of(peer_id)
                .ok_or_else(|| Error::Validation(format!("sampled node {peer_id:?} vanished")))?;
            if amount > 0 {
                global.add_channel(agent, peer, amount, amount, fee, fee)?;
                channels_added += 1;
            }
        }
    }
    let report = compare(base, &global, episodes, channels_added, cfg)?;
    Ok(Evolution {
        graph: global,
        report,
    })
}

fn compare(
    base: &ChannelGraph,
    evolved: &ChannelGraph,
    episodes: usize,
    channels_added: usize,
    cfg: &EvolutionConfig,
) -> Result<EvolutionReport> {
    let before = CentralityReport::compute(base)?;
    let after = CentralityReport::compute(evolved)?;
    let mut centralities = Vec::new();
    for ((name, b), (_, a)) in before.measures().into_iter().zip(after.measures()) {
        let binning = Binning::spanning(&[b, a], cfg.bins)?;
        let base_m = DistributionMetrics::compute(b, &binning, cfg.renyi_order)?;
        let evolved_m = DistributionMetrics::compute(a, &binning, cfg.renyi_order)?;
        centralities.push(CentralityComparison {
            centrality: name.to_string(),
            delta: MetricDelta {
                shannon: evolved_m.shannon - base_m.shannon,
                renyi: evolved_m.renyi - base_m.renyi,
                gini: evolved_m.gini - base_m.gini,
            },
            base: base_m,
            evolved: evolved_m,
            histogram: HistogramTable {
                edges: binning.edges(),
                base_counts: binning.counts(b),
                evolved_counts: binning.counts(a),
            },
        });
    }
    Ok(EvolutionReport {
        episodes,
        channels_added,
        base_nodes: base.node_count(),
        base_channels: base.channel_count(),
        evolved_nodes: evolved.node_count(),
        evolved_channels: evolved.channel_count(),
        modularity_base: louvain(base, cfg.seed)?.modularity,
        modularity_evolved: louvain(evolved, cfg.seed)?.modularity,
        renyi_order: cfg.renyi_order,
        centralities,
    })
}
