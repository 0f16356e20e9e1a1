//! The allocation environment.
//!
//! Each episode draws a fresh localized sample, attaches an agent node with no
//! channels and runs one warm-up traffic step. Every `step` appends a
//! `(node, bucket)` choice to the history, re-derives the per-node budget split,
//! rebuilds the agent's channels from scratch and simulates one traffic step on
//! the sample plus those channels. Balances move payment by payment within a
//! step; each step starts again from the sampled balances.
//! The reward is the fee income collected on the agent's inbound edges.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ChannelGraph, FeePolicy, Msat};
use crate::routing::{simulate_step, FlowConfig, FlowRecord};
use crate::sampling::{SampleConfig, Sampler};

pub const FEATURES: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentPolicy {
    /// Median base fee and fee rate of the sampled graph.
    #[default]
    Median,
    Explicit(FeePolicy),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub sample: SampleConfig,
    pub flow: FlowConfig,
    /// Steps per episode, which is also the number of channel decisions.
    pub episode_length: usize,
    /// Size of the discrete share set `1..=buckets`.
    pub buckets: u32,
    pub budget_msat: Msat,
    pub agent_policy: AgentPolicy,
    pub reward_norm_msat: Msat,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            sample: SampleConfig::default(),
            flow: FlowConfig::default(),
            episode_length: 5,
            buckets: 10,
            budget_msat: 10_000_000_000,
            agent_policy: AgentPolicy::Median,
            reward_norm_msat: 1_000_000,
        }
    }
}

impl EnvConfig {
    /// The `nodes-channels` settings used throughout the evaluation: 50-5,
    /// 100-10 and 200-15.
    pub fn setting(nodes: usize, channels: usize) -> Self {
        let mut cfg = EnvConfig::default();
        cfg.sample.target_size = nodes;
        cfg.episode_length = channels;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.sample.validate()?;
        self.flow.validate()?;
        if self.episode_length == 0 {
            return Err(Error::Config("episode_length must be at least 1".into()));
        }
        if self.buckets == 0 {
            return Err(Error::Config("buckets must be at least 1".into()));
        }
        if self.budget_msat == 0 {
            return Err(Error::Config("budget_msat must be positive".into()));
        }
        if self.reward_norm_msat == 0 {
            return Err(Error::Config("reward_norm_msat must be positive".into()));
        }
        if let AgentPolicy::Explicit(p) = &self.agent_policy {
            p.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: EnvConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub node: usize,
    pub bucket: u32,
}

/// Splits `budget` across the history: each tuple receives
/// `bucket / sum(buckets) * budget` (floored), repeated nodes accumulate, and
/// the rounding residual goes to the node of the last tuple.
pub fn normalize_allocations(history: &[Action], budget: Msat) -> BTreeMap<usize, Msat> {
    let mut out = BTreeMap::new();
    let Some(last) = history.last() else {
        return out;
    };
    let total: u128 = history.iter().map(|a| a.bucket as u128).sum();
    if total == 0 {
        return out;
    }
    let mut assigned: Msat = 0;
    for a in history {
        let share = (a.bucket as u128 * budget as u128 / total) as Msat;
        assigned += share;
        *out.entry(a.node).or_insert(0) += share;
    }
    *out.entry(last.node).or_insert(0) += budget - assigned;
    out
}

/// Row-major `rows x 4` feature matrix: degree centrality, provider flag,
/// normalized forwarded volume, normalized allocation.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub rows: usize,
    pub data: Vec<f64>,
}

impl Observation {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * FEATURES..(i + 1) * FEATURES]
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(c).step_by(FEATURES).copied()
    }
}

/// Builds the observation for nodes `0..rows`. Degree counts distinct channel
/// peers over `node_count - 1`; flow and allocation columns are divided by
/// their maximum over the rows (an all-zero column stays zero).
pub fn build_observation(
    graph: &ChannelGraph,
    flow: &FlowRecord,
    allocations: &BTreeMap<usize, Msat>,
    rows: usize,
) -> Observation {
    let denom = graph.node_count().saturating_sub(1).max(1) as f64;
    let max_flow = (0..rows).map(|i| flow.node_volume.get(i).copied().unwrap_or(0)).max().unwrap_or(0);
    let alloc = |i: usize| allocations.get(&i).copied().unwrap_or(0);
    let max_alloc = (0..rows).map(alloc).max().unwrap_or(0);
    let scaled = |v: Msat, max: Msat| if max == 0 { 0.0 } else { v as f64 / max as f64 };

    let mut data = Vec::with_capacity(rows * FEATURES);
    for i in 0..rows {
        data.push(graph.degree(i) as f64 / denom);
        data.push(if graph.node(i).is_provider { 1.0 } else { 0.0 });
        data.push(scaled(flow.node_volume.get(i).copied().unwrap_or(0), max_flow));
        data.push(scaled(alloc(i), max_alloc));
    }
    Observation { rows, data }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub step: usize,
    pub revenue_msat: Msat,
    pub succeeded: usize,
    pub failed: usize,
    pub channels_open: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Clone, Debug)]
struct Episode {
    sample: ChannelGraph,
    graph: ChannelGraph,
    agent: usize,
    agent_id: String,
    agent_policy: FeePolicy,
    history: Vec<Action>,
    allocations: BTreeMap<usize, Msat>,
    rng: ChaCha8Rng,
    step: usize,
    last_flow: FlowRecord,
    observation: Observation,
}

/// One environment instance: a single-threaded state machine.
#[derive(Clone, Debug)]
pub struct Env {
    config: EnvConfig,
    sampler: Sampler,
    episode: Option<Episode>,
}

const AGENT_ID: &str = "__agent__";

impl Env {
    pub fn new(snapshot: Arc<ChannelGraph>, config: EnvConfig) -> Result<Self> {
        Self::with_sampler(Sampler::new(snapshot), config)
    }

    pub fn with_sampler(sampler: Sampler, config: EnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(Env {
            config,
            sampler,
            episode: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: EnvConfig) -> Result<()> {
        config.validate()?;
        self.config = config;
        self.episode = None;
        Ok(())
    }

    pub fn sampler(&self) -> &Sampler {
        &self.sampler
    }

    pub fn reset(&mut self, seed: u64) -> Result<Observation> {
        let sample_cfg = SampleConfig {
            seed,
            ..self.config.sample.clone()
        };
        let sample = self.sampler.sample(&sample_cfg)?;
        let agent_policy = match self.config.agent_policy {
            AgentPolicy::Explicit(p) => p,
            AgentPolicy::Median => sample.median_fee_policy()?,
        };
        let mut agent_id = AGENT_ID.to_string();
        while sample.index_of(&agent_id).is_some() {
            agent_id.push('_');
        }
        let mut graph = sample.clone();
        let agent = graph.add_node(agent_id.clone(), false)?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let warmup = simulate_step(&mut graph, &self.config.flow, Some(agent), &mut rng);
        let allocations = BTreeMap::new();
        let observation = build_observation(&graph, &warmup, &allocations, agent);
        self.episode = Some(Episode {
            sample,
            graph,
            agent,
            agent_id,
            agent_policy,
            history: Vec::new(),
            allocations,
            rng,
            step: 0,
            last_flow: warmup,
            observation: observation.clone(),
        });
        Ok(observation)
    }

    fn episode(&self) -> Result<&Episode> {
        self.episode.as_ref().ok_or(Error::NotReset)
    }

    pub fn is_done(&self) -> bool {
        self.episode
            .as_ref()
            .is_some_and(|ep| ep.step >= self.config.episode_length)
    }

    /// Candidate count (the sampled nodes, excluding the agent).
    pub fn candidates(&self) -> Result<usize> {
        Ok(self.episode()?.agent)
    }

    pub fn agent(&self) -> Result<usize> {
        Ok(self.episode()?.agent)
    }

    /// Graph of the latest step (after its traffic), including the agent node
    /// at the last index.
    pub fn graph(&self) -> Result<&ChannelGraph> {
        Ok(&self.episode()?.graph)
    }

    /// The sample as drawn, without the agent and before any traffic.
    pub fn sample_graph(&self) -> Result<&ChannelGraph> {
        Ok(&self.episode()?.sample)
    }

    pub fn agent_policy(&self) -> Result<FeePolicy> {
        Ok(self.episode()?.agent_policy)
    }

    pub fn history(&self) -> Result<&[Action]> {
        Ok(&self.episode()?.history)
    }

    pub fn allocations(&self) -> Result<&BTreeMap<usize, Msat>> {
        Ok(&self.episode()?.allocations)
    }

    pub fn last_flow(&self) -> Result<&FlowRecord> {
        Ok(&self.episode()?.last_flow)
    }

    pub fn observation(&self) -> Result<&Observation> {
        Ok(&self.episode()?.observation)
    }

    pub fn step_index(&self) -> Result<usize> {
        Ok(self.episode()?.step)
    }

    /// Records the action and rebuilds the step graph: the sample at its
    /// original balances plus one agent channel per allocated node. Each
    /// counterparty matches the agent's funding, so a channel to a node with
    /// allocation `c` has capacity `2c`.
    pub fn apply_action(&mut self, action: Action) -> Result<()> {
        let buckets = self.config.buckets;
        let budget = self.config.budget_msat;
        let ep = self.episode.as_mut().ok_or(Error::NotReset)?;
        if action.node >= ep.agent {
            return Err(Error::InvalidAction(format!(
                "node {} out of range (0..{})",
                action.node, ep.agent
            )));
        }
        if action.bucket == 0 || action.bucket > buckets {
            return Err(Error::InvalidAction(format!(
                "bucket {} out of range (1..={buckets})",
                action.bucket
            )));
        }
        ep.history.push(action);
        ep.allocations = normalize_allocations(&ep.history, budget);
        // Traffic of every step runs on the sampled channels at their sampled
        // balances plus the agent's current channels.
        let mut graph = ep.sample.clone();
        graph.add_node(ep.agent_id.clone(), false)?;
        ep.graph = graph;
        for (&node, &amount) in &ep.allocations {
            if amount > 0 {
                ep.graph
                    .add_channel(ep.agent, node, amount, amount, ep.agent_policy, ep.agent_policy)?;
            }
        }
        Ok(())
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.episode.is_none() {
            return Err(Error::NotReset);
        }
        if self.is_done() {
            return Err(Error::EpisodeDone);
        }
        self.apply_action(action)?;
        let flow_cfg = &self.config.flow;
        let ep = self.episode.as_mut().expect("checked above");
        let flow = simulate_step(&mut ep.graph, flow_cfg, Some(ep.agent), &mut ep.rng);
        ep.step += 1;
        let revenue = flow.node_fees[ep.agent];
        let observation = build_observation(&ep.graph, &flow, &ep.allocations, ep.agent);
        let info = StepInfo {
            step: ep.step,
            revenue_msat: revenue,
            succeeded: flow.succeeded,
            failed: flow.failed,
            channels_open: ep.graph.out_edges(ep.agent).len(),
        };
        ep.last_flow = flow;
        ep.observation = observation.clone();
        Ok(StepOutcome {
            observation,
            reward: revenue as f64 / self.config.reward_norm_msat as f64,
            done: ep.step >= self.config.episode_length,
            info,
        })
    }
}
