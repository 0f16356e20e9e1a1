//! Forest-fire localization of a large channel graph.
//!
//! Burning proceeds breadth-first from an ignition node chosen uniformly in
//! the largest component. Each unburned neighbor of the node being processed
//! catches fire independently with probability `p_forward`; the sample is
//! complete the moment it holds `target_size` nodes. When the frontier dies
//! out early the fire is re-lit from an already burned node that still has
//! unburned neighbors, so every sample stays connected. `max_restarts` bounds
//! the number of consecutive re-ignitions that fail to burn anything.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ChannelGraph;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    pub target_size: usize,
    pub p_forward: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            target_size: 50,
            p_forward: 0.7,
            max_restarts: 100,
            seed: 0,
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_size < 2 {
            return Err(Error::Config("target_size must be at least 2".into()));
        }
        if !(self.p_forward > 0.0 && self.p_forward < 1.0) {
            return Err(Error::Config("p_forward must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug)]
struct SamplerData {
    graph: Arc<ChannelGraph>,
    component: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
}

/// Sampling front-end for one parent graph. The largest component and the
/// neighbor lists are computed once; clones share them.
#[derive(Clone, Debug)]
pub struct Sampler {
    data: Arc<SamplerData>,
}

impl Sampler {
    pub fn new(graph: Arc<ChannelGraph>) -> Self {
        let component = graph.largest_component();
        let neighbors = graph.neighbor_lists();
        Sampler {
            data: Arc::new(SamplerData {
                graph,
                component,
                neighbors,
            }),
        }
    }

    pub fn graph(&self) -> &Arc<ChannelGraph> {
        &self.data.graph
    }

    pub fn component_size(&self) -> usize {
        self.data.component.len()
    }

    /// Parent-graph indices of one sample, sorted ascending.
    pub fn sample_nodes(&self, cfg: &SampleConfig) -> Result<Vec<usize>> {
        cfg.validate()?;
        let SamplerData {
            graph,
            component,
            neighbors,
        } = &*self.data;
        if cfg.target_size > component.len() {
            return Err(Error::Sampling(format!(
                "target size {} exceeds largest component ({} nodes)",
                cfg.target_size,
                component.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let n = graph.node_count();
        let mut burned = vec![false; n];
        let mut sample = Vec::with_capacity(cfg.target_size);
        let mut frontier = VecDeque::new();

        let ignition = *component.choose(&mut rng).expect("non-empty component");
        burned[ignition] = true;
        sample.push(ignition);
        frontier.push_back(ignition);

        let mut failed_restarts = 0usize;
        while sample.len() < cfg.target_size {
            let Some(current) = frontier.pop_front() else {
                let candidates: Vec<usize> = sample
                    .iter()
                    .copied()
                    .filter(|&u| neighbors[u].iter().any(|&v| !burned[v]))
                    .collect();
                if candidates.is_empty() || failed_restarts >= cfg.max_restarts {
                    return Err(Error::Sampling(format!(
                        "fire died out at {} of {} nodes after {failed_restarts} restarts",
                        sample.len(),
                        cfg.target_size
                    )));
                }
                failed_restarts += 1;
                frontier.push_back(*candidates.choose(&mut rng).expect("non-empty"));
                continue;
            };
            for &v in &neighbors[current] {
                if burned[v] || !rng.gen_bool(cfg.p_forward) {
                    continue;
                }
                burned[v] = true;
                sample.push(v);
                frontier.push_back(v);
                failed_restarts = 0;
                if sample.len() == cfg.target_size {
                    break;
                }
            }
        }
        sample.sort_unstable();
        Ok(sample)
    }

    pub fn sample(&self, cfg: &SampleConfig) -> Result<ChannelGraph> {
        self.data.graph.induced_subgraph(&self.sample_nodes(cfg)?)
    }
}

pub fn forest_fire_sample(graph: &ChannelGraph, cfg: &SampleConfig) -> Result<ChannelGraph> {
    Sampler::new(Arc::new(graph.clone())).sample(cfg)
}

/// `count` samples seeded `cfg.seed`, `cfg.seed + 1`, ...
pub fn sample_stream(
    sampler: &Sampler,
    cfg: &SampleConfig,
    count: usize,
) -> impl Iterator<Item = Result<ChannelGraph>> {
    let sampler = sampler.clone();
    let cfg = cfg.clone();
    (0..count as u64).map(move |i| {
        sampler.sample(&SampleConfig {
            seed: cfg.seed.wrapping_add(i),
            ..cfg.clone()
        })
    })
}
