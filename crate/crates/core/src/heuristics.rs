//! Node-attachment baselines with uniform allocation.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Env};
use crate::error::{Error, Result};
use crate::graph::ChannelGraph;

/// Directed betweenness over hop-count shortest paths, normalized by
/// `(n - 1)(n - 2)`. Parallel channels count as one link.
pub fn betweenness_centrality(graph: &ChannelGraph) -> Vec<f64> {
    let n = graph.node_count();
    let mut centrality = vec![0.0; n];
    if n < 3 {
        return centrality;
    }
    let out: Vec<Vec<usize>> = graph.neighbor_lists();
    let mut sigma = vec![0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0f64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();

    for s in 0..n {
        sigma.fill(0.0);
        dist.fill(usize::MAX);
        delta.fill(0.0);
        preds.iter_mut().for_each(Vec::clear);
        order.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &out[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = order.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    let scale = 1.0 / ((n - 1) * (n - 2)) as f64;
    centrality.iter_mut().for_each(|c| *c *= scale);
    centrality
}

/// Distinct-peer degree over `n - 1`.
pub fn degree_vector(graph: &ChannelGraph) -> Vec<f64> {
    let n = graph.node_count();
    if n < 2 {
        return vec![0.0; n];
    }
    let denom = (n - 1) as f64;
    (0..n).map(|v| graph.degree(v) as f64 / denom).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeuristicKind {
    Random,
    TopKDegree,
    BottomKDegree,
    TopKBetweenness,
    BottomKBetweenness,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 5] = [
        HeuristicKind::Random,
        HeuristicKind::TopKDegree,
        HeuristicKind::BottomKDegree,
        HeuristicKind::TopKBetweenness,
        HeuristicKind::BottomKBetweenness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::Random => "random",
            HeuristicKind::TopKDegree => "top-k-degree",
            HeuristicKind::BottomKDegree => "bottom-k-degree",
            HeuristicKind::TopKBetweenness => "top-k-betweenness",
            HeuristicKind::BottomKBetweenness => "bottom-k-betweenness",
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HeuristicKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown heuristic {s:?}")))
    }
}

/// Picks `k` distinct nodes. Ranked variants order nodes by the metric
/// (ties by ascending index) and take the first `k` (top) or the last `k` of
/// the reversed ranking (bottom); random draws uniformly without replacement.
pub fn select_nodes(
    graph: &ChannelGraph,
    kind: HeuristicKind,
    k: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let n = graph.node_count();
    if k > n {
        return Err(Error::Config(format!("cannot pick {k} of {n} nodes")));
    }
    let metric = match kind {
        HeuristicKind::Random => return Ok(sample(rng, n, k).into_vec()),
        HeuristicKind::TopKDegree | HeuristicKind::BottomKDegree => degree_vector(graph),
        HeuristicKind::TopKBetweenness | HeuristicKind::BottomKBetweenness => {
            betweenness_centrality(graph)
        }
    };
    let descending = matches!(kind, HeuristicKind::TopKDegree | HeuristicKind::TopKBetweenness);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let by_metric = metric[a].total_cmp(&metric[b]);
        let by_metric = if descending { by_metric.reverse() } else { by_metric };
        by_metric.then(a.cmp(&b))
    });
    order.truncate(k);
    Ok(order)
}

/// Plays one episode on a freshly reset environment: step `t` connects to
/// the `t`-th pick with bucket 1. Returns the final step's reward.
pub fn run_heuristic(env: &mut Env, kind: HeuristicKind, seed: u64) -> Result<f64> {
    let steps = env.config().episode_length;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = select_nodes(env.sample_graph()?, kind, steps, &mut rng)?;
    let mut reward = 0.0;
    for node in picks {
        reward = env.step(Action { node, bucket: 1 })?.reward;
    }
    Ok(reward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::FeePolicy;

    fn graph(n: usize, links: &[(usize, usize)]) -> ChannelGraph {
        let mut g = ChannelGraph::new();
        for i in 0..n {
            g.add_node(format!("n{i}"), false).unwrap();
        }
        for &(a, b) in links {
            g.add_channel(a, b, 1, 1, FeePolicy::free(), FeePolicy::free())
                .unwrap();
        }
        g
    }

    #[test]
    fn path_center_and_star() {
        let b = betweenness_centrality(&graph(3, &[(0, 1), (1, 2)]));
        assert_eq!(b, vec![0.0, 1.0, 0.0]);
        let b = betweenness_centrality(&graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]));
        assert_eq!(b, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(betweenness_centrality(&graph(2, &[(0, 1)])), vec![0.0, 0.0]);
    }

    #[test]
    fn degrees() {
        let g = graph(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(degree_vector(&g), vec![1.0; 4]);
        let g = graph(3, &[(0, 1)]);
        assert_eq!(degree_vector(&g)[2], 0.0);
    }

    #[test]
    fn top_and_bottom_by_degree() {
        // degrees [3, 1, 2, 2]
        let g = graph(4, &[(0, 1), (0, 2), (0, 3), (2, 3)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_nodes(&g, HeuristicKind::TopKDegree, 2, &mut rng).unwrap(), vec![0, 2]);
        assert_eq!(select_nodes(&g, HeuristicKind::BottomKDegree, 2, &mut rng).unwrap(), vec![1, 2]);
        assert!(select_nodes(&g, HeuristicKind::TopKDegree, 5, &mut rng).is_err());
    }

    #[test]
    fn equal_metrics_fall_back_to_index_order() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in [
            HeuristicKind::TopKDegree,
            HeuristicKind::BottomKDegree,
            HeuristicKind::TopKBetweenness,
            HeuristicKind::BottomKBetweenness,
        ] {
            assert_eq!(select_nodes(&g, kind, 2, &mut rng).unwrap(), vec![0, 1]);
        }
    }

    #[test]
    fn random_is_reproducible_and_distinct() {
        let g = graph(30, &[]);
        let pick = |seed| {
            select_nodes(&g, HeuristicKind::Random, 10, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
        };
        let a = pick(3);
        assert_eq!(a, pick(3));
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
    }

    #[test]
    fn names_round_trip() {
        for kind in HeuristicKind::ALL {
            assert_eq!(kind.name().parse::<HeuristicKind>().unwrap(), kind);
        }
        assert!("top-k".parse::<HeuristicKind>().is_err());
    }
}
