//! Eigenvector and closeness centrality, plus the four-measure report.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ChannelGraph;
use crate::heuristics::{betweenness_centrality, degree_vector};

pub const EIGEN_TOLERANCE: f64 = 1e-8;
pub const EIGEN_MAX_ITERATIONS: usize = 1000;

/// Power iteration on `A + I` over the simple undirected channel graph,
/// L2-normalized. The identity shift has the same eigenvectors as `A` and
/// keeps bipartite graphs from oscillating.
pub fn eigenvector_centrality(graph: &ChannelGraph) -> Result<Vec<f64>> {
    let n = graph.node_count();
    if n == 0 {
        return Err(Error::Domain("eigenvector centrality of an empty graph".into()));
    }
    let adj = graph.neighbor_lists();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    for _ in 0..EIGEN_MAX_ITERATIONS {
        for (v, out) in next.iter_mut().enumerate() {
            *out = x[v] + adj[v].iter().map(|&w| x[w]).sum::<f64>();
        }
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        next.iter_mut().for_each(|v| *v /= norm);
        let change = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut next);
        if change < EIGEN_TOLERANCE {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        iterations: EIGEN_MAX_ITERATIONS,
    })
}

/// `(r - 1) / sum of distances` within the node's component, scaled by
/// `(r - 1) / (n - 1)` where `r` counts the reachable nodes including itself.
pub fn closeness_centrality(graph: &ChannelGraph) -> Vec<f64> {
    let n = graph.node_count();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    let adj = graph.neighbor_lists();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for (s, slot) in out.iter_mut().enumerate() {
        dist.fill(usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        let (mut reached, mut total) = (0usize, 0usize);
        while let Some(v) = queue.pop_front() {
            reached += 1;
            total += dist[v];
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        if total > 0 {
            let r = (reached - 1) as f64;
            *slot = r / total as f64 * (r / (n - 1) as f64);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralityReport {
    pub degree: Vec<f64>,
    pub betweenness: Vec<f64>,
    pub eigenvector: Vec<f64>,
    pub closeness: Vec<f64>,
}

impl CentralityReport {
    pub const NAMES: [&'static str; 4] = ["degree", "betweenness", "eigenvector", "closeness"];

    pub fn compute(graph: &ChannelGraph) -> Result<Self> {
        Ok(CentralityReport {
            degree: degree_vector(graph),
            betweenness: betweenness_centrality(graph),
            eigenvector: eigenvector_centrality(graph)?,
            closeness: closeness_centrality(graph),
        })
    }

    /// `(name, values)` in the order of [`CentralityReport::NAMES`].
    pub fn measures(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("degree", &self.degree),
            ("betweenness", &self.betweenness),
            ("eigenvector", &self.eigenvector),
            ("closeness", &self.closeness),
        ]
    }
}
