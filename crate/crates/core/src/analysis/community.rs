//! Louvain community detection on the simple undirected channel graph.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ChannelGraph;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Community label per node, numbered by first appearance in index order.
    pub membership: Vec<usize>,
    pub communities: usize,
    pub modularity: f64,
    /// Modularity of the original graph after each aggregation level.
    pub levels: Vec<f64>,
}

/// Newman modularity of `membership` with unit link weights; parallel
/// channels count as one link.
pub fn modularity(graph: &ChannelGraph, membership: &[usize]) -> Result<f64> {
    let adj = graph.neighbor_lists();
    let two_m: usize = adj.iter().map(Vec::len).sum();
    if two_m == 0 {
        return Err(Error::Domain("modularity of an edgeless graph".into()));
    }
    let groups = membership.iter().copied().max().map_or(0, |m| m + 1);
    let mut inner = vec![0usize; groups];
    let mut total = vec![0usize; groups];
    for (v, peers) in adj.iter().enumerate() {
        total[membership[v]] += peers.len();
        inner[membership[v]] += peers.iter().filter(|&&w| membership[w] == membership[v]).count();
    }
    let two_m = two_m as f64;
    Ok(inner
        .iter()
        .zip(&total)
        .map(|(&i, &t)| i as f64 / two_m - (t as f64 / two_m).powi(2))
        .sum())
}

/// Weighted graph of one Louvain level. `loops[i]` is the weight inside
/// super-node `i`; `links` hold the weights between distinct super-nodes.
struct Level {
    links: Vec<Vec<(usize, f64)>>,
    loops: Vec<f64>,
}

impl Level {
    fn strength(&self, v: usize) -> f64 {
        2.0 * self.loops[v] + self.links[v].iter().map(|&(_, w)| w).sum::<f64>()
    }

    /// Local moving phase; returns the community of every super-node and
    /// whether anything moved.
    fn local_moves(&self, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
        let n = self.links.len();
        let strength: Vec<f64> = (0..n).map(|v| self.strength(v)).collect();
        let two_m: f64 = strength.iter().sum();
        let mut community: Vec<usize> = (0..n).collect();
        let mut total = strength.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);

        let mut weight_to = vec![0.0; n];
        let mut touched = Vec::new();
        let mut moved_any = false;
        loop {
            let mut moved = false;
            for &v in &order {
                let own = community[v];
                let k = strength[v];
                total[own] -= k;
                touched.clear();
                touched.push(own);
                for &(w, weight) in &self.links[v] {
                    let c = community[w];
                    if weight_to[c] == 0.0 && !touched.contains(&c) {
                        touched.push(c);
                    }
                    weight_to[c] += weight;
                }
                let gain = |c: usize| weight_to[c] - total[c] * k / two_m;
                let mut best = own;
                let mut best_gain = gain(own);
                for &c in &touched[1..] {
                    let g = gain(c);
                    if g > best_gain + 1e-12 {
                        best = c;
                        best_gain = g;
                    }
                }
                for &c in &touched {
                    weight_to[c] = 0.0;
                }
                total[best] += k;
                if best != own {
                    community[v] = best;
                    moved = true;
                    moved_any = true;
                }
            }
            if !moved {
                break;
            }
        }
        (community, moved_any)
    }

    fn aggregate(&self, community: &[usize]) -> (Level, Vec<usize>) {
        let relabel = first_appearance(community);
        let groups = relabel.iter().copied().max().map_or(0, |m| m + 1);
        let mut loops = vec![0.0; groups];
        let mut dense: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); groups];
        for (v, peers) in self.links.iter().enumerate() {
            let cv = relabel[v];
            loops[cv] += self.loops[v];
            for &(w, weight) in peers {
                let cw = relabel[w];
                if cv == cw {
                    // each internal link is visited from both ends
                    loops[cv] += weight / 2.0;
                } else {
                    *dense[cv].entry(cw).or_insert(0.0) += weight;
                }
            }
        }
        let links = dense.into_iter().map(|m| m.into_iter().collect()).collect();
        (Level { links, loops }, relabel)
    }
}

fn first_appearance(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Multi-level Louvain. Node visiting order is shuffled with `seed` at every
/// level, so the result is deterministic per seed.
pub fn louvain(graph: &ChannelGraph, seed: u64) -> Result<Partition> {
    let adj = graph.neighbor_lists();
    if adj.iter().all(Vec::is_empty) {
        return Err(Error::Domain("Louvain needs at least one channel".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = Level {
        links: adj.iter().map(|p| p.iter().map(|&w| (w, 1.0)).collect()).collect(),
        loops: vec![0.0; adj.len()],
    };
    let mut membership: Vec<usize> = (0..adj.len()).collect();
    let mut levels = Vec::new();
    loop {
        let (community, moved) = level.local_moves(&mut rng);
        if !moved {
            break;
        }
        let (next, relabel) = level.aggregate(&community);
        membership.iter_mut().for_each(|m| *m = relabel[*m]);
        levels.push(modularity(graph, &membership)?);
        level = next;
    }
    let membership = first_appearance(&membership);
    let communities = membership.iter().copied().max().map_or(0, |m| m + 1);
    let q = modularity(graph, &membership)?;
    Ok(Partition {
        membership,
        communities,
        modularity: q,
        levels,
    })
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
            g.add_channel(a, b, 5, 5, FeePolicy::free(), FeePolicy::free()).unwrap();
        }
        g
    }

    fn clique_links(offset: usize, size: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..size {
            for b in a + 1..size {
                out.push((offset + a, offset + b));
            }
        }
        out
    }

    #[test]
    fn two_cliques_split_cleanly() {
        let mut links = clique_links(0, 10);
        links.extend(clique_links(10, 10));
        let g = graph(20, &links);
        for seed in 0..5 {
            let p = louvain(&g, seed).unwrap();
            assert_eq!(p.communities, 2);
            assert!((p.modularity - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_graph_is_one_community() {
        let p = louvain(&graph(6, &clique_links(0, 6)), 3).unwrap();
        assert_eq!(p.communities, 1);
        assert!(p.modularity.abs() < 1e-12);
    }

    #[test]
    fn edgeless_graph_is_an_error() {
        assert!(louvain(&graph(3, &[]), 0).is_err());
        assert!(modularity(&graph(3, &[]), &[0, 0, 0]).is_err());
    }

    #[test]
    fn levels_never_decrease() {
        // ring of 6 triangles joined by single links
        let mut links = Vec::new();
        for t in 0..6 {
            let b = 3 * t;
            links.extend([(b, b + 1), (b + 1, b + 2), (b, b + 2), (b + 2, (b + 3) % 18)]);
        }
        let p = louvain(&graph(18, &links), 1).unwrap();
        assert!(p.levels.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(p.modularity > 0.4);
    }
}
