//! Independent reference implementations shared by the integration and
//! acceptance tests. Everything here is brute force on purpose.

#![allow(dead_code)]

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_rational::BigRational;
use pcnsim::{ChannelGraph, FeePolicy, Msat};
use rand::Rng;

/// `round_half_up(amount * rate) + base` in exact rational arithmetic.
pub fn fee(amount: Msat, base: Msat, rate: f64) -> Msat {
    let exact = BigRational::from_float(rate).expect("finite rate") * BigInt::from(amount);
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let rounded = (exact + half).floor().to_integer();
    u64::try_from(rounded).expect("fits in u64") + base
}

/// Connected multigraph with `n` nodes: a random spanning tree plus extra
/// channels (parallel ones allowed), random per-direction fees and balances
/// scattered around `amount` so that capacity filtering matters.
pub fn random_graph(rng: &mut impl Rng, n: usize, amount: Msat) -> ChannelGraph {
    let mut g = ChannelGraph::new();
    for i in 0..n {
        g.add_node(format!("v{i}"), rng.gen_bool(0.3)).unwrap();
    }
    let policy = |rng: &mut dyn rand::RngCore| {
        let base = [0, 0, 1, 500, 1000, 1000, 2000][rng.gen_range(0..7)];
        let rate = [0.0, 0.000_001, 0.0001, 0.001, 0.002_5, 0.01][rng.gen_range(0..6)];
        FeePolicy::new(base, rate).unwrap()
    };
    let balance = |rng: &mut dyn rand::RngCore| {
        if rng.gen_bool(0.25) {
            rng.gen_range(1..amount)
        } else {
            rng.gen_range(amount..amount * 4)
        }
    };
    let mut links: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    for _ in 0..rng.gen_range(0..=n * 2) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            links.push((a, b));
        }
    }
    for (a, b) in links {
        let (pa, pb) = (policy(rng), policy(rng));
        let (ba, bb) = (balance(rng), balance(rng));
        g.add_channel(a, b, ba, bb, pa, pb).unwrap();
    }
    g
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct RouteKey {
    pub fee: Msat,
    pub hops: usize,
    pub nodes: Vec<usize>,
}

/// Best `(fee, hops, node sequence)` over every simple path whose edges all
/// carry `amount`, found by exhaustive depth-first enumeration.
pub fn best_route(g: &ChannelGraph, s: usize, r: usize, amount: Msat) -> Option<RouteKey> {
    fn walk(
        g: &ChannelGraph,
        r: usize,
        amount: Msat,
        nodes: &mut Vec<usize>,
        fee_so_far: Msat,
        best: &mut Option<RouteKey>,
    ) {
        let here = *nodes.last().unwrap();
        if here == r {
            let key = RouteKey {
                fee: fee_so_far,
                hops: nodes.len() - 1,
                nodes: nodes.clone(),
            };
            if best.as_ref().is_none_or(|b| key < *b) {
                *best = Some(key);
            }
            return;
        }
        for e in g.edges() {
            if e.src != here || e.balance < amount || nodes.contains(&e.dst) {
                continue;
            }
            nodes.push(e.dst);
            let f = fee(amount, e.base_fee, e.fee_rate);
            walk(g, r, amount, nodes, fee_so_far + f, best);
            nodes.pop();
        }
    }
    let mut best = None;
    walk(g, r, amount, &mut vec![s], 0, &mut best);
    best
}

/// Plain undirected simple graph on `n` nodes with each pair linked with
/// probability `p`.
pub fn random_simple_graph(rng: &mut impl Rng, n: usize, p: f64) -> ChannelGraph {
    let mut g = ChannelGraph::new();
    for i in 0..n {
        g.add_node(format!("v{i}"), false).unwrap();
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                g.add_channel(a, b, 10, 10, FeePolicy::free(), FeePolicy::free()).unwrap();
            }
        }
    }
    g
}

fn adjacency(g: &ChannelGraph) -> Vec<Vec<bool>> {
    let n = g.node_count();
    let mut adj = vec![vec![false; n]; n];
    for e in g.edges() {
        adj[e.src][e.dst] = true;
    }
    adj
}

/// All-pairs hop distances by BFS over an adjacency matrix (`None` when
/// unreachable).
pub fn hop_distances(g: &ChannelGraph) -> Vec<Vec<Option<usize>>> {
    let adj = adjacency(g);
    let n = adj.len();
    (0..n)
        .map(|s| {
            let mut dist = vec![None; n];
            dist[s] = Some(0);
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for w in 0..n {
                    if adj[v][w] && dist[w].is_none() {
                        dist[w] = Some(dist[v].unwrap() + 1);
                        queue.push_back(w);
                    }
                }
            }
            dist
        })
        .collect()
}

/// Betweenness by listing every shortest path explicitly and counting the
/// share passing through each node, over ordered pairs, normalized by
/// `(n - 1)(n - 2)`.
pub fn betweenness_by_enumeration(g: &ChannelGraph) -> Vec<f64> {
    let n = g.node_count();
    let mut out = vec![0.0; n];
    if n < 3 {
        return out;
    }
    let adj = adjacency(g);
    let dist = hop_distances(g);
    fn paths(adj: &[Vec<bool>], t: usize, len: usize, cur: &mut Vec<usize>, found: &mut Vec<Vec<usize>>) {
        let here = *cur.last().unwrap();
        if cur.len() - 1 == len {
            if here == t {
                found.push(cur.clone());
            }
            return;
        }
        for w in 0..adj.len() {
            if adj[here][w] && !cur.contains(&w) {
                cur.push(w);
                paths(adj, t, len, cur, found);
                cur.pop();
            }
        }
    }
    for s in 0..n {
        for t in 0..n {
            let Some(d) = dist[s][t] else { continue };
            if s == t {
                continue;
            }
            let mut found = Vec::new();
            paths(&adj, t, d, &mut vec![s], &mut found);
            let total = found.len() as f64;
            for v in 0..n {
                if v == s || v == t {
                    continue;
                }
                let through = found.iter().filter(|p| p.contains(&v)).count() as f64;
                out[v] += through / total;
            }
        }
    }
    let scale = ((n - 1) * (n - 2)) as f64;
    out.iter_mut().for_each(|x| *x /= scale);
    out
}

/// Flood fill from node 0 by repeated sweeps over the edge list.
pub fn is_connected(g: &ChannelGraph) -> bool {
    let n = g.node_count();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut grew = true;
    while grew {
        grew = false;
        for e in g.edges() {
            if seen[e.src] && !seen[e.dst] {
                seen[e.dst] = true;
                grew = true;
            }
        }
    }
    seen.iter().all(|&s| s)
}
