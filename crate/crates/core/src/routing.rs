//! Traffic simulation: transaction generation, capacity-filtered cheapest-fee
//! routing and per-transaction liquidity updates.
//!
//! Fee accounting follows the inbound rule: a forwarding node earns the fee of
//! the edge through which the payment *entered* it. The route cost seen by the
//! sender is the sum of `edge_fee` over every traversed edge.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ChannelEdge, ChannelGraph, Msat};

/// `round(amount * fee_rate) + base_fee`, with the product computed exactly
/// from the binary value of `fee_rate` and rounded half up.
pub fn edge_fee(edge: &ChannelEdge, amount: Msat) -> Msat {
    proportional_fee(amount, edge.fee_rate) + edge.base_fee
}

fn proportional_fee(amount: Msat, rate: f64) -> Msat {
    if rate <= 0.0 || amount == 0 {
        return 0;
    }
    let bits = rate.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mantissa, exp) = if exp_bits == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    };
    let product = amount as u128 * mantissa as u128;
    if exp >= 0 {
        return (product << exp) as Msat;
    }
    let shift = (-exp) as u32;
    if shift >= 128 {
        return 0;
    }
    let half = 1u128 << (shift - 1);
    ((product + half) >> shift) as Msat
}

/// Edges able to carry `amount` right now. The graph itself is not touched.
#[derive(Clone, Copy, Debug)]
pub struct AmountView<'g> {
    graph: &'g ChannelGraph,
    amount: Msat,
}

impl<'g> AmountView<'g> {
    pub fn graph(&self) -> &'g ChannelGraph {
        self.graph
    }

    pub fn amount(&self) -> Msat {
        self.amount
    }

    pub fn contains(&self, edge: usize) -> bool {
        self.graph.edge(edge).balance >= self.amount
    }

    pub fn edges(&self) -> impl Iterator<Item = usize> + 'g {
        let amount = self.amount;
        let graph = self.graph;
        (0..graph.edge_count()).filter(move |&e| graph.edge(e).balance >= amount)
    }

    pub fn out_edges(&self, node: usize) -> impl Iterator<Item = usize> + 'g {
        let amount = self.amount;
        let graph = self.graph;
        graph
            .out_edges(node)
            .iter()
            .copied()
            .filter(move |&e| graph.edge(e).balance >= amount)
    }
}

pub fn filter_by_amount(graph: &ChannelGraph, amount: Msat) -> AmountView<'_> {
    AmountView { graph, amount }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: usize,
    pub receiver: usize,
    pub amount: Msat,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RouteResult {
    pub path: Vec<usize>,
    pub edge_ids: Vec<usize>,
    pub total_fee: Msat,
    pub success: bool,
}

impl RouteResult {
    fn failed() -> Self {
        RouteResult::default()
    }
}

#[derive(Clone, Copy)]
struct Label {
    fee: Msat,
    hops: usize,
    via: usize,
}

fn walk_back(labels: &[Option<Label>], graph: &ChannelGraph, sender: usize, mut node: usize) -> Vec<usize> {
    let mut path = vec![node];
    while node != sender {
        node = graph.edge(labels[node].expect("labelled").via).src;
        path.push(node);
    }
    path.reverse();
    path
}

/// Cheapest route for `amount` among edges whose balance covers it. Ties are
/// broken by hop count and then by the lexicographically smallest node
/// sequence; among parallel edges the lowest edge index wins.
pub fn cheapest_path(
    graph: &ChannelGraph,
    sender: usize,
    receiver: usize,
    amount: Msat,
) -> Result<RouteResult> {
    graph.check_node(sender)?;
    graph.check_node(receiver)?;
    if sender == receiver {
        return Err(Error::Validation("sender and receiver must differ".into()));
    }
    let view = filter_by_amount(graph, amount);
    let n = graph.node_count();
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0u64, 0usize, sender)));

    while let Some(Reverse((fee, hops, u))) = heap.pop() {
        if settled[u] {
            continue;
        }
        if u != sender {
            match labels[u] {
                Some(l) if l.fee == fee && l.hops == hops => {}
                _ => continue,
            }
        }
        settled[u] = true;
        if u == receiver {
            break;
        }
        for e in view.out_edges(u) {
            let edge = graph.edge(e);
            let v = edge.dst;
            if settled[v] {
                continue;
            }
            let cand_fee = fee + edge_fee(edge, amount);
            let cand_hops = hops + 1;
            let better = match labels[v] {
                None => true,
                Some(cur) => match (cand_fee, cand_hops).cmp(&(cur.fee, cur.hops)) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => {
                        let cur_src = graph.edge(cur.via).src;
                        cur_src != u
                            && walk_back(&labels, graph, sender, u)
                                < walk_back(&labels, graph, sender, cur_src)
                    }
                },
            };
            if better {
                let improves_key = labels[v].is_none_or(|c| (cand_fee, cand_hops) < (c.fee, c.hops));
                labels[v] = Some(Label {
                    fee: cand_fee,
                    hops: cand_hops,
                    via: e,
                });
                if improves_key {
                    heap.push(Reverse((cand_fee, cand_hops, v)));
                }
            }
        }
    }

    if !settled[receiver] {
        return Ok(RouteResult::failed());
    }
    let mut edge_ids = Vec::new();
    let mut node = receiver;
    while node != sender {
        let via = labels[node].expect("settled").via;
        edge_ids.push(via);
        node = graph.edge(via).src;
    }
    edge_ids.reverse();
    let path = walk_back(&labels, graph, sender, receiver);
    Ok(RouteResult {
        path,
        edge_ids,
        total_fee: labels[receiver].expect("settled").fee,
        success: true,
    })
}

/// Routes and settles one payment. Returns the route and the fee credited to
/// each strict intermediary, in path order.
pub fn execute_transaction(
    graph: &mut ChannelGraph,
    tx: &Transaction,
) -> Result<(RouteResult, Vec<(usize, Msat)>)> {
    let route = cheapest_path(graph, tx.sender, tx.receiver, tx.amount)?;
    if !route.success {
        return Ok((route, Vec::new()));
    }
    let credits: Vec<(usize, Msat)> = route
        .edge_ids
        .iter()
        .take(route.edge_ids.len() - 1)
        .map(|&e| {
            let edge = graph.edge(e);
            (edge.dst, edge_fee(edge, tx.amount))
        })
        .collect();
    for &e in &route.edge_ids {
        let moved = graph.shift_balance(e, tx.amount);
        debug_assert!(moved, "route used an edge without enough balance");
    }
    Ok((route, credits))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub amount_tiers: Vec<Msat>,
    pub count_per_tier: usize,
    pub provider_bias: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            amount_tiers: vec![10_000_000, 50_000_000, 100_000_000],
            count_per_tier: 200,
            provider_bias: 0.8,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.amount_tiers.is_empty() || self.amount_tiers.contains(&0) {
            return Err(Error::Config("amount tiers must be non-empty and positive".into()));
        }
        if !(0.0..=1.0).contains(&self.provider_bias) {
            return Err(Error::Config("provider_bias must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Draws `count_per_tier` payments per tier, then shuffles them into the
/// execution order. `excluded` (the agent) never sends or receives.
pub fn generate_transactions(
    graph: &ChannelGraph,
    cfg: &FlowConfig,
    excluded: Option<usize>,
    rng: &mut impl Rng,
) -> Vec<Transaction> {
    let eligible: Vec<usize> = (0..graph.node_count())
        .filter(|&n| Some(n) != excluded)
        .collect();
    if eligible.len() < 2 {
        return Vec::new();
    }
    let providers: Vec<usize> = graph.providers().filter(|&n| Some(n) != excluded).collect();
    let mut out = Vec::with_capacity(cfg.amount_tiers.len() * cfg.count_per_tier);
    for &amount in &cfg.amount_tiers {
        for _ in 0..cfg.count_per_tier {
            let receiver = if !providers.is_empty() && rng.gen_bool(cfg.provider_bias) {
                providers[rng.gen_range(0..providers.len())]
            } else {
                eligible[rng.gen_range(0..eligible.len())]
            };
            let pos = eligible.binary_search(&receiver).expect("receiver is eligible");
            let mut pick = rng.gen_range(0..eligible.len() - 1);
            if pick >= pos {
                pick += 1;
            }
            out.push(Transaction {
                sender: eligible[pick],
                receiver,
                amount,
            });
        }
    }
    out.shuffle(rng);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TxOutcome {
    pub tx: Transaction,
    pub success: bool,
    pub total_fee: Msat,
}

/// Per-step traffic record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowRecord {
    /// Amounts carried by each edge this step, indexed by edge index.
    pub edge_flows: Vec<Vec<Msat>>,
    /// Volume each node forwarded as an intermediary.
    pub node_volume: Vec<Msat>,
    /// Fees each node earned as an intermediary.
    pub node_fees: Vec<Msat>,
    pub succeeded: usize,
    pub failed: usize,
    pub log: Vec<TxOutcome>,
}

impl FlowRecord {
    pub fn empty(graph: &ChannelGraph) -> Self {
        FlowRecord {
            edge_flows: vec![Vec::new(); graph.edge_count()],
            node_volume: vec![0; graph.node_count()],
            node_fees: vec![0; graph.node_count()],
            ..Default::default()
        }
    }

    pub fn report(&self, graph: &ChannelGraph) -> FlowReport {
        FlowReport {
            succeeded: self.succeeded,
            failed: self.failed,
            nodes: graph
                .nodes()
                .iter()
                .map(|n| NodeFlow {
                    node_id: n.node_id.clone(),
                    volume_msat: self.node_volume[n.index],
                    fees_msat: self.node_fees[n.index],
                })
                .collect(),
        }
    }
}

/// Serializable summary of a [`FlowRecord`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub succeeded: usize,
    pub failed: usize,
    pub nodes: Vec<NodeFlow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeFlow {
    pub node_id: String,
    pub volume_msat: Msat,
    pub fees_msat: Msat,
}

/// Executes an explicit transaction list in order against the live graph.
pub fn replay_transactions(graph: &mut ChannelGraph, txs: &[Transaction]) -> FlowRecord {
    let mut record = FlowRecord::empty(graph);
    for tx in txs {
        let (route, credits) =
            execute_transaction(graph, tx).expect("generated transactions are valid");
        if route.success {
            record.succeeded += 1;
            for &e in &route.edge_ids {
                record.edge_flows[e].push(tx.amount);
            }
            for (node, fee) in credits {
                record.node_volume[node] += tx.amount;
                record.node_fees[node] += fee;
            }
        } else {
            record.failed += 1;
        }
        record.log.push(TxOutcome {
            tx: tx.clone(),
            success: route.success,
            total_fee: route.total_fee,
        });
    }
    record
}

/// One traffic step: generate payments and execute them one by one, so
/// liquidity shifts made by earlier payments constrain later ones.
pub fn simulate_step(
    graph: &mut ChannelGraph,
    cfg: &FlowConfig,
    excluded: Option<usize>,
    rng: &mut impl Rng,
) -> FlowRecord {
    let txs = generate_transactions(graph, cfg, excluded, rng);
    replay_transactions(graph, &txs)
}
