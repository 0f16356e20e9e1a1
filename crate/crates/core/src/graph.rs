//! Channel-graph data model.
//!
//! A channel between `a` and `b` is stored as two directed half-edges that sit
//! next to each other in the edge list: channel `c` owns edges `2c` (a→b) and
//! `2c + 1` (b→a). The reverse of edge `e` is therefore always `e ^ 1`, and the
//! sum of both balances stays equal to the capacity recorded when the channel
//! was opened.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amounts are integer millisatoshis throughout.
pub type Msat = u64;

/// Forwarding fee charged on one channel direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeePolicy {
    pub base_fee: Msat,
    pub fee_rate: f64,
}

impl FeePolicy {
    pub fn new(base_fee: Msat, fee_rate: f64) -> Result<Self> {
        let policy = FeePolicy { base_fee, fee_rate };
        policy.validate()?;
        Ok(policy)
    }

    pub fn free() -> Self {
        FeePolicy {
            base_fee: 0,
            fee_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.fee_rate.is_finite() || self.fee_rate < 0.0 || self.fee_rate >= 1.0 {
            return Err(Error::Validation(format!(
                "fee rate {} outside [0, 1)",
                self.fee_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeRecord {
    pub node_id: String,
    pub index: usize,
    pub is_provider: bool,
}

/// One direction of a channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelEdge {
    pub src: usize,
    pub dst: usize,
    pub base_fee: Msat,
    pub fee_rate: f64,
    /// Outbound liquidity of `src` toward `dst`.
    pub balance: Msat,
    /// Index of the owning channel; both halves share it.
    pub channel: usize,
}

impl ChannelEdge {
    pub fn policy(&self) -> FeePolicy {
        FeePolicy {
            base_fee: self.base_fee,
            fee_rate: self.fee_rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Channel {
    pub id: String,
    pub capacity: Msat,
}

#[derive(Clone, Debug, Default)]
pub struct ChannelGraph {
    nodes: Vec<NodeRecord>,
    edges: Vec<ChannelEdge>,
    channels: Vec<Channel>,
    adjacency: Vec<Vec<usize>>,
    node_lookup: HashMap<String, usize>,
    channel_ids: HashSet<String>,
    next_channel_seq: u64,
}

impl ChannelGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a node and returns its dense index.
    pub fn add_node(&mut self, node_id: impl Into<String>, is_provider: bool) -> Result<usize> {
        let node_id = node_id.into();
        if self.node_lookup.contains_key(&node_id) {
            return Err(Error::Validation(format!("duplicate node id {node_id:?}")));
        }
        let index = self.nodes.len();
        self.node_lookup.insert(node_id.clone(), index);
        self.nodes.push(NodeRecord {
            node_id,
            index,
            is_provider,
        });
        self.adjacency.push(Vec::new());
        Ok(index)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &NodeRecord {
        &self.nodes[index]
    }

    pub fn edges(&self) -> &[ChannelEdge] {
        &self.edges
    }

    pub fn edge(&self, edge: usize) -> &ChannelEdge {
        &self.edges[edge]
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, channel: usize) -> &Channel {
        &self.channels[channel]
    }

    /// The two half-edges of a channel, in creation order.
    pub fn channel_edges(&self, channel: usize) -> (usize, usize) {
        (2 * channel, 2 * channel + 1)
    }

    pub fn reverse_edge(edge: usize) -> usize {
        edge ^ 1
    }

    /// Outgoing edge indices of `node`.
    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn index_of(&self, node_id: &str) -> Option<usize> {
        self.node_lookup.get(node_id).copied()
    }

    pub fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.nodes.len() {
            return Err(Error::NodeOutOfRange {
                index: node,
                len: self.nodes.len(),
            });
        }
        Ok(())
    }

    pub fn providers(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter(|n| n.is_provider).map(|n| n.index)
    }

    /// Opens a channel `u`↔`v`. Each side's balance equals its own funding and
    /// each direction carries the policy of the party that owns its outbound side.
    pub fn add_channel(
        &mut self,
        u: usize,
        v: usize,
        funding_u: Msat,
        funding_v: Msat,
        policy_u: FeePolicy,
        policy_v: FeePolicy,
    ) -> Result<(usize, usize)> {
        self.check_node(u)?;
        self.check_node(v)?;
        let id = self.fresh_channel_id(u, v);
        self.add_channel_with_id(id, u, v, funding_u, funding_v, policy_u, policy_v)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn add_channel_with_id(
        &mut self,
        id: String,
        u: usize,
        v: usize,
        funding_u: Msat,
        funding_v: Msat,
        policy_u: FeePolicy,
        policy_v: FeePolicy,
    ) -> Result<(usize, usize)> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Err(Error::SelfChannel(u));
        }
        if funding_u == 0 && funding_v == 0 {
            return Err(Error::Validation(format!(
                "channel {id:?} has zero total funding"
            )));
        }
        policy_u.validate()?;
        policy_v.validate()?;
        if self.channel_ids.contains(&id) {
            return Err(Error::Validation(format!("duplicate channel id {id:?}")));
        }
        let capacity = funding_u
            .checked_add(funding_v)
            .ok_or_else(|| Error::Validation(format!("channel {id:?} capacity overflows")))?;

        let channel = self.channels.len();
        self.channel_ids.insert(id.clone());
        self.channels.push(Channel { id, capacity });
        let forward = self.edges.len();
        self.edges.push(ChannelEdge {
            src: u,
            dst: v,
            base_fee: policy_u.base_fee,
            fee_rate: policy_u.fee_rate,
            balance: funding_u,
            channel,
        });
        self.edges.push(ChannelEdge {
            src: v,
            dst: u,
            base_fee: policy_v.base_fee,
            fee_rate: policy_v.fee_rate,
            balance: funding_v,
            channel,
        });
        self.adjacency[u].push(forward);
        self.adjacency[v].push(forward + 1);
        Ok((forward, forward + 1))
    }

    fn fresh_channel_id(&mut self, u: usize, v: usize) -> String {
        loop {
            self.next_channel_seq += 1;
            let id = format!(
                "{}-{}-{}",
                self.nodes[u].node_id, self.nodes[v].node_id, self.next_channel_seq
            );
            if !self.channel_ids.contains(&id) {
                return id;
            }
        }
    }

    /// Removes one channel (both halves). Channel and edge indices above it shift down.
    pub fn remove_channel(&mut self, channel: usize) {
        let mut seen = 0usize;
        self.retain_channels(|_| {
            let keep = seen != channel;
            seen += 1;
            keep
        });
    }

    /// Removes every channel incident to `node` and returns how many were removed.
    pub fn remove_channels_of(&mut self, node: usize) -> usize {
        let before = self.channels.len();
        let incident: Vec<bool> = (0..before)
            .map(|c| {
                let e = &self.edges[2 * c];
                e.src == node || e.dst == node
            })
            .collect();
        let mut i = 0usize;
        self.retain_channels(|_| {
            let keep = !incident[i];
            i += 1;
            keep
        });
        before - self.channels.len()
    }

    /// Keeps the channels for which `keep` returns true (visited in index
    /// order) and rebuilds edge indices and adjacency.
    fn retain_channels(&mut self, mut keep: impl FnMut(&Channel) -> bool) {
        let old_channels = std::mem::take(&mut self.channels);
        let old_edges = std::mem::take(&mut self.edges);
        for list in &mut self.adjacency {
            list.clear();
        }
        let mut edge_iter = old_edges.into_iter();
        for channel in old_channels {
            let forward = edge_iter.next().expect("paired edge");
            let backward = edge_iter.next().expect("paired edge");
            if !keep(&channel) {
                self.channel_ids.remove(&channel.id);
                continue;
            }
            let index = self.channels.len();
            self.channels.push(channel);
            for mut edge in [forward, backward] {
                edge.channel = index;
                self.adjacency[edge.src].push(self.edges.len());
                self.edges.push(edge);
            }
        }
    }

    /// Moves `amount` of liquidity across edge `edge` (from its src to its dst).
    /// Returns false, leaving the graph unchanged, if the balance is short.
    pub fn shift_balance(&mut self, edge: usize, amount: Msat) -> bool {
        if self.edges[edge].balance < amount {
            return false;
        }
        self.edges[edge].balance -= amount;
        self.edges[edge ^ 1].balance += amount;
        true
    }

    /// Component-wise median of (base_fee, fee_rate) over all directed edges;
    /// even counts take the lower median.
    pub fn median_fee_policy(&self) -> Result<FeePolicy> {
        if self.edges.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut bases: Vec<Msat> = self.edges.iter().map(|e| e.base_fee).collect();
        let mut rates: Vec<f64> = self.edges.iter().map(|e| e.fee_rate).collect();
        let mid = (self.edges.len() - 1) / 2;
        let (_, base, _) = bases.select_nth_unstable(mid);
        let (_, rate, _) = rates.select_nth_unstable_by(mid, f64::total_cmp);
        Ok(FeePolicy {
            base_fee: *base,
            fee_rate: *rate,
        })
    }

    /// Sorted, de-duplicated channel peers of `node`.
    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.adjacency[node]
            .iter()
            .map(|&e| self.edges[e].dst)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Simple undirected adjacency lists (parallel channels collapsed).
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        (0..self.nodes.len()).map(|n| self.neighbors(n)).collect()
    }

    /// Number of distinct channel peers.
    pub fn degree(&self, node: usize) -> usize {
        self.neighbors(node).len()
    }

    /// Connected components over undirected channel links, largest first
    /// (ties by smallest member). Members are sorted.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut members = vec![start];
            while let Some(u) = queue.pop_front() {
                for &e in &self.adjacency[u] {
                    let v = self.edges[e].dst;
                    if !seen[v] {
                        seen[v] = true;
                        members.push(v);
                        queue.push_back(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        out
    }

    pub fn largest_component(&self) -> Vec<usize> {
        self.components().into_iter().next().unwrap_or_default()
    }

    pub fn is_connected(&self) -> bool {
        self.nodes.is_empty() || self.components().len() == 1
    }

    /// Node-induced subgraph. Nodes keep their ids and provider flags and are
    /// re-indexed in ascending order of their parent index; every channel with
    /// both ends selected is copied with its balances, policies and id.
    pub fn induced_subgraph(&self, selected: &[usize]) -> Result<ChannelGraph> {
        let mut members: Vec<usize> = selected.to_vec();
        members.sort_unstable();
        members.dedup();
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut sub = ChannelGraph::new();
        for &old in &members {
            self.check_node(old)?;
            let node = &self.nodes[old];
            remap[old] = sub.add_node(node.node_id.clone(), node.is_provider)?;
        }
        for (c, channel) in self.channels.iter().enumerate() {
            let forward = &self.edges[2 * c];
            let backward = &self.edges[2 * c + 1];
            let (a, b) = (remap[forward.src], remap[forward.dst]);
            if a == usize::MAX || b == usize::MAX {
                continue;
            }
            sub.add_channel_with_id(
                channel.id.clone(),
                a,
                b,
                forward.balance,
                backward.balance,
                forward.policy(),
                backward.policy(),
            )?;
        }
        Ok(sub)
    }

    /// Checks the structural invariants: paired mirrored edges, capacity
    /// conservation, consistent adjacency. Returns a description of the first
    /// violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.edges.len() != 2 * self.channels.len() {
            return Err("edge count is not twice the channel count".into());
        }
        for (c, channel) in self.channels.iter().enumerate() {
            let f = &self.edges[2 * c];
            let b = &self.edges[2 * c + 1];
            if f.src != b.dst || f.dst != b.src || f.src == f.dst {
                return Err(format!("channel {} halves are not mirrored", channel.id));
            }
            if f.channel != c || b.channel != c {
                return Err(format!("channel {} has stale edge back-references", channel.id));
            }
            if f.balance + b.balance != channel.capacity {
                return Err(format!(
                    "channel {}: balances {} + {} != capacity {}",
                    channel.id, f.balance, b.balance, channel.capacity
                ));
            }
        }
        let mut listed = 0;
        for (node, list) in self.adjacency.iter().enumerate() {
            for &e in list {
                if e >= self.edges.len() || self.edges[e].src != node {
                    return Err(format!("adjacency of node {node} lists foreign edge {e}"));
                }
                listed += 1;
            }
        }
        if listed != self.edges.len() {
            return Err("adjacency does not cover every edge exactly once".into());
        }
        Ok(())
    }
}
