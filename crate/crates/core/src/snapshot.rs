//! Snapshot document format.
//!
//! ```json
//! {
//!   "nodes": [{"id": "alice", "provider": false}, ...],
//!   "channels": [{"id": "c1", "a": "alice", "b": "bob", "capacity_msat": 2000000,
//!                 "balance_a_msat": 1000000,
//!                 "base_fee_a_msat": 1000, "fee_rate_a": 0.000001,
//!                 "base_fee_b_msat": 1000, "fee_rate_b": 0.000001}, ...]
//! }
//! ```
//!
//! Missing fee fields default to zero. Without `balance_a_msat` the capacity is
//! split evenly (the odd msat goes to side `b`).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ChannelGraph, FeePolicy, Msat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotNode {
    pub id: String,
    #[serde(default)]
    pub provider: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotChannel {
    pub id: String,
    pub a: String,
    pub b: String,
    pub capacity_msat: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance_a_msat: Option<i64>,
    #[serde(default)]
    pub base_fee_a_msat: i64,
    #[serde(default)]
    pub fee_rate_a: f64,
    #[serde(default)]
    pub base_fee_b_msat: i64,
    #[serde(default)]
    pub fee_rate_b: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotDocument {
    pub nodes: Vec<SnapshotNode>,
    #[serde(default)]
    pub channels: Vec<SnapshotChannel>,
}

impl SnapshotDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("top level must be an object".into()))?;
        // Decode record by record so errors can name the offending entry.
        let nodes = match obj.get("nodes") {
            Some(serde_json::Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, item)| {
                    serde_json::from_value::<SnapshotNode>(item.clone())
                        .map_err(|e| Error::Parse(format!("nodes[{i}]: {e}")))
                })
                .collect::<Result<Vec<_>>>()?,
            Some(_) => return Err(Error::Parse("`nodes` must be a list".into())),
            None => return Err(Error::Parse("missing `nodes`".into())),
        };
        let channels = match obj.get("channels") {
            Some(serde_json::Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, item)| {
                    let label = item
                        .get("id")
                        .and_then(|v| v.as_str())
                        .map(|id| format!("channels[{i}] ({id:?})"))
                        .unwrap_or_else(|| format!("channels[{i}]"));
                    serde_json::from_value::<SnapshotChannel>(item.clone())
                        .map_err(|e| Error::Parse(format!("{label}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?,
            Some(_) => return Err(Error::Parse("`channels` must be a list".into())),
            None => Vec::new(),
        };
        if let Some(key) = obj.keys().find(|k| *k != "nodes" && *k != "channels") {
            return Err(Error::Parse(format!("unknown top-level key {key:?}")));
        }
        Ok(SnapshotDocument { nodes, channels })
    }

    pub fn into_graph(self) -> Result<ChannelGraph> {
        let mut graph = ChannelGraph::new();
        for node in self.nodes {
            graph.add_node(node.id, node.provider)?;
        }
        for ch in self.channels {
            let lookup = |id: &str| {
                graph.index_of(id).ok_or_else(|| {
                    Error::Validation(format!("channel {:?} references unknown node {id:?}", ch.id))
                })
            };
            let a = lookup(&ch.a)?;
            let b = lookup(&ch.b)?;
            let non_negative = |field: &str, v: i64| -> Result<Msat> {
                u64::try_from(v).map_err(|_| {
                    Error::Validation(format!("channel {:?}: negative {field} {v}", ch.id))
                })
            };
            let capacity = non_negative("capacity_msat", ch.capacity_msat)?;
            let balance_a = match ch.balance_a_msat {
                Some(v) => non_negative("balance_a_msat", v)?,
                None => capacity / 2,
            };
            if balance_a > capacity {
                return Err(Error::Validation(format!(
                    "channel {:?}: balance_a_msat {balance_a} exceeds capacity {capacity}",
                    ch.id
                )));
            }
            let policy = |base: i64, rate: f64, side: &str| -> Result<FeePolicy> {
                let base = non_negative(&format!("base_fee_{side}_msat"), base)?;
                FeePolicy::new(base, rate)
                    .map_err(|e| Error::Validation(format!("channel {:?}: {e}", ch.id)))
            };
            let policy_a = policy(ch.base_fee_a_msat, ch.fee_rate_a, "a")?;
            let policy_b = policy(ch.base_fee_b_msat, ch.fee_rate_b, "b")?;
            graph
                .add_channel_with_id(
                    ch.id.clone(),
                    a,
                    b,
                    balance_a,
                    capacity - balance_a,
                    policy_a,
                    policy_b,
                )
                .map_err(|e| match e {
                    Error::SelfChannel(_) => {
                        Error::Validation(format!("channel {:?} connects a node to itself", ch.id))
                    }
                    other => other,
                })?;
        }
        Ok(graph)
    }

    /// Document for `graph`, sorted by node id and channel id. Each channel is
    /// written from the side whose half-edge was created first.
    pub fn from_graph(graph: &ChannelGraph) -> Self {
        let mut nodes: Vec<SnapshotNode> = graph
            .nodes()
            .iter()
            .map(|n| SnapshotNode {
                id: n.node_id.clone(),
                provider: n.is_provider,
            })
            .collect();
        nodes.sort_by(|x, y| x.id.cmp(&y.id));
        let mut channels: Vec<SnapshotChannel> = (0..graph.channel_count())
            .map(|c| {
                let (f, b) = graph.channel_edges(c);
                let (f, b) = (graph.edge(f), graph.edge(b));
                SnapshotChannel {
                    id: graph.channel(c).id.clone(),
                    a: graph.node(f.src).node_id.clone(),
                    b: graph.node(f.dst).node_id.clone(),
                    capacity_msat: graph.channel(c).capacity as i64,
                    balance_a_msat: Some(f.balance as i64),
                    base_fee_a_msat: f.base_fee as i64,
                    fee_rate_a: f.fee_rate,
                    base_fee_b_msat: b.base_fee as i64,
                    fee_rate_b: b.fee_rate,
                }
            })
            .collect();
        channels.sort_by(|x, y| x.id.cmp(&y.id));
        SnapshotDocument { nodes, channels }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("snapshot serializes");
        text.push('\n');
        text
    }
}

pub fn load_snapshot(mut source: impl Read) -> Result<ChannelGraph> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    SnapshotDocument::parse(&text)?.into_graph()
}

pub fn write_snapshot(graph: &ChannelGraph, mut sink: impl Write) -> Result<()> {
    sink.write_all(SnapshotDocument::from_graph(graph).to_json().as_bytes())?;
    Ok(())
}

pub fn snapshot_to_string(graph: &ChannelGraph) -> String {
    SnapshotDocument::from_graph(graph).to_json()
}
