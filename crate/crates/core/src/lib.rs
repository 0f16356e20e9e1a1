//! Payment-channel-network simulator for joint node selection and capacity
//! allocation.
//!
//! An agent attaches a new node to a sampled neighborhood of a channel graph,
//! chooses one counterparty and a discrete budget share per step, and is
//! rewarded with the forwarding fees its inbound channels collect from
//! simulated traffic.

pub mod analysis;
pub mod env;
pub mod error;
pub mod graph;
pub mod heuristics;
pub mod protocol;
pub mod routing;
pub mod sampling;
pub mod snapshot;
pub mod synthetic;

pub use error::{Error, Result};
pub use graph::{Channel, ChannelEdge, ChannelGraph, FeePolicy, Msat, NodeRecord};
pub use routing::{
    cheapest_path, edge_fee, execute_transaction, filter_by_amount, generate_transactions,
    simulate_step, FlowConfig, FlowRecord, RouteResult, Transaction,
};
pub use sampling::{forest_fire_sample, sample_stream, SampleConfig, Sampler};
pub use snapshot::{load_snapshot, write_snapshot, SnapshotDocument};
pub use env::{
    build_observation, normalize_allocations, Action, AgentPolicy, Env, EnvConfig, Observation,
    StepInfo, StepOutcome,
};
pub use heuristics::{
    betweenness_centrality, degree_vector, run_heuristic, select_nodes, HeuristicKind,
};
pub use analysis::{evolve_network, EvolutionConfig, EvolutionReport};
pub use protocol::{Request, Response, Session, Transcript, PROTOCOL};
pub use synthetic::{scale_free_graph, SyntheticConfig};
