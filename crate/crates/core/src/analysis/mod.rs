//! Decentralization analytics: centralities, distribution metrics,
//! communities and the network-evolution experiment.

pub mod centrality;
pub mod community;
pub mod distribution;
pub mod evolution;

pub use centrality::{closeness_centrality, eigenvector_centrality, CentralityReport};
pub use community::{louvain, modularity, Partition};
pub use distribution::{
    gini_index, renyi_entropy, shannon_entropy, Binning, DistributionMetrics, DEFAULT_BINS,
    DEFAULT_RENYI_ORDER,
};
pub use evolution::{
    evolve_network, heuristic_policy, CentralityComparison, Evolution, EvolutionConfig,
    EvolutionReport, HistogramTable, MetricDelta,
};
