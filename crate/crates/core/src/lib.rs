//! Social graph synthesis: similarity- and influence-guided follow-chain
//! completion, tie-strength interaction generation, classical random-graph
//! baselines and structural metrics.

pub mod baselines;
pub mod builder;
pub mod config;
pub mod error;
pub mod fim;
pub mod graph;
pub mod gsi;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod profiles;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{EdgeKind, Interaction, NodeId, ReachabilityStats, SocialGraph};
pub use profiles::{cosine, Population, ProfileEmbedding, ProfileTable};
