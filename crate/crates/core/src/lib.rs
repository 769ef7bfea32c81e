//! Categorical data embedding with attention over value-coupling networks.
//!
//! A categorical dataset becomes two weighted graphs over its attribute
//! values: an inter-attribute co-occurrence network and an intra-attribute
//! similarity network. Multi-head graph attention embeds every value in each
//! network, an importance score fuses the two views, and objects are the
//! concatenation of their values' fused vectors. Training pulls values
//! together in proportion to how strongly they co-occur.

pub mod cavnet;
pub mod dataset;
pub mod encoders;
pub mod evaluation;
pub mod kv;
pub mod model;
pub mod numeric;
pub mod training;

pub use cavnet::{CavNodeSet, EdgeSet, HetNet, Network, NodeId};
pub use dataset::{Cad, DatasetManifest};
pub use model::{EmbeddingTable, NecaConfig, NecaParams};
pub use training::{TrainConfig, TrainReport};
