//! Streaming anomaly detection on continuous-time dynamic graphs from
//! self-supervised node memories.

pub mod error;
pub mod memory;
pub mod model;
pub mod stream;
pub mod tensor;
pub mod train;
pub mod score;
pub mod metrics;
pub mod bench;
pub mod config;
pub mod datasets;
pub mod diagnostics;

pub use error::{Error, Result};
pub use config::RunConfig;
pub use memory::{MemoryStore, NodeMemory};
pub use metrics::{auc, average_precision, MetricReport};
pub use model::{Generator, ModelConfig, Slade, Updater};
pub use score::{ScoreRecord, TypeTag};
pub use stream::{EdgeStream, NodeId, SplitRatios, TemporalEdge};
pub use train::{train, TrainConfig, TrainReport};
