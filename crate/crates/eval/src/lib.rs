//! Training, evaluation protocols and reporting for the gesture network.

pub mod corpus;
pub mod metrics;
pub mod optim;
pub mod protocol;
pub mod report;
pub mod split;
pub mod train;

pub use metrics::Metrics;
pub use optim::{lr_schedule, Adam, AdamParams};
pub use protocol::{run_protocol, run_protocol_with, ProtocolConfig, ProtocolReport, RunResult};
pub use split::{make_split, Protocol, Split, SplitKey, SplitSpec};
pub use train::{evaluate, predict, train, Sample, TrainConfig, TrainError};
