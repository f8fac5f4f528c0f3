//! Dense tensors, reverse-mode differentiation and the attention-based
//! gesture network built on them.

pub mod checkpoint;
pub mod graph;
pub mod layers;
pub mod net;
pub mod ops;
pub mod param;
pub mod scalar;
pub mod tensor;

pub use graph::{Graph, Var};
pub use layers::Mode;
pub use net::{GestureNet, NetConfig};
pub use param::{ParamId, ParamStore, Parameter};
pub use scalar::Scalar;
pub use tensor::{NnError, Result, Tensor};
