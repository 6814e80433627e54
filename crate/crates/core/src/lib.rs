//! Stencil performance-engineering toolkit.
//!
//! Kernels are described by a six-parameter classification ([`stencil::StencilSpec`]),
//! lowered to a small IR, emitted as benchmarkable C, and analysed with layer
//! conditions, a multi-level LRU cache simulator and the ECM / Roofline models
//! driven by declarative machine files.

pub mod bench;
pub mod cache;
pub mod error;
pub mod machine;
pub mod models;
pub mod stencil;
pub mod workflow;

pub use error::{Error, Result};
