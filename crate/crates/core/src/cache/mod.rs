//! Traffic prediction: the analytic layer-condition model and a cache simulator.

pub mod lc;
pub mod sim;
pub mod stream;

use serde::{Deserialize, Serialize};

use crate::machine::CacheLevelSpec;

pub use lc::{
    layer_conditions, lc_break_size, reuse_distances, BreakSize, Dimensionality, LayerCondition, LcModel, LcOptions,
    StreamAccounting, DEFAULT_SAFETY,
};
pub use sim::{simulate_cache, CacheHierarchySim, LevelCounters, SimOptions, SimReport};
pub use stream::{address_stream, write_trace, Access, AccessKind, Layout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    LayerCondition,
    Simulation,
    Measured,
}

/// Traffic over the link below one cache level, per cacheline of work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTraffic {
    /// `L1L2`, `L2L3` or `L3MEM`.
    pub link: String,
    pub load_bytes_per_cl: f64,
    pub store_bytes_per_cl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficPrediction {
    pub predictor: Predictor,
    /// Register to L1 accesses per lattice update.
    pub reg_load_elements: f64,
    pub reg_store_elements: f64,
    /// One entry per cache level, closest level first.
    pub links: Vec<LinkTraffic>,
}

impl TrafficPrediction {
    pub fn link(&self, name: &str) -> Option<&LinkTraffic> {
        self.links.iter().find(|l| l.link == name)
    }
}

/// Name of the link between `level` and the next level (or memory).
pub fn link_name(levels: &[CacheLevelSpec], level: &CacheLevelSpec) -> String {
    let pos = levels
        .iter()
        .position(|l| std::ptr::eq(l, level))
        .or_else(|| levels.iter().position(|l| l.name == level.name))
        .unwrap_or(0);
    let below = levels
        .get(pos + 1)
        .map(|l| l.name.to_uppercase())
        .unwrap_or_else(|| "MEM".to_string());
    format!("{}{below}", level.name.to_uppercase())
}
