//! Trace-driven DRAM power-management simulator with rank-aware page
//! placement and adaptive low-power state demotion.

pub mod arch;
pub mod demotion;
pub mod engine;
pub mod idlehist;
pub mod mq;
pub mod placement;
pub mod predictor;
pub mod trace;

pub use arch::{DramArchSpec, PowerStateSpec};
pub use demotion::{ChainModel, DemotionConfig, Objective};
pub use engine::{run_simulation, Policy, SimMetrics, SimParams};
pub use idlehist::{IdleHistogram, SparseHistogram};
pub use mq::MqStructure;
pub use trace::{MemoryAccess, SyntheticTraceParams};
