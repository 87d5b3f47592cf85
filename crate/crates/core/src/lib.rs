//! Leader election in anonymous radio networks with collision detection.
//!
//! A [`Configuration`] is a connected graph whose nodes wake up at
//! individual rounds. [`classify`] decides whether any deterministic
//! protocol can elect a leader on it; for feasible configurations
//! [`build_canonical`] yields a protocol that [`simulator::run`] executes on
//! a synchronous radio channel, and [`elect`] names the leader.

pub mod classifier;
pub mod config;
pub mod drip;
pub mod election;
pub mod simulator;

pub use classifier::{classify, PartitionTrace, Verdict};
pub use config::{parse_configuration, validate, Configuration};
pub use drip::{build_canonical, Action, CanonicalProtocol, Drip, History, HistoryEntry};
pub use election::{cross_check, elect, ElectionResult, OracleReport};
pub use simulator::{run, ExecutionTrace, SimOptions};
