//! Kidney exchange optimisation across cooperating countries.
//!
//! The crate covers the whole pipeline: compatibility graphs and random
//! instances, policy-aware enumeration of cycles and segments, binary
//! programs for national and international matching, an exact solver, the
//! three matching regimes, and a multi-stage simulator.

pub mod decode;
pub mod enumeration;
pub mod error;
pub mod format;
pub mod graph;
pub mod instance;
pub mod model;
pub mod policies;
pub mod policy;
pub mod simulator;
pub mod solver;

pub use decode::{decode, ExchangePlan};
pub use error::{ConfigError, DecodeError, GraphError, KepError, ModelError, ParseError, SolverError};
pub use graph::{CompatibilityGraph, CountryId, NodeId};
pub use policy::{Cap, CountryPolicy, PolicyConfig};
