//! Online travel-time estimation for mobile robots on topological maps.
//!
//! Edge costs are travel times. They are estimated with a per-edge scalar
//! random-walk Kalman filter ([`kf_static`]) or a bilinear state-dependent
//! model ([`kf_dynamic`]), and fed to Dijkstra's algorithm through a
//! pluggable [`planner::CostProvider`]. A seeded simulator ([`worldsim`])
//! supplies ground truth under battery drain and floor roughness.
//!
//! The crate is `no_std` (with `alloc`). Enable the `std` feature for
//! `std::error::Error` integration in downstream binaries.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod kf_dynamic;
pub mod kf_static;
pub mod mapfile;
pub mod planner;
pub mod stats;
pub mod topomap;
pub mod worldsim;

pub use error::{FilterError, MapError, PlanError, SimError};
pub use topomap::{builtin_map, BuiltinMap, EdgeId, NodeId, RoughnessZone, TopologyMap};

/// Lower clamp applied to every travel-time estimate, in seconds.
pub const EPS_TIME: f64 = 1e-3;
