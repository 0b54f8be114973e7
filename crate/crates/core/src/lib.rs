//! Min-max user energy optimization for an uplink network served by an IRS
//! carried on a UAV.
//!
//! The pipeline alternates a scheduling LP, a trajectory SCA and a
//! reflection-coefficient SCA, with closed-form phase shifts recomputed from
//! the geometry. Every subproblem is expressed as a
//! [`irsuav_conic::ConicProgram`].

pub mod channel;
pub mod energy;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod orchestrator;
pub mod phase;
pub mod rate;
pub mod reflection;
pub mod scenario;
pub mod scenario_file;
pub mod scheduling;
pub mod trajectory;
