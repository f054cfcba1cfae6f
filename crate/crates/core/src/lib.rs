//! Population-protocol simulation under the uniform random scheduler.
//!
//! The crate provides a deterministic engine ([`engine`]), the one-way
//! epidemic ([`epidemic`]), junta-driven modular phase clocks
//! ([`phase_clock`]), the `Forming_junta` level protocol ([`junta`]) and the
//! composed leader-election protocol in its fast and Las Vegas forms
//! ([`leader_election`]). [`analysis`] holds the monitors used to measure the
//! protocols, and [`verify`] turns those measurements into pass/fail checks.

pub mod analysis;
pub mod cli;
pub mod engine;
pub mod epidemic;
pub mod error;
pub mod junta;
pub mod leader_election;
pub mod phase_clock;
pub mod verify;

pub use engine::{
    parallel_time, run, trial_seed, Interaction, Monitor, MonitorCtx, Protocol, RunReport,
    Scheduler, SimConfig, Simulator, Variant,
};
pub use error::{ConfigError, EngineError, JuntaError};
