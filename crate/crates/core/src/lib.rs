//! Hypothesis-driven attack framework for consensus protocol
//! implementations: an orchestrator, a strategy agent, and a test
//! generation agent cooperate to propose, constrain, and execute
//! fault-injection scenarios against a target repository.

pub mod config;
pub mod error;
pub mod gateway;
pub mod events;
pub mod knowledge;
pub mod memory;
pub mod model;
pub mod orchestrator;
pub mod persist;
pub mod prompts;
pub mod sandbox;
pub mod strategy;
pub mod testgen;

pub use error::{BackendError, Error, Result};
