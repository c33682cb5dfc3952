//! Simulation and rare-event estimation for a two-server FCFS queue fed by
//! regularly varying job sizes at traffic intensity 1.
//!
//! The crate is organized as a library; `examples/` holds one runnable
//! example per capability and a thin `heavytail` binary exposes the same
//! pipelines as subcommands. Modules:
//!
//! - [`dist`]: service/interarrival laws and regular-variation checks
//! - [`increment`]: the walk increment `X = V - T` (exact tails by quadrature)
//! - [`queue`]: the Kiefer-Wolfowitz recursion and regenerative cycles
//! - [`estimators`]: steady-state tail estimators with confidence intervals
//! - [`rare_event`]: lower-bound event estimators and Lyapunov importance
//!   sampling for hitting probabilities
//! - [`walk`]: random-walk maxima and their Brownian / stable comparators
//! - [`asymptotics`]: tail-shape targets, log-log slope fits, and the
//!   one-jump vs two-jump dominance classifier
//! - [`cli`]: the command-line front end (config parsing, CSV emission)
//!
//! Reproducibility contract: every estimator takes a 64-bit seed and derives
//! one counter-based RNG stream per replication, so results are bit-identical
//! across thread counts and re-runs.

pub mod asymptotics;
pub mod cli;
pub mod dist;
pub mod error;
pub mod estimators;
pub mod increment;
pub mod numeric;
pub mod queue;
pub mod rare_event;
pub mod rng;
pub mod walk;

pub use error::{Error, Result};
