//! Simulator for direct characterization of Kraus operators, POVM elements,
//! unitaries, observables and density matrices from a single mixed input
//! state, using a probe qubit that controls two branches of system (and
//! environment) evolution.

pub mod characterize;
pub mod error;
pub mod harness;
pub mod matcore;
pub mod protocol;
pub mod quantum;
pub mod serial;

pub use error::{Error, Result};
pub use matcore::{CMatrix, C64};
