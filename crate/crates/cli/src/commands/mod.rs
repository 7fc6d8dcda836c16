pub mod ablate;
pub mod agent;
pub mod bootstrap;
pub mod eval;
pub mod extract;
pub mod monitor;
pub mod synth;
pub mod train;
mod signal;
