//! Transmission constraint screening for DC unit commitment.

pub mod costbound;
pub mod demandset;
pub mod grid;
pub mod harness;
pub mod screening;
pub mod solver;
pub mod synth;
pub mod uc;
