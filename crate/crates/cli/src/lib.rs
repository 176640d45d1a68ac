//! Configuration-driven pipeline runner for the interferometry toolkit:
//! simulate both antennas, backproject, form the interferogram and recover
//! the scatterer height, with every stage also runnable on its own from
//! serialized intermediates.

pub mod checks;
pub mod config;
pub mod manifest;
pub mod pipeline;
