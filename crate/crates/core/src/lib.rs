//! Planar cavity antennas for dipole emitters: transfer-matrix optics,
//! collected-power enhancement, design sweeps, and the curve-fitting models
//! used to characterize fabricated devices.

pub mod antenna_design;
pub mod dipole;
pub mod fitkit;
pub mod materials;
pub mod models;
pub mod pipeline;
pub mod stratified;
pub mod synth;
pub mod textio;
