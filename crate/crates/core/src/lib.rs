//! Kerr nonlinearity toolkit for Josephson-junction microwave circuits.
//!
//! Linear embedding networks, junction constitutive models, single-mode
//! black-box quantization, Duffing analytics, a multi-tone harmonic-balance
//! engine with a transient cross-check, and resonance fitting.

pub mod constants;
pub mod netlist;
pub mod junction;
pub mod bbq;
pub mod duffing;
pub mod fitres;
pub mod hb;
pub mod io;
pub mod presets;
pub mod config;
pub mod pipeline;
