//! Floquet analysis of limit-cycle oscillators, master stability functions and
//! simulation of diffusively coupled oscillator networks.

pub mod error;
pub mod floquet;
pub mod limit_cycle;
pub mod linalg;
pub mod models;
pub mod msf;
pub mod network;
pub mod ode;

pub use error::{Error, Result};
