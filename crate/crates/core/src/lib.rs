//! Particle-in-cell solver for the Vlasov-Poisson system with massless
//! electrons on the periodic torus, with transport-distance diagnostics.

pub mod assignment;
pub mod dynamics;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod particles;
pub mod pic;
pub mod poisson;
pub mod sampling;
pub mod snapshot;
pub mod transport;

pub use error::{Result, VpmeError};
