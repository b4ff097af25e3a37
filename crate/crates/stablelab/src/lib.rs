#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod drift;
pub mod error;
pub mod evolution;
pub mod formbound;
pub mod grid;
pub mod kernel;
pub mod operator;
pub mod quad;
pub mod report;
pub mod resolvent;
pub mod rng;
pub mod sampler;
pub mod scenarios;
pub mod sde;
pub mod spectral;
pub mod stats;
pub mod weighted;

pub use error::{Error, Result};
pub use grid::{Field, TorusGrid};
pub use operator::{LinearOperatorHandle, Operator};
