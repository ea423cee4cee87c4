//! Differentiable first-order rule learning.

pub mod cluster;
pub mod datasets;
pub mod error;
pub mod invent;
pub mod kb;
pub mod logic;
pub mod network;
pub mod par;
pub mod pipeline;

pub use error::{Error, Result};
