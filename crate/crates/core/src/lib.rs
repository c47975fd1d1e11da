//! Channel-adapted quantum error recovery.

pub mod error;
pub mod opalg;

pub use error::{QerError, Result};
pub mod channels;
pub mod codes;
pub mod fidelity;
pub mod sdp;
pub mod recovery;
pub mod bounds;
pub mod sweep;
