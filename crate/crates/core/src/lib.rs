pub mod cluster;
pub mod error;
pub mod ground;
pub mod io;
pub mod seed;

pub use error::{Error, Result};
pub mod al_loop;
pub mod artifacts;
pub mod measures;
pub mod partition;
pub mod pipeline;
pub mod synth;
