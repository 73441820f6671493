pub mod analysis;
pub mod digest;
pub mod error;
pub mod fft;
pub mod harness;
pub mod keygen;
pub mod optics;
pub mod packing;
pub mod protocol;
pub mod rng;

pub use error::{Error, Result};
