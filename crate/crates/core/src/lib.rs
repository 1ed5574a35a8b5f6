pub mod boolfn;
pub mod corrbox;
pub mod dyadic;
pub mod error;
pub mod export;
pub mod gates;
pub mod ghzc;
pub mod mbqc;
pub mod reliability;

pub use error::{Error, Result};
