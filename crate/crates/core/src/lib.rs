//! Systematic rank/select index for large alphabets.

pub mod audit;
pub mod bitbuf;
pub mod bits;
pub mod error;
pub mod index;
pub mod mmphf;
pub mod oracle;
pub mod perm;
pub mod pred;
pub mod sparse;
pub mod text;

pub use error::{Error, Result};
