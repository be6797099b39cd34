//! Domain types and the canonical on-disk dataset format.

mod io;
pub mod pbm;
mod types;
mod validate;

pub use io::{load_dataset, write_dataset};
pub use types::*;
pub use validate::{validate_dataset, SessionReport, ValidationReport};
