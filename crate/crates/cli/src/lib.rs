//! Library surface of the command-line tool, exposed so integration tests
//! can drive [`pipeline::execute`] directly.

#![forbid(unsafe_code)]

pub mod pipeline;
pub mod report;

pub use pipeline::{execute, Command, Flags, Outcome};
pub use report::RunReport;
