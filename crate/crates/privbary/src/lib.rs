//! File formats, experiment harness and command-line interface for
//! `privbary-core`.

pub mod cli;
pub mod experiment;
pub mod io;
pub mod settings;
