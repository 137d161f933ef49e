//! Command-line front end: file formats, reports and subcommands.

pub mod commands;
pub mod io;
pub mod report;
