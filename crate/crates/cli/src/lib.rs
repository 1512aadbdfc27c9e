//! Command-line front end for `otaform-core`: scenario files, trace and
//! report output, the bundled experiments and the property suites.

pub mod commands;
pub mod config;
pub mod output;
