//! Operator surface for the newsrec pipeline. One flat configuration
//! drives six commands (enrich, preprocess, train, evaluate, predict,
//! report); each writes its artifacts and a resolved-config snapshot
//! under a run directory and prints a JSON result to stdout.

pub mod commands;
pub mod config;
pub mod error;
pub mod load;
pub mod report;
pub mod run;
