//! Batch command line for the planar ion-crystal pipeline: configuration,
//! versioned JSON snapshots, scan tables and the command implementations.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod snapshot;
pub mod table;
