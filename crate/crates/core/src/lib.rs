#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod estimators;
pub mod functions;
pub mod geometry;
pub mod inequalities;
pub mod linalg;
pub mod oracle;
pub mod parallel;
pub mod phi;
pub mod report;
pub mod rng;
pub mod runner;
pub mod sampler;
