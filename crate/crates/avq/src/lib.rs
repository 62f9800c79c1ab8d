//! Reduced-reference parametric audiovisual quality estimation toolkit.

pub mod dataset;
pub mod domain;
pub mod models;
pub mod rng;
