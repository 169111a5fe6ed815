#![allow(clippy::needless_range_loop)]

pub mod autodiff;
pub mod certify;
pub mod cli;
pub mod data;
pub mod graph;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod pipeline;
