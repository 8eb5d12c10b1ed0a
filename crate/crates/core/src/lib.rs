pub mod attention;
pub mod choice;
pub mod cluster;
pub mod crra;
pub mod error;
pub mod estimator;
pub mod generators;
pub mod homogeneous;
pub mod hyptest;
pub mod io;
pub mod lattice;
pub mod lottery_experiment;
pub mod matrix;
pub mod menu;
pub mod qp;
pub mod rng;
pub mod sampler;
