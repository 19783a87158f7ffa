//! Experiment runner for online learning-to-learn: configuration, the
//! method matrix over task environments, and the certificate suite.

pub mod certify;
pub mod config;
pub mod runner;
