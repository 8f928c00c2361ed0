//! Scenario-driven front end for the inflatable Cosserat rod model.

pub mod config;
pub mod error;
pub mod metrics;
pub mod output;
pub mod plots;
pub mod run;
pub mod scenario;
