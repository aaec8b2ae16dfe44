//! VNF placement in edge-compute networks: an exact MDP solver, a tabular
//! Q-Learning agent, a weighted best-fit baseline, Poisson trace generation
//! and an episode harness that compares them by rejection ratio.

pub mod bestfit;
pub mod config;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod model;
pub mod qlearning;
pub mod tracegen;

pub use error::{Error, Result};
