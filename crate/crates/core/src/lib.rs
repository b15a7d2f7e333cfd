//! Sobol sensitivity indices of DAG-structured processes via polynomial chaos expansions.

pub mod basis;
pub mod dag;
pub mod dataset;
pub mod distribution;
pub mod engine;
pub mod linalg;
pub mod pick_freeze;
pub mod process;
pub mod regression;
pub mod scalar;
pub mod sobol;

pub use scalar::Real;

pub type Dataset64 = dataset::Dataset<f64>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type Distribution64 = distribution::Distribution<f64>;
pub type Distribution32 = distribution::Distribution<f32>;
pub type Process64 = process::Process<f64>;
pub type Process32 = process::Process<f32>;
pub type PceModel64 = engine::PceModel<f64>;
pub type PceModel32 = engine::PceModel<f32>;
