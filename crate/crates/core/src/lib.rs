//! Distributed partial-state estimation for linear time-invariant plants
//! observed by a network of sensors.
//!
//! The pipeline is: [`structan`] decides whether the functional `z = Kx`
//! can be reconstructed from the stacked sensors, [`synth`] builds one
//! estimator per sensor node plus the consensus coupling gain, and
//! [`netsim`] integrates the plant and the estimator network.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fixtures;
pub mod gen;
pub mod matnum;
pub mod netsim;
pub mod structan;
pub mod synth;
pub mod sysmodel;

pub use error::{Error, Result};
pub use matnum::Matrix;
pub use netsim::{simulate, SimulationConfig, SimulationTrace};
pub use structan::Tolerances;
pub use synth::{synth_centralized, synth_distributed, DistributedEstimator, SynthesisOptions};
pub use sysmodel::{CommGraph, PlantModel, Scenario, Sensor};
