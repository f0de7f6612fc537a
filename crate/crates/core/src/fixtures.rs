//! Built-in two-sensor demo plant.

use crate::sysmodel::{PlantModel, Scenario};

/// Six-state plant with two scalar sensors on a two-node undirected graph.
/// The reference initial state has five entries, so a zero is appended.
pub const DEMO_JSON: &str = include_str!("../fixtures/demo.json");

pub fn demo() -> Scenario {
    Scenario::from_json(DEMO_JSON).expect("embedded fixture is valid")
}

pub fn demo_plant() -> PlantModel {
    demo().plant
}

/// Eigenvalues quoted for the demo plant (the eigenvalue 3 is double).
pub const DEMO_REFERENCE_EIGENVALUES: [f64; 5] = [3.0, 2.0, -0.2679, -3.7321, -1.0];

/// Coupling gain quoted for the demo network.
pub const DEMO_REFERENCE_GAMMA: f64 = 66.0;
