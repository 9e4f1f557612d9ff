//! Simulation and linear stability analysis of a reaction-diffusion-taxis
//! model for cartilage regeneration: adipose-derived stem cells (`c1`)
//! migrate up gradients of a non-diffusing hyaluron/ECM field (`h`) and
//! differentiate into chondrocytes (`c2`), which in turn produce `h`.

pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod model;
pub mod scenarios;
pub mod stability;
pub mod timestepper;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Domain, FieldSet, Grid};
pub use model::{ModelParams, SteadyState};
pub use scenarios::{builtin_scenarios, parse_config, run_scenario, ScenarioSpec};
