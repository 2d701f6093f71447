//! Cut finite element solver for free flow coupled to finite-strain poroelasticity.

pub mod dual;
pub mod error;
pub mod params;
pub mod mesh;
pub mod cutgeom;
pub mod fluid_form;
pub mod poro_form;
pub mod coupling_form;
pub mod assembly;
pub mod solver;
pub mod mms;
pub mod beam;
pub mod config;
pub mod output;
pub mod studies;

pub use error::{Error, Result};
