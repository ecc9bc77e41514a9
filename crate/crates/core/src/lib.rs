//! Two-stage adaptive robust multi-period economic dispatch with dynamic,
//! VAR-driven wind uncertainty sets.
//!
//! The crate covers the whole pipeline: grid loading and DC shift factors
//! ([`grid`]), wind speed estimation and simulation ([`wind`]), polyhedral
//! uncertainty sets ([`uncertainty`]), dispatch LP construction and the
//! deterministic baselines ([`dispatch`]), the column-and-constraint
//! generation solver ([`ccg`]) and a rolling-horizon simulator ([`sim`]).

pub mod ccg;
pub mod config;
pub mod dispatch;
pub mod error;
pub mod grid;
pub mod lp;
pub mod sim;
pub mod uncertainty;
pub mod wind;

pub use error::{Error, Result};
