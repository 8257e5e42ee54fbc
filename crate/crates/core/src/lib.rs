//! Model-agnostic kinetic-energy limiting for collaborative robots.
//!
//! A PD task controller is wrapped by an energy tank whose lower bound is
//! derived from the ISO/TS 15066 body-region limits. The tank observes only
//! the twist and the external wrench, so the kinetic-energy bound holds
//! without an inertia model.

// NaN must fail every range check, so bounds are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy_tank;
pub mod error;
pub mod iso15066;
pub mod robot_dynamics;
pub mod safety_controller;
pub mod sim_harness;
pub mod config;
pub mod io;

pub use error::{Error, Result};
