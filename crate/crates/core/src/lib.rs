//! Optimal liquidation of a position under stochastic price impact and risk
//! aversion, with the terminal constraint that the position is closed.
//!
//! The value function is `Y_t |x|^p`, where `Y` solves a backward SDE whose
//! terminal value is infinite. The crate builds `Y` as the limit of penalised
//! problems with terminal value `L`, integrates the resulting feedback
//! control, and checks the numerics against closed forms.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bsde;
pub mod cli;
pub mod closed_form;
pub mod control;
pub mod error;
pub mod model;
pub mod quadrature;
pub mod regression;
pub mod verify;

pub use error::{Error, Result};
