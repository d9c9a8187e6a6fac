//! Design and time-domain simulation of LLC resonant half-bridge converters.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod design;
pub mod gain;
pub mod io;
pub mod numeric;
pub mod sim;
pub mod steady_state;
pub mod tank;
