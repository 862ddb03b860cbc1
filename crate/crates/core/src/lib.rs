//! Electromechanical wave (EMW) propagation through transmission networks,
//! modelled as a one-dimensional continuum along the fastest path between two
//! buses.
//!
//! The pipeline is: parse a [`case::PowerCase`], solve the steady-state
//! [`powerflow`], spread generator inertia over the lines ([`inertia`]), find
//! the EMW path ([`path`]), discretize it ([`continuum`]) and integrate the
//! wave equations ([`solver`]). [`analysis`] extracts arrival times, speeds
//! and amplitudes from the result.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod case;
pub mod cases;
pub mod continuum;
pub mod inertia;
pub mod path;
pub mod powerflow;
pub mod scheme;
pub mod solver;
