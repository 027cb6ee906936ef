//! Deterministic simulation of a multi-modal traffic hub: road vehicles,
//! trams and pedestrians around a walkable avatar, with a guided tour of
//! accessibility barriers that mutates the site as each one is resolved.
//!
//! Start from [`inputs::load_inputs`], build a [`sim::SimContext`], then step
//! a [`sim::World`] one 50 ms tick at a time.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod avatar;
pub mod geometry;
pub mod inputs;
pub mod protocol;
pub mod sim;
pub mod site;
pub mod tour;
