//! Statistical engine boundary conditions and a reduced transient
//! conduction solver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cycle_model;
pub mod expectation;
pub mod histogram;
pub mod numerics;
pub mod state_space;
pub mod coasting;
pub mod gas_exchange;
pub mod part_load;
pub mod pipeline;
pub mod water_jacket;
pub mod thermal_net;
pub mod synthetic;
