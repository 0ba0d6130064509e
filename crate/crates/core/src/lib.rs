//! Modelling and calibration toolkit for kinetic-inductance parametric amplifiers.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod env_models;
pub mod error;
pub mod fitkit;
pub mod io;
pub mod io_dynamics;
pub mod ki_device;
pub mod microwave_net;
pub mod noise_cal;
pub mod quantities;
pub mod reproduce;
pub mod squeeze;
pub mod synth;

pub use error::{Error, Result};
