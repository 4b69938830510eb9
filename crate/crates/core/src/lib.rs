//! Occluded multi-vehicle pursuit on an urban intersection grid, plus the
//! learning machinery used to train pursuer teams on it.
//!
//! The crate is `no_std` (with `alloc`) so the simulator and the learners can
//! be embedded anywhere; file formats, the CLI and rendering live in the
//! `omvp` companion crate.
//!
//! - [`env`]: grid map, occluded observations, evader strategies, rewards.
//! - [`tensor`]: reverse-mode differentiation over dense `f64` matrices,
//!   Adam and finite-difference gradient checking.
//! - [`policy`]: the transformer agent network (observation tokens plus a
//!   recurrent hidden token) and a GRU baseline.
//! - [`mixer`]: VDN and monotonic QMIX credit assignment.
//! - [`trainer`]: epsilon-greedy rollouts, episode replay, TD learning with
//!   target networks, evaluation.

#![no_std]

extern crate alloc;

pub mod env;
pub mod layers;
pub mod mixer;
pub mod policy;
pub mod tensor;
pub mod trainer;

mod error;

pub use error::{Error, Result};
