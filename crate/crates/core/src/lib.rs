//! Probabilistic models of planar pushing.
//!
//! This crate learns the input-dependent mean and variance of a pushed
//! object's displacement. Two regression models are provided: a standard
//! homoscedastic Gaussian process ([`gp`]) and a variational heteroscedastic
//! Gaussian process ([`vhgp`]) that additionally regresses the log noise
//! variance as a function of the pushing action. A quasi-static analytical
//! pusher-slider model ([`pushmodel`]) serves as the deterministic baseline
//! and as the ground truth of the synthetic data generator.
//!
//! The action space is `u = (v_p, c, beta)`: pusher speed (mm/s), contact
//! coordinate along the pushed edge (normalized to `[0, 1]`), and push angle
//! relative to the inward edge normal (rad). Outcomes `(dx, dy, dtheta)` are
//! the object displacement in a frame aligned with the push direction (mm)
//! plus the rotation change (rad).

pub mod data;
pub mod error;
pub mod gp;
pub mod kernels;
pub mod metrics;
pub mod optim;
pub mod pushmodel;
pub mod standardize;
pub mod vhgp;

pub use error::{Error, Result};
