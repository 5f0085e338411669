//! Deterministic simulation of lensless correlated imaging with thermal
//! light: impulse responses of the two arms, coincidence rates, the
//! intensity-fluctuation correlation and its visibility for multi-slit
//! objects, plus a Monte Carlo speckle check.

// `!(x > 0.0)` is used deliberately so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod correlation;
pub mod error;
pub mod field;
pub mod grid;
pub mod manifest;
pub mod propagation;
pub mod quadrature;
pub mod scene;
pub mod speckle;

pub use error::{Error, Result};
pub use scene::{default_scene, Scene, SceneParams};
