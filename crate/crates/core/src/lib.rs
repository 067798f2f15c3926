//! Neural signed-distance avatars on a multiresolution hash grid.
//!
//! The crate covers the full CPU pipeline: reconstructing a template field
//! from renders of a rigged body mesh, stylizing it under a pluggable image
//! guidance signal with silhouette and Eikonal regularization, articulating
//! the trained field through a skinned body model without retraining, and
//! compositing it with a second volumetric scene by depth test.

pub mod container;
pub mod error;
pub mod field;
pub mod guidance;
pub mod articulation;
pub mod body_model;
pub mod math;
pub mod renderer;
pub mod training;

pub use error::{Error, Result};
