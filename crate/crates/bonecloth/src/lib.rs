//! Bone-driven neural garment simulation.
//!
//! A garment is driven in two stages: skeleton joints move a sparse set of
//! virtual bones sampled on the garment surface, and the bones drive vertices
//! through linear blend skinning with learned corrections; a convolutional
//! network in UV space then restores fine surface detail. Identity-specific
//! quantities (shape code, weight corrections, static UV features) are
//! encoded once per body-garment pair by a shared graph encoder. Training is
//! self-supervised: a per-vertex graph-network integrator learns from physics
//! losses and its integrated positions supervise the fast runtime branch.

pub mod assets;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kinematics;
pub mod diffcore;
pub mod physics;

pub use error::{Error, Result};
