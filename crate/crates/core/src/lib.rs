//! Eccentricity of ideas on a follow network: how far each post sits from
//! the centroid of what its author recently saw, how that distance evolves
//! per user, and how it relates to popularity.

pub mod cli;
pub mod cloud;
pub mod corpus;
pub mod dynamics;
pub mod embed;
pub mod error;
pub mod pca;
pub mod stats;
pub mod synth;
pub mod textprep;

pub use error::{Error, Result};
