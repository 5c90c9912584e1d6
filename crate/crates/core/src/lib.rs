//! Core algorithms for scoring the contact quality of interacting 3-D
//! surfaces represented as labeled point clouds.
//!
//! The pipeline: point sets for a surface pair are binned into integer
//! *activation grids* at a coarse and a fine resolution
//! ([`activation`]), a small dual-branch 3-D convolutional network
//! classifies the pair as good / bad / neutral contact ([`model`],
//! [`neural`]), and the class probabilities are folded into a 0-100
//! quality score. Deterministic geometric features ([`features`]) label
//! synthetic training data ([`synthgen`]), and [`contact`] finds
//! candidate pairs in multi-surface scenes.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the companion
//! `contactq` crate carries file IO, JSON/CSV formats and the CLI.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod activation;
pub mod contact;
pub mod features;
pub mod geometry;
pub mod model;
pub mod neural;
pub mod pointfile;
pub mod stl;
pub mod synthgen;

pub use activation::{bin_points, build_multires, ActivationGrid, MultiResInput, StateCounts};
pub use features::{contact_features, oracle_label, ContactClass, ContactFeatures, LabelBand};
pub use geometry::{Aabb, LabeledPointSet, Point3, SurfacePair, TriangleMesh};
pub use model::{Model, ModelWeights, NetConfig, ScoreReport};
pub use neural::Tensor;
