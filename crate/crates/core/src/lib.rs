//! Prolate spheroidal and spherical higher-order ambisonics.
//!
//! The crate covers the special functions, the spheroidal wave function
//! tables, encoding of rigid-baffle microphone arrays in both the spherical
//! and the prolate spheroidal basis, transcoding between the two, and the
//! simulation harness used to evaluate reconstruction quality.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod geometry;
pub mod io;
pub mod numerics;
pub mod sim;
pub mod special;
pub mod spherical;
pub mod spheroidal;
pub mod swf;
pub mod transcode;

pub use config::ExperimentConfig;
pub use error::{Error, Result, StageExt};
pub use geometry::{ArrayGeometry, Axis, Baffle, Mic, PlaneWave, ProlateParams, Rotation, Vec3};
pub use numerics::{ComplexMatrix, SolveReport};
pub use sim::{CaseResult, CaseSpec, FieldGrid, GridSpec, SweetSpotMetrics};
pub use spherical::SphericalCoeffs;
pub use spheroidal::SpheroidalCoeffs;
pub use swf::{PrecisionMode, SwfContext, SwfTable};
