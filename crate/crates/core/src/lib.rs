//! Multizone sound rendering toolkit.
//!
//! Designs loudspeaker prefilter banks that synthesize a target sound field
//! in a bright zone while keeping one or more dark zones quiet. Three filter
//! design methods are provided:
//!
//! - pressure matching (`pm`): least-squares fit of the sound pressure at
//!   control points on contours around the zones;
//! - joint pressure/velocity matching (`jpvm`): additionally matches the
//!   radial and tangential particle-velocity components, approximated by
//!   finite pressure differences on L-shaped control-point groups;
//! - `jpvm_plus`: matches pressure and the radial velocity component only,
//!   using pairs of control points on two concentric circles.
//!
//! Alongside the solvers, the crate carries a circular-harmonic (modal)
//! analysis of what each contour quantity can observe, error metrics over
//! evaluation grids, a sensor-noise robustness experiment, and time-domain
//! field snapshots. The `multizone` binary drives everything from TOML
//! scenario configs; see the README for the file formats.

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod matrices;
pub mod modal;
pub mod scenario;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
