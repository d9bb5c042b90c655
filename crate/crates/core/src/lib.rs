//! Registration-free, depth-based estimation of the latent deformation model
//! for multivariate functional data.
//!
//! Observed curves are modelled as `X_ij = a_ij * (lambda ∘ psi_j ∘ h_i)`: a
//! common amplitude function `lambda`, deterministic component distortions
//! `psi_j`, and individual time warps `h_i`. Every estimate in this crate is a
//! functional depth median (or a composition/inversion of depth medians), so
//! no curve registration is performed.
//!
//! Modules:
//! - [`curves`]: grids, curves, warping functions and their arithmetic
//! - [`depth`]: band depth, modified band depth, hypograph index, quantile
//!   integrated depth and depth medians
//! - [`estimation`]: the full estimation pipeline ([`estimation::fit_ldm`])
//! - [`simulation`]: synthetic data generators, error metrics and benchmarks
//! - [`whyra`]: ranking-agreement diagnostic for per-component warps
//! - [`io`]: CSV panels, config files and output writers

pub mod curves;
pub mod depth;
pub mod error;
pub mod estimation;
pub mod io;
pub mod simulation;
pub mod whyra;

pub use curves::{Curve, Grid, MultiSample, Sampled, WarpingCurve};
pub use depth::{DepthMethod, DepthVector, UnivariateDepth};
pub use error::{LdmError, Result};
pub use estimation::{fit_ldm, EstimationConfig, LdmEstimate};
