//! Stochastic large-eddy simulation of a nonlinear reaction-diffusion
//! equation with a polynomially decaying memory term.
//!
//! The pipeline solves
//!
//! ```text
//! u_t = u_xx + u - u^3 + integral_0^t u(x,s) / (1 + |t-s|^beta) ds
//! ```
//!
//! on `x in [-1, 1]` with Dirichlet boundary conditions, extracts the
//! subgrid-scale residual `R = (filtered u)^3 - filtered(u^3)` through a
//! Gaussian filter, calibrates a closure `R ~ f(u) + sigma(x) dB^H/dt`
//! (cubic mean drift plus fractional-Brownian-motion colored noise), and
//! integrates the resulting stochastic model on a coarser grid.
//!
//! # Modules
//!
//! - [`spectral`]: Chebyshev–Gauss–Lobatto grids, differentiation
//!   matrices, barycentric interpolation, Clenshaw–Curtis quadrature.
//! - [`solver`]: semi-implicit time integration of the memory PDE.
//! - [`filtering`]: Gaussian spatial filter, subgrid-scale extraction,
//!   averaged time-correlation diagnostics.
//! - [`fbm`]: fractional Brownian motion: exact Cholesky sampler,
//!   randomized Weierstrass–Mandelbrot approximation, Hurst diagnostics.
//! - [`calibration`]: perturbed-IC ensembles, cubic drift fit, noise
//!   intensity estimation.
//! - [`les`]: the stochastic coarse-grid model, RMSE diagnostics.
//! - [`pipeline`]: configuration, run manifest, CSV/JSON artifacts, and
//!   the command implementations behind the `sles` binary.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example chebyshev_basics
//! cargo run --release --example solve_memory_pde
//! cargo run --release --example gaussian_filter_sgs
//! cargo run --release --example fbm_paths
//! cargo run --release --example calibrate_closure
//! cargo run --release --example stochastic_les
//! ```
//!
//! The `sles` binary drives the same pipeline through config files and
//! persisted artifacts; see the repository README.

pub mod calibration;
pub mod error;
pub mod fbm;
pub mod filtering;
pub mod les;
pub mod pipeline;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
