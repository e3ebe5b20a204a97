//! Simulation core for single-photon-emitting diode (SPED) design.
//!
//! Two halves share this crate:
//!
//! * planar optics: [`optics`] (Fresnel and transfer-matrix responses of
//!   layer stacks), [`dipole`] (far-field pattern and collection efficiency
//!   of an in-plane dipole inside a stack) and [`cavity`] (mirror sweeps);
//! * photon statistics: [`qd`] (kinetic Monte Carlo of a quantum dot under
//!   DC or pulsed drive) and [`hbt`] (detection chain, correlation
//!   histograms, peak areas).
//!
//! Hot loops (k-space quadrature panels, angle bins, sweep points, Monte
//! Carlo trajectories, correlation partitions) go through [`exec`], which
//! uses rayon when the `parallel` feature is on and a plain loop otherwise.
//! Results are identical either way.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod dipole;
pub mod error;
pub mod exec;
pub mod hbt;
pub mod optics;
pub mod qd;
pub mod quadrature;

pub use error::{Error, Result};
pub use exec::Execution;

/// Complex refractive indices and amplitudes.
pub type C64 = num_complex::Complex64;
