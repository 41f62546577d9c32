//! Spectral analysis of killed, time-changed symmetric Lévy processes and of
//! the one-dimensional continuous spin chains dual to them.

pub mod eigen;
pub mod error;
pub mod grid;
pub mod interp;
pub mod io;
pub mod kernel;
pub mod levy;
pub mod mass;
pub mod montecarlo;
pub mod observable;
pub mod par;
pub mod partition;
pub mod quadrature;
pub mod spectrum;

pub use error::{Error, Result};
pub use levy::{Backend, JumpLaw, LevyModel, PotentialDensity};
pub use mass::{builtin_mass, MassFunction};
pub use grid::Grid;
pub use kernel::{build_kernel, build_kernel_with, KernelOperator, KernelOptions};
pub use observable::Observable;
pub use spectrum::{solve_spectrum, SpectralSolution};
