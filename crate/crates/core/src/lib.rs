//! Index theory for Dirac operators on tori, noncommutative tori and
//! torus bundles.
//!
//! - [`lattice`]: exact integer linear algebra (Smith and Hermite forms,
//!   kernels, cokernels).
//! - [`ktheory`]: `K^*(T^d)` as the exterior algebra `Λ(Z^d)`, the
//!   Fourier–Mukai transform, pushforwards and subtorus classes.
//! - [`cocycle`]: geometric cocycles of `Z^d`-actions on `T^n` and their
//!   intersection indices.
//! - [`spectral`]: truncated Dirac operators with numerical index, kernel,
//!   commutator and Weyl-law diagnostics.

mod int_serde;

pub mod cocycle;
pub mod ktheory;
pub mod lattice;
pub mod spectral;

pub use cocycle::{CocycleError, GeometricCocycle};
pub use ktheory::{KClass, KTheoryError, SignConvention, Subtorus};
pub use lattice::{IntMatrix, LatticeError, SmithForm};
pub use spectral::{SpectralError, SpectralReport, TruncatedOperator};
