//! Dual-backend simulation of hybrid optical quantum information processing.
//!
//! Two interchangeable representations are provided:
//!
//! * [`fock`]: dense truncated Fock space for arbitrary (non-Gaussian) states,
//! * [`gaussian`]: means and covariance matrices evolved by symplectic maps.
//!
//! On top of these sit homodyne and photon-counting [`measurement`]s, CV and
//! DV [`teleport`]ation, measurement-based [`cluster`] computation, off-line
//! ancilla gates ([`offline`]) and state comparison [`metrics`].
//!
//! Conventions are fixed crate-wide: ħ = 1, `x = (a† + a)/√2`,
//! `p = i(a† − a)/√2`, vacuum quadrature variance 1/2. Multimode Fock indices
//! use a mode-major digit expansion with mode 0 most significant, and Gaussian
//! vectors are ordered `(x0, p0, x1, p1, ...)`.

pub mod branch;
pub mod cluster;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod measurement;
pub mod metrics;
pub mod offline;
pub mod special;
pub mod teleport;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default threshold above which truncation leakage is reported.
pub const LEAKAGE_WARNING: f64 = 1e-6;
