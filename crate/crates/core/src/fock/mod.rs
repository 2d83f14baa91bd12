//! Truncated Fock-space backend.

mod dvr;
mod moments;
pub mod operator;
mod space;
mod state;

pub use dvr::PositionBasis;
pub use moments::{moments, moments_density, Moments};
pub use operator::{apply, gates, make_operator, unitary_from_generator, Apply, ModeOperator, OperatorKind};
pub use space::{FockSpace, MAX_DIM};
pub use state::{FockDensity, FockState};

/// Partial trace keeping `keep`.
pub fn partial_trace(rho: &FockDensity, keep: &[usize]) -> crate::Result<FockDensity> {
    rho.partial_trace(keep)
}
