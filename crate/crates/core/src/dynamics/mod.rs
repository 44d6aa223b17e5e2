//! Three-level Λ system with a loss sink: Hamiltonian, Lindblad generator,
//! exact piecewise propagation and transfer fidelity.
//!
//! Basis order is `(g, e, r, s)` and superoperators act on the column-major
//! vectorization of ρ.

mod liouvillian;
mod params;
mod propagate;
mod schedule;
mod state;

pub use liouvillian::{assemble_liouvillian, build_dissipator, build_hamiltonian, Liouvillian, Superoperator};
pub use params::SystemParams;
pub use propagate::{
    evolve, evolve_with, fidelity, propagate_segment, transfer_fidelity, transfer_fidelity_with,
    EvolveOptions, Propagation, SegmentMap, DEFAULT_SUBSTEPS,
};
pub use schedule::{GaussianPair, PulseSchedule, ScheduleKind};
pub use state::{vec_index, DensityMatrix, Level, Vectorized};
