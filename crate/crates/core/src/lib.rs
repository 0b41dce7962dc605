//! Identity-perturbation ellipsoid fitting for Gaussian sample points.
//!
//! Given v_1..v_m ~ N(0, I_d / d), build Λ = I - Σ w_i v_i v_iᵀ with w solving
//! M w = η, where M_ij = ⟨v_i, v_j⟩² and η_i = ‖v_i‖² - 1, and check Λ ⪰ 0.
//! The crate also carries the tooling used to study the norm bounds behind
//! the construction: the A/B split of M, Neumann truncations of A⁻¹,
//! graph-matrix shapes with their block-value function, and a Lanczos
//! spectral estimator.

pub mod construction;
pub mod error;
pub mod graphmat;
pub mod harness;
pub mod hermite;
pub mod linalg;
pub mod neumann;
pub mod sampling;
pub mod spectral;

pub use construction::{decompose, solve_weights, woodbury_inverse_eta, Candidate, Decomposition, RSplit, RussScalars};
pub use error::{Error, Result};
pub use graphmat::{
    block_value, catalog, realize, trace_moment_mc, verify_block_bound, BlockBoundReport, BlockValueBreakdown,
    RealizeInput, Shape, ShapeKind, StepLabel, TraceEstimate,
};
pub use hermite::{hermite_moment, HermiteIndex};
pub use neumann::{neumann_apply, truncated_t0_exact, NeumannConfig};
pub use sampling::{derive_seed, sample_goe, sample_vectors, GoeMatrix, SampleSet};
pub use spectral::{lanczos_extremes, psd_check, spectral_norm, SpectralReport, SymmetricOperator};
