//! Multi-spike solutions of the singularly perturbed Neumann problem
//!
//! ```text
//!   ε²Δu − u + uᵖ = 0  in Ω,   u > 0,   ∂u/∂ν = 0  on ∂Ω,
//! ```
//!
//! constructed by Lyapunov-Schmidt reduction and localized energy
//! maximization. All PDE work happens in the rescaled domain Ω_ε = Ω/ε,
//! where the equation reads Δu − u + uᵖ = 0 and every spike has unit width.
//!
//! The pipeline:
//!
//! 1. [`ground_state`]: the radial profile w with Δw − w + wᵖ = 0 on ℝⁿ and
//!    its constants (tail amplitude A_n, energy I(w), interaction amplitude
//!    γ, principal eigenvalue λ₁).
//! 2. [`domain`] / [`grid`]: exact boundary geometry for interval,
//!    rectangle and disk; finite-volume Neumann Laplacians.
//! 3. [`ansatz`]: corrected single spikes w_{ε,Q}, their sums, cutoffs and
//!    the projection directions Z_ij.
//! 4. [`reduction`]: the projected linear solver and the nonlinear fixed
//!    point producing the correction φ and multipliers c_ij.
//! 5. [`energy`]: J_ε, the reduced energy M_ε, and interaction asymptotics.
//! 6. [`search`]: greedy spike insertion and coordinate-ascent maximization
//!    over the separation-constrained configuration space.
//! 7. [`verify`]: Newton polish, multiplier audit and solution
//!    certificates.
//! 8. [`report`] / [`cli`]: run configs, deterministic CSV ledgers, JSON
//!    artifacts and the `spikes` binary.

pub mod ansatz;
pub mod domain;
pub mod error;
pub mod grid;
pub mod ground_state;
pub mod linalg;
pub mod reduction;
pub mod energy;
pub mod search;
pub mod verify;
pub mod ladder;
pub mod report;

pub use error::{Error, Result};
pub use ground_state::GroundState;
