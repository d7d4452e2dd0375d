//! The energy functional and the interaction bookkeeping behind the
//! reduced functional.
//!
//! Everything lives on the rescaled domain:
//!
//! ```text
//!   J(u)   = ½∫(|∇u|² + u²) − 1/(p+1)∫ u₊^{p+1},
//!   M(𝐐)  = J(reduced solution for 𝐐),
//!   M(𝐐)  ≈ k·I(w) − ½Σ_j B(Q_j) − Σ_{i<j} B(Q_i,Q_j),
//! ```
//!
//! with the boundary term B(Q_j) = −∫ w_jᵖ (w_j − v_j) measuring the image
//! charge behind the nearest wall and the pair term B(Q_i,Q_j) = ∫ w_iᵖ w_j
//! the spike repulsion. The gradient part of J is evaluated through the
//! same finite-volume stiffness form the solvers factor, so discrete
//! integration by parts is exact and J is the literal Lyapunov function of
//! the discrete problem, not a second quadrature of it.
//!
//! Each interaction is reported next to its far-field prediction. For the
//! pair term two readings are carried: γ·w(|Q_i−Q_j|/ε), the convolution
//! asymptotics in the separation, and γ·w(2d(Q_j,∂Ω)/ε), the same formula
//! driven by the boundary distance. The report records which one tracks the
//! quadrature so downstream consumers never have to guess.

use serde::{Deserialize, Serialize};

use crate::ansatz::{Configuration, SpikeBank};
use crate::domain::Domain;
use crate::error::Result;
use crate::grid::Grid;
use crate::reduction::{reduced_field, ReduceParams, ReducedSolution};

/// J(u) on the grid, with u₊ in the potential term.
pub fn energy(grid: &Grid, u: &[f64], p: f64) -> f64 {
    let mut su = vec![0.0; u.len()];
    grid.stiffness.matvec(u, &mut su);
    let grad: f64 = u.iter().zip(&su).map(|(a, b)| a * b).sum();
    let mass = grid.inner(u, u);
    let pot: f64 =
        u.iter().zip(&grid.weights).map(|(&v, w)| w * v.max(0.0).powf(p + 1.0)).sum();
    0.5 * (grad + mass) - pot / (p + 1.0)
}

/// One pairwise interaction ∫ w_iᵖ w_j with its far-field predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    /// ∫ w_iᵖ w_j by quadrature.
    pub value: f64,
    /// ∫ w_jᵖ w_i. Equal to `value` up to roundoff: on the lattice the two
    /// integrands are images of each other under the node-to-node
    /// reflection through the midpoint of Q_i and Q_j.
    pub transposed: f64,
    /// γ·w(|Q_i−Q_j|/ε).
    pub predicted_from_separation: f64,
    /// γ·w(2·d(Q_j,∂Ω)/ε), the boundary-distance reading.
    pub predicted_from_boundary: f64,
}

/// Interaction terms of a configuration, one boundary term per spike and
/// one pair term per unordered pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InteractionTerms {
    /// −∫ w_jᵖ (w_j − v_j), positive for spikes that feel a wall.
    pub boundary: Vec<f64>,
    /// γ·w(2d_j/ε) next to each boundary term.
    pub predicted_boundary: Vec<f64>,
    pub pairs: Vec<PairTerm>,
}

impl InteractionTerms {
    pub fn boundary_sum(&self) -> f64 {
        self.boundary.iter().sum()
    }

    pub fn pair_sum(&self) -> f64 {
        self.pairs.iter().map(|t| t.value).sum()
    }

    /// Largest single interaction, boundary or pair.
    pub fn max_term(&self) -> f64 {
        let b = self.boundary.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        self.pairs.iter().fold(b, |a, t| a.max(t.value.abs()))
    }

    /// Which reading of the pair prediction tracks the quadrature better,
    /// judged by total log discrepancy. `None` without pairs.
    pub fn preferred_pair_prediction(&self) -> Option<&'static str> {
        if self.pairs.is_empty() {
            return None;
        }
        let ln = |v: f64| v.max(1e-300).ln();
        let mut sep = 0.0;
        let mut bdy = 0.0;
        for t in &self.pairs {
            sep += (ln(t.value) - ln(t.predicted_from_separation)).abs();
            bdy += (ln(t.value) - ln(t.predicted_from_boundary)).abs();
        }
        Some(if sep <= bdy { "separation" } else { "boundary-distance" })
    }
}

/// Boundary and pair interactions of a configuration by direct quadrature,
/// with the γ-tail predictions alongside.
pub fn interaction_terms(
    bank: &SpikeBank,
    domain: &Domain,
    config: &Configuration,
) -> Result<InteractionTerms> {
    let grid = bank.grid;
    let gs = bank.gs;
    let eps = grid.eps;
    let spikes = bank.spikes(config)?;

    let mut boundary = Vec::with_capacity(spikes.len());
    let mut predicted_boundary = Vec::with_capacity(spikes.len());
    let mut dist = Vec::with_capacity(spikes.len());
    for s in &spikes {
        let phi = s.boundary_correction();
        boundary.push(-grid.inner(&s.free_p, &phi));
        // Distances from the snapped center, where the spike actually sits;
        // the requested point can be half a cell away, which at these scales
        // moves the prediction by a factor e^{±h/2}.
        let d = domain.boundary_geometry([s.q[0] * eps, s.q[1] * eps])?.distance;
        dist.push(d);
        predicted_boundary.push(gs.gamma * gs.eval(2.0 * d / eps));
    }

    let mut pairs = Vec::new();
    for i in 0..spikes.len() {
        for j in (i + 1)..spikes.len() {
            let value = grid.inner(&spikes[i].free_p, &spikes[j].free);
            let transposed = grid.inner(&spikes[j].free_p, &spikes[i].free);
            let si = spikes[i].q;
            let sj = spikes[j].q;
            let sep = ((si[0] - sj[0]).powi(2) + (si[1] - sj[1]).powi(2)).sqrt();
            pairs.push(PairTerm {
                i,
                j,
                value,
                transposed,
                predicted_from_separation: gs.gamma * gs.eval(sep),
                predicted_from_boundary: gs.gamma * gs.eval(2.0 * dist[j] / eps),
            });
        }
    }

    Ok(InteractionTerms { boundary, predicted_boundary, pairs })
}

/// The reduced functional and its second-order expansion for one
/// configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    pub k: usize,
    /// J at the spike-sum ansatz, before the correction φ.
    pub j_eps: f64,
    /// J at the reduced solution: the reduced functional M(𝐐).
    pub m_eps: f64,
    /// Per-spike energy reference, the lattice soliton's patch energy.
    pub i_w_ref: f64,
    pub interactions: InteractionTerms,
    /// k·I_w − ½Σ_j B(Q_j) − Σ_{i<j} B(Q_i,Q_j).
    pub predicted_m: f64,
    /// m_eps − predicted_m, signed.
    pub expansion_gap: f64,
    pub reduced: ReducedSolution,
}

/// Run the reduction and evaluate M(𝐐) together with the interaction
/// expansion.
pub fn reduced_energy(
    bank: &SpikeBank,
    domain: &Domain,
    config: &Configuration,
    params: &ReduceParams,
) -> Result<EnergyReport> {
    let p = bank.profile.p;
    let ansatz = bank.sum(config)?;
    let j_eps = energy(bank.grid, &ansatz, p);
    let (u, reduced) = reduced_field(bank, config, params)?;
    let m_eps = energy(bank.grid, &u, p);
    let interactions = interaction_terms(bank, domain, config)?;
    let i_w_ref = bank.profile.i_w_grid;
    let predicted_m = config.k() as f64 * i_w_ref - 0.5 * interactions.boundary_sum()
        - interactions.pair_sum();
    Ok(EnergyReport {
        k: config.k(),
        j_eps,
        m_eps,
        i_w_ref,
        interactions,
        predicted_m,
        expansion_gap: m_eps - predicted_m,
        reduced,
    })
}

/// The reduced functional alone, for search loops that evaluate it in bulk.
pub fn m_eps(bank: &SpikeBank, config: &Configuration, params: &ReduceParams) -> Result<f64> {
    let (u, _) = reduced_field(bank, config, params)?;
    Ok(energy(bank.grid, &u, bank.profile.p))
}
