//! The full construction ladder: grow a configuration one spike at a time
//! and certify every rung.
//!
//! Each rung runs the same four stages. Insertion places spike k+1 at the
//! clearance maximizer; coordinate ascent equilibrates the extended
//! configuration; the energy step C_{k+1} − C_k is checked against
//! I(w) − (γ/4)e^{−ρ}; and the maximizer is certified as a solution
//! (interior constraints slack, multipliers vanishing, Newton polish
//! convergent, exactly k+1 maxima). The ladder stops when the domain is
//! exhausted, when the packing budget is spent, or at the requested count,
//! and reports which of these it was.

use serde::{Deserialize, Serialize};

use crate::ansatz::{Configuration, SpikeBank};
use crate::domain::Domain;
use crate::energy::{reduced_energy, EnergyReport};
use crate::error::{Error, Result};
use crate::reduction::ReduceParams;
use crate::search::{
    insert_spike, local_maximize, verify_energy_step, verify_interior_maximizer,
    EnergyStepReport, InsertionReport, InteriorReport, SweepReport, DEFAULT_PACKING_DELTA,
};
use crate::verify::{certify, SolutionCertificate};

/// Knobs of a ladder run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderOptions {
    /// Separation parameter of every configuration on the ladder.
    pub rho: f64,
    /// Packing budget multiplier δ in k+1 ≤ δ·|Ω|/(ρε)ⁿ.
    pub delta: f64,
    /// Stop after this many spikes; `None` runs to exhaustion.
    pub k_target: Option<usize>,
    /// Cap on coordinate-ascent sweeps per rung.
    pub max_sweeps: usize,
    pub params: ReduceParams,
}

impl LadderOptions {
    pub fn new(rho: f64) -> LadderOptions {
        LadderOptions {
            rho,
            delta: DEFAULT_PACKING_DELTA,
            k_target: None,
            max_sweeps: 400,
            params: ReduceParams::default(),
        }
    }
}

/// One finished rung: the equilibrated k-spike maximizer and every verdict
/// attached to it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderRung {
    pub k: usize,
    pub config: Configuration,
    pub insertion: InsertionReport,
    pub sweep: SweepReport,
    pub energy: EnergyReport,
    pub step: EnergyStepReport,
    pub interior: InteriorReport,
    pub certificate: SolutionCertificate,
    /// Energy step, interiority, and certificate all passed.
    pub pass: bool,
}

/// Why the ladder stopped growing.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum StopReason {
    /// No candidate point clears ρε; the geometry is exhausted.
    NoClearance { best: f64, required: f64 },
    /// The packing budget δ·|Ω|/(ρε)ⁿ is spent.
    BudgetSpent,
    /// Reached the requested spike count.
    ReachedTarget,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LadderReport {
    pub rungs: Vec<LadderRung>,
    pub stop: StopReason,
    pub all_pass: bool,
}

impl LadderReport {
    pub fn k_max(&self) -> usize {
        self.rungs.last().map_or(0, |r| r.k)
    }
}

/// Grow from the empty configuration until a stop condition fires. Every
/// rung is equilibrated and certified; a failed verdict is recorded on the
/// rung and the ladder keeps climbing, so one marginal step does not hide
/// the rungs above it.
pub fn run_ladder(
    bank: &SpikeBank,
    domain: &Domain,
    opts: &LadderOptions,
) -> Result<LadderReport> {
    let grid = bank.grid;
    let slack = grid.h * grid.eps;
    let mut config = Configuration::new(domain, Vec::new(), opts.rho, slack)?;
    let mut c_prev = 0.0;
    let mut rungs: Vec<LadderRung> = Vec::new();

    let stop = loop {
        if let Some(target) = opts.k_target {
            if config.k() >= target {
                break StopReason::ReachedTarget;
            }
        }
        let (extended, insertion) = match insert_spike(domain, grid, &config, opts.delta) {
            Ok(out) => out,
            Err(Error::NoClearance { best, required }) => {
                break StopReason::NoClearance { best, required };
            }
            Err(Error::InfeasibleConfiguration(_)) => break StopReason::BudgetSpent,
            Err(e) => return Err(e),
        };
        let (opt, sweep) = local_maximize(bank, domain, &extended, &opts.params, opts.max_sweeps)?;
        let energy = reduced_energy(bank, domain, &opt, &opts.params)?;
        let step = verify_energy_step(bank, opts.rho, c_prev, energy.m_eps);
        let interior = verify_interior_maximizer(domain, &opt, slack)?;
        let certificate = certify(bank, &opt, &opts.params)?;
        let pass = step.pass && interior.pass && certificate.pass;
        c_prev = energy.m_eps;
        config = opt.clone();
        rungs.push(LadderRung {
            k: opt.k(),
            config: opt,
            insertion,
            sweep,
            energy,
            step,
            interior,
            certificate,
            pass,
        });
    };

    let all_pass = rungs.iter().all(|r| r.pass);
    Ok(LadderReport { rungs, stop, all_pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Shape;
    use crate::grid::Grid;
    use crate::ground_state::solve_ground_state;

    #[test]
    fn interval_ladder_certifies_four_rungs() {
        let gs = solve_ground_state(1, 3.0, 40.0, 1e-8).unwrap();
        let domain = Domain::new(Shape::Interval { a: 0.0, b: 1.0 }, 0.02).unwrap();
        // The mesh sets the stall resolution of coordinate ascent, and with
        // it the size of the surviving multipliers: a maximizer pinned
        // within half a cell of the critical point carries c of order
        // γ·h·e^{-ρ}. At ρ = 8 the certificate bar of 10⁻⁶ needs h well
        // under 0.25; one-dimensional grids are cheap enough to just
        // refine.
        let grid = Grid::from_domain(&domain, 0.0125).unwrap();
        let bank = SpikeBank::new(&gs, &grid).unwrap();
        let mut opts = LadderOptions::new(8.0);
        opts.k_target = Some(4);

        let report = run_ladder(&bank, &domain, &opts).unwrap();
        assert_eq!(report.stop, StopReason::ReachedTarget);
        assert_eq!(report.k_max(), 4);
        for rung in &report.rungs {
            assert!(
                rung.step.pass,
                "energy step failed at k = {}: margin {:.3e}",
                rung.k, rung.step.margin
            );
            assert!(rung.interior.pass, "interiority failed at k = {}", rung.k);
            assert!(
                rung.certificate.pass,
                "certificate failed at k = {}: {:?}",
                rung.k, rung.certificate
            );
            assert!(
                rung.certificate.polish_iterations <= 5,
                "polish took {} iterations at k = {}",
                rung.certificate.polish_iterations,
                rung.k
            );
        }
        assert!(report.all_pass);

        // Energy accounting: each rung's step relates consecutive reduced
        // energies, so the last C_k is the sum of the recorded steps.
        let total: f64 = report.rungs.iter().map(|r| r.step.c_k1 - r.step.c_k).sum();
        let last = report.rungs.last().unwrap().energy.m_eps;
        assert!((total - last).abs() < 1e-9 * last.abs().max(1.0));
    }

    #[test]
    fn ladder_runs_to_exhaustion_on_a_short_interval() {
        let gs = solve_ground_state(1, 3.0, 40.0, 1e-8).unwrap();
        let domain = Domain::new(Shape::Interval { a: 0.0, b: 1.0 }, 0.1).unwrap();
        let grid = Grid::from_domain(&domain, 0.25).unwrap();
        let bank = SpikeBank::new(&gs, &grid).unwrap();
        let opts = LadderOptions::new(6.0);

        let report = run_ladder(&bank, &domain, &opts).unwrap();
        match report.stop {
            StopReason::NoClearance { best, required } => {
                assert!(best < required, "stop out of order: {best} vs {required}")
            }
            ref other => panic!("expected geometric exhaustion, got {other:?}"),
        }
        // ρε = 0.6 admits the midpoint alone: a second spike would need
        // clearance 0.6 with at most 0.5 available on either side.
        assert_eq!(report.k_max(), 1);
        assert_eq!(report.rungs.len(), 1);
    }

    #[test]
    fn budget_cap_stops_the_ladder_first() {
        let gs = solve_ground_state(1, 3.0, 40.0, 1e-8).unwrap();
        let domain = Domain::new(Shape::Interval { a: 0.0, b: 1.0 }, 0.02).unwrap();
        let grid = Grid::from_domain(&domain, 0.25).unwrap();
        let bank = SpikeBank::new(&gs, &grid).unwrap();
        let mut opts = LadderOptions::new(8.0);
        // δ·|Ω|/(ρε) = 0.4·1/0.16 = 2.5, so the third insertion busts it.
        opts.delta = 0.4;

        let report = run_ladder(&bank, &domain, &opts).unwrap();
        assert_eq!(report.stop, StopReason::BudgetSpent);
        assert_eq!(report.k_max(), 2);
    }
}
