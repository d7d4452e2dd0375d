//! Certification that a finished maximizer is a genuine solution.
//!
//! Three independent checks back the certificate. The multiplier audit
//! assembles the matrix of the reduced critical-point system,
//!
//! ```text
//!   G[(s,l),(i,j)] = ⟨ Z_sl , ∂(w + φ)/∂Q_ij ⟩,
//! ```
//!
//! by central differences in the spike positions and confirms it is
//! diagonally dominant, so vanishing position-gradients force every
//! multiplier c_ij to zero; the measured max |c_ij| is reported against
//! that. Newton polish then solves the unprojected lattice equation
//! Δu − u + u₊ᵖ = 0 starting from w + φ; a true near-solution converges
//! within a few steps and barely moves. Finally the polished field must
//! have exactly k strict local maxima, one per spike center, and stay
//! positive.

use serde::{Deserialize, Serialize};

use crate::ansatz::{Configuration, SpikeBank};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::BandLdl;
use crate::reduction::{pde_residual, reduce, reduced_field, ReduceParams};

/// JSON has no literal for infinities, and a diverged polish reports an
/// infinite residual while a lone 1D spike has infinite dominance. Fields
/// that can legitimately hold such values travel as strings in that case.
pub(crate) mod float_repr {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&x.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(de::Error::custom),
        }
    }
}

/// Certificate bar on the polished PDE residual.
pub const RESIDUAL_BAR: f64 = 1e-10;
/// Certificate bar on max |c_ij|, in units where I(w) is order one.
pub const MULTIPLIER_BAR: f64 = 1e-6;
/// Newton polish runs to this residual or gives up.
const POLISH_TOL: f64 = 1e-11;
const POLISH_CAP: usize = 20;

/// The assembled multiplier system and its dominance summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiplierAudit {
    /// Row-major (k·dim)² matrix ⟨Z_sl, ∂(w+φ)/∂Q_ij⟩; rows follow the
    /// projection labels, columns the differentiated coordinate.
    pub gram: Vec<f64>,
    /// (spike, axis) per row/column.
    pub labels: Vec<(usize, usize)>,
    /// min |diagonal| over max off-diagonal row sum. Infinite for a single
    /// 1D spike, where there is nothing off the diagonal.
    #[serde(with = "float_repr")]
    pub dominance_ratio: f64,
    /// Expected diagonal per axis, −ε⁻¹ × lattice ∫(∂w/∂x_j)².
    pub diag_prediction: [f64; 2],
    /// max |c_ij| of the reduction at the audited configuration.
    pub c_max: f64,
}

/// Central-difference assembly of the multiplier matrix, one reduction per
/// single-cell shift of each spike coordinate plus one at the center for
/// the multipliers themselves. The fixed point is driven below its default
/// tolerance here: at wide separations the soft translation eigenvalues
/// sink toward the solver noise, and whatever the fixed point leaves in
/// those directions reads as spurious multiplier signal.
pub fn multiplier_audit(
    bank: &SpikeBank,
    config: &Configuration,
    params: &ReduceParams,
) -> Result<MultiplierAudit> {
    let params = &ReduceParams { tol_fp: params.tol_fp.min(1e-12), ..params.clone() };
    let grid = bank.grid;
    let step = grid.h * grid.eps;
    let zs = bank.projection_set(config)?;
    let m = zs.len();

    let mut gram = vec![0.0; m * m];
    for (col, &(i, axis)) in zs.labels.iter().enumerate() {
        let mut hi = config.points[i];
        let mut lo = config.points[i];
        hi[axis] += step;
        lo[axis] -= step;
        let (f_hi, _) = reduced_field(bank, &config.moved(i, hi), params)?;
        let (f_lo, _) = reduced_field(bank, &config.moved(i, lo), params)?;
        let deriv: Vec<f64> =
            f_hi.iter().zip(f_lo.iter()).map(|(a, b)| (a - b) / (2.0 * step)).collect();
        for (row, zf) in zs.z.iter().enumerate() {
            gram[row * m + col] = grid.inner(zf, &deriv);
        }
    }

    let mut min_diag = f64::INFINITY;
    let mut max_off = 0.0f64;
    for r in 0..m {
        min_diag = min_diag.min(gram[r * m + r].abs());
        let off: f64 = (0..m).filter(|&c| c != r).map(|c| gram[r * m + c].abs()).sum();
        max_off = max_off.max(off);
    }

    let red = reduce(bank, config, params)?;
    Ok(MultiplierAudit {
        gram,
        labels: zs.labels,
        dominance_ratio: min_diag / max_off,
        diag_prediction: [
            -bank.profile.grad_sq[0] / grid.eps,
            -bank.profile.grad_sq[1] / grid.eps,
        ],
        c_max: red.c_max(),
    })
}

/// A field polished by unprojected Newton iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolishedField {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// Final max norm of Δu − u + u₊ᵖ.
    pub residual: f64,
    /// max |u − u_init|.
    pub shift: f64,
}

/// Newton iteration on the full lattice equation from `u_init`, with no
/// projection and no constraint on the spike positions. Succeeds when the
/// residual falls under 10⁻¹¹, or stalls at the second-difference rounding
/// floor provided that floor is still under the certificate bar. The
/// residual is allowed to rise along the way: a start with a nonzero
/// position-gradient walks its spikes toward the nearest critical point in
/// order-one steps before the quadratic regime takes over.
pub fn newton_polish(grid: &Grid, u_init: &[f64], p: f64) -> Result<PolishedField> {
    let mut u = u_init.to_vec();
    let sup = |f: &[f64]| f.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut res = sup(&pde_residual(grid, &u, p));
    let r0 = res;
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    while res >= POLISH_TOL {
        if !res.is_finite() || res > 1e3 * r0.max(1.0) {
            return Err(Error::NewtonDiverged(format!(
                "polish residual blew up to {res:.3e} at iteration {iterations}"
            )));
        }
        if res < RESIDUAL_BAR && res >= 0.5 * prev {
            // Bottomed out at the cancellation floor of the second
            // difference, already under the certificate bar.
            break;
        }
        if iterations == POLISH_CAP {
            return Err(Error::NewtonDiverged(format!(
                "polish residual {res:.3e} after {POLISH_CAP} iterations"
            )));
        }
        let f = pde_residual(grid, &u, p);
        let coeff: Vec<f64> = u.iter().map(|&v| p * v.max(0.0).powf(p - 1.0)).collect();
        let a = grid.shifted_matrix(&coeff);
        let band = BandLdl::factor(&a, grid.bandwidth, 1.0, 1e-12)?;
        let rhs: Vec<f64> = f.iter().zip(&grid.weights).map(|(fv, v)| fv * v).collect();
        let delta = band.solve(&rhs);
        for (uv, dv) in u.iter_mut().zip(&delta) {
            *uv += dv;
        }
        iterations += 1;
        prev = res;
        res = sup(&pde_residual(grid, &u, p));
    }
    let shift =
        u.iter().zip(u_init).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
    Ok(PolishedField { u, iterations, residual: res, shift })
}

/// Strict local maxima of a lattice field and its positivity margin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaximaCount {
    pub count: usize,
    /// Rescaled coordinates of the maxima, in node order.
    pub locations: Vec<[f64; 2]>,
    pub min_u: f64,
}

/// Count nodes strictly above every in-domain neighbor. Ties disqualify
/// both sides, so a constant field has no maxima at all.
pub fn count_local_maxima(grid: &Grid, u: &[f64]) -> MaximaCount {
    let mut locations = Vec::new();
    for i in 0..grid.n_nodes() {
        if grid.neighbors(i).into_iter().all(|j| u[j] < u[i]) {
            locations.push(grid.coords[i]);
        }
    }
    let min_u = u.iter().copied().fold(f64::INFINITY, f64::min);
    MaximaCount { count: locations.len(), locations, min_u }
}

/// Everything the pipeline asserts about one finished maximizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionCertificate {
    pub k: usize,
    pub c_max: f64,
    #[serde(with = "float_repr")]
    pub dominance_ratio: f64,
    /// Polished PDE residual, max norm.
    #[serde(with = "float_repr")]
    pub residual: f64,
    pub polish_iterations: usize,
    /// max |u_polished − (w+φ)|.
    #[serde(with = "float_repr")]
    pub polish_shift: f64,
    pub maxima_count: usize,
    /// Physical locations of the polished field's maxima.
    pub maxima: Vec<[f64; 2]>,
    /// Largest rescaled distance from a spike center to its nearest
    /// polished maximum; expect at most a couple of cells.
    pub max_center_offset: f64,
    pub min_u: f64,
    pub pass: bool,
}

/// Run the full battery at one configuration: audit, polish, count. PASS
/// requires residual < 10⁻¹⁰, max |c| < 10⁻⁶, exactly k maxima, and a
/// positive field; dominance is reported but not gated, since it certifies
/// the audit itself rather than the solution.
pub fn certify(
    bank: &SpikeBank,
    config: &Configuration,
    params: &ReduceParams,
) -> Result<SolutionCertificate> {
    let params = &ReduceParams { tol_fp: params.tol_fp.min(1e-12), ..params.clone() };
    let grid = bank.grid;
    let eps = grid.eps;
    let k = config.k();
    let audit = multiplier_audit(bank, config, params)?;
    let (u0, _red) = reduced_field(bank, config, params)?;

    let (polished, iterations, residual, shift) =
        match newton_polish(grid, &u0.vals, bank.profile.p) {
            Ok(p) => {
                let (i, r, s) = (p.iterations, p.residual, p.shift);
                (p.u, i, r, s)
            }
            Err(Error::NewtonDiverged(_)) => {
                (u0.vals.clone(), POLISH_CAP, f64::INFINITY, f64::NAN)
            }
            Err(e) => return Err(e),
        };

    let maxima = count_local_maxima(grid, &polished);
    let mut max_center_offset = 0.0f64;
    for &q in &config.points {
        let c = grid.coords[grid.nearest_node([q[0] / eps, q[1] / eps])];
        let nearest = maxima
            .locations
            .iter()
            .map(|&m| crate::domain::dist(m, c))
            .fold(f64::INFINITY, f64::min);
        max_center_offset = max_center_offset.max(nearest);
    }

    let pass = residual < RESIDUAL_BAR
        && audit.c_max < MULTIPLIER_BAR
        && maxima.count == k
        && maxima.min_u > 0.0;
    Ok(SolutionCertificate {
        k,
        c_max: audit.c_max,
        dominance_ratio: audit.dominance_ratio,
        residual,
        polish_iterations: iterations,
        polish_shift: shift,
        maxima_count: maxima.count,
        maxima: maxima.locations.iter().map(|m| [m[0] * eps, m[1] * eps]).collect(),
        max_center_offset,
        min_u: maxima.min_u,
        pass,
    })
}
