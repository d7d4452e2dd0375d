//! Lyapunov-Schmidt reduction: the projected linear solver and the
//! nonlinear fixed point producing the correction φ and multipliers c_ij.
//!
//! The ansatz w = Σᵢ vᵢ misses being a solution by
//! S(w) = Δw − w + w₊ᵖ. The correction solves
//!
//!   Lφ − Σᵢⱼ c_ij Z_ij = −(S(w) + N(φ)),   ⟨φ, Z_ij⟩ = 0,
//!
//! with L = Δ − 1 + p·w₊^{p−1} frozen at the ansatz and
//! N(φ) = (w+φ)₊ᵖ − w₊ᵖ − p·w₊^{p−1}φ. Discretely this is one symmetric
//! bordered system per configuration,
//!
//!   [ S + diag(V(1−c))   V∘Z ] [φ]   [ V∘(S(w) + N(φ)) ]
//!   [ (V∘Z)ᵀ              0  ] [y] = [        0        ],
//!
//! whose first block row reads −V∘(Lφ) + Σ y V∘Z = −V∘h, i.e. exactly
//! Lφ − Σ y Z = h with y = c, and whose second row is the V-weighted
//! orthogonality. The factorization is reused across every fixed-point
//! iteration since L and Z depend only on the spike locations.
//!
//! Because each corrected spike solves Δv − v = −freeᵖ exactly on the
//! lattice, S(w) needs no Laplacian at all: it is the pointwise difference
//! (Σv)₊ᵖ − Σ freeᵖ, which is what keeps the error field at the
//! exponentially small scale the contraction needs.

use serde::{Deserialize, Serialize};

use crate::ansatz::{cutoff, star_norm, Configuration, Provenance, SpikeBank, SpikeField};
use crate::domain::{dist, Domain};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{symmetric_eigenvalues, weighted_least_squares, BandLdl, BorderedSolver};

/// Knobs of the reduction. `eta` sets the decay rate of the *-norm weight;
/// the tolerances are the fixed-point increment bar and the orthogonality
/// drift allowed per iterate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReduceParams {
    pub eta: f64,
    pub tol_fp: f64,
    pub tol_orth: f64,
    pub max_iterations: usize,
}

impl Default for ReduceParams {
    fn default() -> Self {
        ReduceParams { eta: 0.5, tol_fp: 1e-10, tol_orth: 1e-9, max_iterations: 60 }
    }
}

/// Result of the reduction at one configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedSolution {
    pub phi: SpikeField,
    /// Multipliers, ordered like `labels`.
    pub c: Vec<f64>,
    /// (spike index, axis) per multiplier.
    pub labels: Vec<(usize, usize)>,
    pub star_norm_phi: f64,
    pub iterations: usize,
    /// ‖φ_{m+1} − φ_m‖_* per iteration.
    pub residual_trace: Vec<f64>,
    /// max_ij |⟨φ, Z_ij⟩| at the final iterate.
    pub orthogonality_defect: f64,
    /// Largest observed ‖φ‖_*/‖h‖_* across the linear solves, the measured
    /// stability constant of the projected problem.
    pub stability_c: f64,
}

impl ReducedSolution {
    pub fn c_max(&self) -> f64 {
        self.c.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }
}

/// The frozen linear half of the reduction, factored once per
/// configuration.
pub struct ProjectedSystem<'a, 'b> {
    pub bank: &'b SpikeBank<'a>,
    pub config: Configuration,
    /// Ansatz w = Σ corrected spikes.
    pub w_sum: SpikeField,
    /// Σ freeᵖ, the exact lattice source of the ansatz.
    source_sum: Vec<f64>,
    /// Linearization coefficient p·w₊^{p−1} per node.
    pub coeff: Vec<f64>,
    /// Projection directions, spike-major.
    pub z: Vec<Vec<f64>>,
    pub labels: Vec<(usize, usize)>,
    /// Snapped spike centers in rescaled coordinates, for the *-norm weight.
    pub centers: Vec<[f64; 2]>,
    solver: BorderedSolver,
}

impl<'a, 'b> ProjectedSystem<'a, 'b> {
    pub fn new(bank: &'b SpikeBank<'a>, config: &Configuration) -> Result<Self> {
        let grid = bank.grid;
        let p = bank.profile.p;
        let n = grid.n_nodes();
        let spikes = bank.spikes(config)?;
        let mut w = vec![0.0f64; n];
        let mut source = vec![0.0f64; n];
        for s in &spikes {
            for i in 0..n {
                w[i] += s.corrected[i];
                source[i] += s.free_p[i];
            }
        }
        let proj = bank.projection_set(config)?;
        let coeff: Vec<f64> = w.iter().map(|&u| p * u.max(0.0).powf(p - 1.0)).collect();
        let a = grid.shifted_matrix(&coeff);
        let border: Vec<Vec<f64>> = proj
            .z
            .iter()
            .map(|zf| zf.iter().zip(&grid.weights).map(|(z, v)| z * v).collect())
            .collect();
        let solver = BorderedSolver::new(a, border, grid.bandwidth, 1.0)?;
        let centers = config
            .points
            .iter()
            .map(|&q| grid.coords[grid.nearest_node([q[0] / grid.eps, q[1] / grid.eps])])
            .collect();
        let provenance =
            if spikes.len() == 1 { Provenance::SingleSpike } else { Provenance::SpikeSum };
        Ok(ProjectedSystem {
            bank,
            config: config.clone(),
            w_sum: SpikeField::new(w, provenance),
            source_sum: source,
            coeff,
            z: proj.z,
            labels: proj.labels,
            centers,
            solver,
        })
    }

    /// S(w) at the ansatz: (Σv)₊ᵖ − Σ freeᵖ, exact on the lattice.
    pub fn error_field(&self) -> SpikeField {
        let p = self.bank.profile.p;
        let vals = self
            .w_sum
            .iter()
            .zip(&self.source_sum)
            .map(|(&u, &s)| u.max(0.0).powf(p) - s)
            .collect();
        SpikeField::new(vals, Provenance::Residual)
    }

    /// Solve Lφ − Σ c_ij Z_ij = h with ⟨φ, Z_ij⟩ = 0. Returns (φ, c).
    pub fn solve(&self, h: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let grid = self.bank.grid;
        let f: Vec<f64> = h.iter().zip(&grid.weights).map(|(hi, v)| -hi * v).collect();
        let g = vec![0.0; self.z.len()];
        self.solver.solve(&f, &g)
    }

    /// Max-norm residual of Lφ − Σ c Z − h, assembled through the grid
    /// operators rather than through the factorization.
    pub fn residual(&self, h: &[f64], phi: &[f64], c: &[f64]) -> f64 {
        let lap = self.bank.grid.laplacian(phi);
        let mut worst = 0.0f64;
        for i in 0..phi.len() {
            let mut r = lap[i] - phi[i] + self.coeff[i] * phi[i] - h[i];
            for (m, zf) in self.z.iter().enumerate() {
                r -= c[m] * zf[i];
            }
            worst = worst.max(r.abs());
        }
        worst
    }

    /// max_ij |⟨v, Z_ij⟩| over the quadrature inner product.
    pub fn orthogonality_defect(&self, v: &[f64]) -> f64 {
        self.z.iter().map(|zf| self.bank.grid.inner(zf, v).abs()).fold(0.0f64, f64::max)
    }
}

/// S(w) of a configuration without factoring anything.
pub fn error_field(bank: &SpikeBank, config: &Configuration) -> Result<SpikeField> {
    let grid = bank.grid;
    let p = bank.profile.p;
    let n = grid.n_nodes();
    let spikes = bank.spikes(config)?;
    let mut w = vec![0.0f64; n];
    let mut source = vec![0.0f64; n];
    for s in &spikes {
        for i in 0..n {
            w[i] += s.corrected[i];
            source[i] += s.free_p[i];
        }
    }
    let vals = w.iter().zip(&source).map(|(&u, &s)| u.max(0.0).powf(p) - s).collect();
    Ok(SpikeField::new(vals, Provenance::Residual))
}

/// N(φ) = (w+φ)₊ᵖ − w₊ᵖ − p·w₊^{p−1}φ, the part of the nonlinearity the
/// frozen linearization misses. Positive parts keep fractional p real.
pub fn nonlinear_remainder(w: &[f64], phi: &[f64], p: f64) -> Vec<f64> {
    w.iter()
        .zip(phi)
        .map(|(&wv, &ph)| {
            let base = wv.max(0.0);
            (wv + ph).max(0.0).powf(p) - base.powf(p) - p * base.powf(p - 1.0) * ph
        })
        .collect()
}

/// Pointwise residual of the unprojected equation, Δu − u + u₊ᵖ.
pub fn pde_residual(grid: &Grid, u: &[f64], p: f64) -> Vec<f64> {
    let lap = grid.laplacian(u);
    lap.iter().zip(u).map(|(l, &uv)| l - uv + uv.max(0.0).powf(p)).collect()
}

/// Run the fixed point φ ↦ A(S(w) + N(φ)) from φ₀ = 0.
pub fn reduce(bank: &SpikeBank, config: &Configuration, params: &ReduceParams) -> Result<ReducedSolution> {
    reduce_from(bank, config, params, None)
}

/// Same fixed point from a caller-supplied start, the uniqueness hook.
pub fn reduce_from(
    bank: &SpikeBank,
    config: &Configuration,
    params: &ReduceParams,
    start: Option<&[f64]>,
) -> Result<ReducedSolution> {
    let grid = bank.grid;
    if config.k() == 0 {
        return Ok(ReducedSolution {
            phi: SpikeField::new(vec![0.0; grid.n_nodes()], Provenance::Correction),
            c: Vec::new(),
            labels: Vec::new(),
            star_norm_phi: 0.0,
            iterations: 1,
            residual_trace: vec![0.0],
            orthogonality_defect: 0.0,
            stability_c: 0.0,
        });
    }
    let p = bank.profile.p;
    let sys = ProjectedSystem::new(bank, config)?;
    let s_eps = sys.error_field();
    let mut phi: Vec<f64> = match start {
        Some(s) => s.to_vec(),
        None => vec![0.0; grid.n_nodes()],
    };
    let mut c = vec![0.0; sys.z.len()];
    let mut trace: Vec<f64> = Vec::new();
    let mut stability = 0.0f64;
    let mut rising = 0usize;
    let mut defect = 0.0f64;
    let mut converged = false;
    let mut iterations = 0usize;
    for m in 1..=params.max_iterations {
        iterations = m;
        let nl = nonlinear_remainder(&sys.w_sum, &phi, p);
        let h: Vec<f64> = s_eps.iter().zip(&nl).map(|(s, n)| -(s + n)).collect();
        let (phi_new, c_new) = sys.solve(&h)?;
        defect = sys.orthogonality_defect(&phi_new);
        if defect >= params.tol_orth {
            return Err(Error::LinearSolveFailed(format!(
                "projection drift {defect:.3e} exceeds {:.1e}",
                params.tol_orth
            )));
        }
        let diff: Vec<f64> = phi_new.iter().zip(&phi).map(|(a, b)| a - b).collect();
        let delta = star_norm(grid, &diff, &sys.centers, params.eta);
        let h_norm = star_norm(grid, &h, &sys.centers, params.eta);
        if h_norm > 0.0 {
            stability = stability.max(star_norm(grid, &phi_new, &sys.centers, params.eta) / h_norm);
        }
        if let Some(&prev) = trace.last() {
            rising = if delta > prev { rising + 1 } else { 0 };
        }
        trace.push(delta);
        phi = phi_new;
        c = c_new;
        if delta < params.tol_fp {
            converged = true;
            break;
        }
        if rising >= 2 {
            return Err(Error::ContractionFailed { iterations: m, residual: delta });
        }
    }
    if !converged {
        return Err(Error::ContractionFailed {
            iterations,
            residual: trace.last().copied().unwrap_or(f64::NAN),
        });
    }
    let star_norm_phi = star_norm(grid, &phi, &sys.centers, params.eta);
    Ok(ReducedSolution {
        phi: SpikeField::new(phi, Provenance::Correction),
        c,
        labels: sys.labels.clone(),
        star_norm_phi,
        iterations,
        residual_trace: trace,
        orthogonality_defect: defect,
        stability_c: stability,
    })
}

/// Ansatz plus correction: the field u = w + φ the rest of the pipeline
/// consumes, together with the reduction record.
pub fn reduced_field(
    bank: &SpikeBank,
    config: &Configuration,
    params: &ReduceParams,
) -> Result<(SpikeField, ReducedSolution)> {
    let w = bank.sum(config)?;
    let red = reduce(bank, config, params)?;
    let vals = w.iter().zip(red.phi.iter()).map(|(a, b)| a + b).collect();
    Ok((SpikeField::new(vals, Provenance::Solution), red))
}

/// What adding one spike changes beyond the new spike itself, and how much
/// of that lives in the known near-kernel directions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncrementReport {
    /// Discrete H¹ norm squared of u_{k+1} − u_k − u_new.
    pub h1_norm_sq: f64,
    /// Least-squares coefficients against the modes χ·φ₀(·−Q_i/ε).
    pub coeff_modes: Vec<f64>,
    /// Least-squares coefficients against the Z_ij.
    pub coeff_z: Vec<f64>,
    /// H¹ norm squared of the part both families leave unexplained.
    pub residual_h1_norm_sq: f64,
}

/// Compare the (k+1)-spike solution with the k-spike solution plus a fresh
/// single spike at `q_new`, and decompose the difference over the spike
/// modes and translation directions.
pub fn incremental_difference_diagnostic(
    bank: &SpikeBank,
    domain: &Domain,
    config_k: &Configuration,
    q_new: [f64; 2],
    params: &ReduceParams,
) -> Result<IncrementReport> {
    let grid = bank.grid;
    let slack = grid.h * grid.eps;
    let mut pts = config_k.points.clone();
    pts.push(q_new);
    let config_k1 = Configuration::new(domain, pts, config_k.rho, slack)?;
    let single = Configuration::new(domain, vec![q_new], config_k.rho, slack)?;
    let (u_k1, _) = reduced_field(bank, &config_k1, params)?;
    let (u_k, _) = reduced_field(bank, config_k, params)?;
    let (u_one, _) = reduced_field(bank, &single, params)?;
    let inc: Vec<f64> = (0..grid.n_nodes()).map(|i| u_k1[i] - u_k[i] - u_one[i]).collect();
    let h1 = grid.h1_norm_sq(&inc);

    let modes = spike_mode_fields(bank, &config_k1);
    let zset = bank.projection_set(&config_k1)?;
    let mut basis = modes;
    let n_modes = basis.len();
    basis.extend(zset.z.iter().cloned());
    let coeffs = weighted_least_squares(&basis, &inc, &grid.weights)?;
    let mut psi = inc;
    for (cf, b) in coeffs.iter().zip(&basis) {
        for (pv, bv) in psi.iter_mut().zip(b) {
            *pv -= cf * bv;
        }
    }
    Ok(IncrementReport {
        h1_norm_sq: h1,
        coeff_modes: coeffs[..n_modes].to_vec(),
        coeff_z: coeffs[n_modes..].to_vec(),
        residual_h1_norm_sq: grid.h1_norm_sq(&psi),
    })
}

/// χ·φ₀(|x − Qᵢ/ε|) per spike: the cut-off principal modes spanning, with
/// the Z_ij, the directions the coercivity estimate removes.
fn spike_mode_fields(bank: &SpikeBank, config: &Configuration) -> Vec<Vec<f64>> {
    let grid = bank.grid;
    config
        .points
        .iter()
        .map(|&q| {
            let node = grid.nearest_node([q[0] / grid.eps, q[1] / grid.eps]);
            let qc = grid.coords[node];
            grid.coords
                .iter()
                .map(|&x| {
                    let r = dist(x, qc);
                    let chi = cutoff(r, config.rho);
                    if chi == 0.0 {
                        0.0
                    } else {
                        chi * bank.gs.eval_phi0(r)
                    }
                })
                .collect()
        })
        .collect()
}

/// Smallest eigenvalue of −L on the V-weighted complement of the spike
/// modes and translation directions, located by inertia bisection: with
/// m border columns, A − σV is positive definite on ker Bᵀ exactly when
/// the bordered matrix [A − σV, B; Bᵀ, 0] has m negative eigenvalues,
/// counted as band-LDL pivots plus Schur-complement eigenvalue signs.
pub fn coercivity_constant(bank: &SpikeBank, config: &Configuration) -> Result<f64> {
    let grid = bank.grid;
    let p = bank.profile.p;
    let w = bank.sum(config)?;
    let coeff: Vec<f64> = w.iter().map(|&u| p * u.max(0.0).powf(p - 1.0)).collect();
    let a = grid.shifted_matrix(&coeff);
    let mut border: Vec<Vec<f64>> = spike_mode_fields(bank, config)
        .into_iter()
        .map(|f| f.iter().zip(&grid.weights).map(|(v, wt)| v * wt).collect())
        .collect();
    let zset = bank.projection_set(config)?;
    for zf in &zset.z {
        border.push(zf.iter().zip(&grid.weights).map(|(v, wt)| v * wt).collect());
    }
    let m = border.len();
    let nn = grid.n_nodes();

    let restricted_pd = |sigma: f64| -> Result<bool> {
        let shift: Vec<f64> = grid.weights.iter().map(|v| -sigma * v).collect();
        let shifted = a.shifted_diag(&shift);
        let band = BandLdl::factor(&shifted, grid.bandwidth, 1.0, 1e-12)?;
        let mut neg = band.negative_pivots();
        if m > 0 {
            let cols: Vec<Vec<f64>> = border.iter().map(|b| band.solve(b)).collect();
            let mut s = vec![0.0f64; m * m];
            for i in 0..m {
                for j in 0..m {
                    let mut acc = 0.0;
                    for x in 0..nn {
                        acc += border[i][x] * cols[j][x];
                    }
                    s[i * m + j] = -acc;
                }
            }
            for i in 0..m {
                for j in 0..i {
                    let av = 0.5 * (s[i * m + j] + s[j * m + i]);
                    s[i * m + j] = av;
                    s[j * m + i] = av;
                }
            }
            neg += symmetric_eigenvalues(&s, m).into_iter().filter(|&e| e < 0.0).count();
        }
        Ok(neg == m)
    };

    if !restricted_pd(0.0)? {
        return Ok(0.0);
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while restricted_pd(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 16.0 {
            return Ok(lo);
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if restricted_pd(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
