//! Spike profiles on the mesh: corrected single spikes, their sums, the
//! projection directions Z_ij and the weighted sup norm.
//!
//! The free profile placed at a spike center is not the sampled continuum
//! ground state but the lattice soliton: the solution of the discrete
//! equation Δ_h w − w + wᵖ = 0 on a large reference patch, computed once
//! per (dimension, exponent, mesh width) by Newton iteration and reused by
//! integer offset for every spike. Sampling the continuum profile instead
//! would leave an O(h²) truncation residue everywhere, drowning the
//! exponentially small interaction quantities this library exists to
//! measure; the lattice soliton makes the ansatz residual vanish except
//! where spikes genuinely interact with each other or the boundary.
//!
//! A corrected spike v then solves the discrete Neumann problem
//! (−Δ_h + 1) v = w_freeᵖ on the domain grid. Away from the boundary
//! v = w_free to rounding; near the boundary the difference
//! φ = w_free − v is the mirror-image correction, negative and of size
//! w(2d). By construction the full residual of a sum of corrected spikes
//! collapses to the pointwise expression (Σv_i)₊ᵖ − Σw_iᵖ, with no
//! Laplacian left in it.

use std::collections::HashMap;
use std::ops::Deref;
use std::sync::{Arc, Mutex, OnceLock};

use crate::domain::{check_feasible, dist, Domain};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ground_state::GroundState;
use crate::linalg::band::BandLdl;
use serde::{Deserialize, Serialize};

/// Half-width of the reference patch carrying the lattice soliton, in
/// rescaled units. Beyond it the profile has decayed below 5e-8 and the
/// continuum tail formula takes over.
pub const PATCH_HALF: f64 = 18.0;

/// A set of spike centers with its separation parameter. Points are in
/// physical coordinates; feasibility (pairwise and mirror-image gaps of at
/// least ρε) is checked at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub points: Vec<[f64; 2]>,
    pub rho: f64,
}

impl Configuration {
    /// Validates the separation constraints. `corner_slack` widens the set
    /// of boundary faces whose mirror images are checked; pass one physical
    /// mesh cell (h·ε) so near-corner spikes clear both walls.
    pub fn new(
        domain: &Domain,
        points: Vec<[f64; 2]>,
        rho: f64,
        corner_slack: f64,
    ) -> Result<Self> {
        if !(rho > 1.0) {
            return Err(Error::ConfigParse(format!("rho must exceed 1, got {rho}")));
        }
        check_feasible(domain, &points, rho, corner_slack)?;
        Ok(Configuration { points, rho })
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    /// Copy with point `i` relocated. Not validated; callers re-check
    /// feasibility when it matters.
    pub fn moved(&self, i: usize, q: [f64; 2]) -> Configuration {
        let mut points = self.points.clone();
        points[i] = q;
        Configuration { points, rho: self.rho }
    }

    /// Copy with one more point appended, unvalidated.
    pub fn extended(&self, q: [f64; 2]) -> Configuration {
        let mut points = self.points.clone();
        points.push(q);
        Configuration { points, rho: self.rho }
    }

    /// Spike centers in rescaled coordinates.
    pub fn rescaled(&self, eps: f64) -> Vec<[f64; 2]> {
        self.points.iter().map(|q| [q[0] / eps, q[1] / eps]).collect()
    }
}

/// What a discrete field over the grid nodes represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    SingleSpike,
    SpikeSum,
    Correction,
    Solution,
    Residual,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpikeField {
    pub vals: Vec<f64>,
    pub provenance: Provenance,
}

impl SpikeField {
    pub fn new(vals: Vec<f64>, provenance: Provenance) -> Self {
        SpikeField { vals, provenance }
    }
}

impl Deref for SpikeField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.vals
    }
}

/// Modified Helmholtz free-space kernel: the decaying solution of
/// −K″ + K = δ in one dimension (e^{-r}/2) and (−Δ + 1)K = δ in two
/// (K₀(r)/2π). Used as the reference shape for boundary corrections.
pub fn helmholtz_kernel(dim: usize, r: f64) -> f64 {
    match dim {
        1 => 0.5 * (-r).exp(),
        2 => bessel_k0(r) / (2.0 * std::f64::consts::PI),
        _ => unreachable!("kernel only defined for dim 1 and 2"),
    }
}

/// Modified Bessel function K₀ by the Abramowitz & Stegun 9.8.5/9.8.6
/// polynomial fits, absolute error below 2e-7.
fn bessel_k0(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    if x <= 2.0 {
        let t = x / 3.75;
        let t2 = t * t;
        let i0 = 1.0
            + t2 * (3.5156229
                + t2 * (3.0899424
                    + t2 * (1.2067492 + t2 * (0.2659732 + t2 * (0.0360768 + t2 * 0.0045813)))));
        let s = x * x / 4.0;
        -(x / 2.0).ln() * i0 - 0.57721566
            + s * (0.42278420
                + s * (0.23069756
                    + s * (0.03488590 + s * (0.00262698 + s * (0.00010750 + s * 0.00000740)))))
    } else {
        let s = 2.0 / x;
        let poly = 1.25331414
            + s * (-0.07832358
                + s * (0.02189568
                    + s * (-0.01062446 + s * (0.00587872 + s * (-0.00251540 + s * 0.00053208)))));
        poly * (-x).exp() / x.sqrt()
    }
}

/// Inner and outer radii of the projection cutoff. The outer radius is the
/// stated support ball ρ²/(2(ρ+1)); the transition occupies a shell of
/// relative width 1/ρ inside it.
pub fn cutoff_radii(rho: f64) -> (f64, f64) {
    let r_out = rho * rho / (2.0 * (rho + 1.0));
    (r_out * (1.0 - 1.0 / rho), r_out)
}

/// C² radial cutoff: 1 inside the transition shell, 0 outside the support
/// ball, quintic smoothstep between.
pub fn cutoff(r: f64, rho: f64) -> f64 {
    let (r_in, r_out) = cutoff_radii(rho);
    if r <= r_in {
        1.0
    } else if r >= r_out {
        0.0
    } else {
        let s = (r - r_in) / (r_out - r_in);
        1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    }
}

/// Weighted sup norm ‖f‖_* = sup |f| / W, W = Σ_i e^{-η|x - Q_i/ε|}.
/// With no centers the weight is absent and the plain sup is returned.
pub fn star_norm(grid: &Grid, vals: &[f64], centers: &[[f64; 2]], eta: f64) -> f64 {
    if centers.is_empty() {
        return vals.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let mut out = 0.0f64;
    for (i, x) in grid.coords.iter().enumerate() {
        let w: f64 = centers.iter().map(|c| (-eta * dist(*x, *c)).exp()).sum();
        out = out.max(vals[i].abs() / w);
    }
    out
}

/// The discrete free soliton on the reference patch: Δ_h w − w + wᵖ = 0 on
/// [-PATCH_HALF, PATCH_HALF]ⁿ with zero-flux walls, indexed by lattice
/// offset from the center node.
#[derive(Debug)]
pub struct LatticeProfile {
    pub dim: usize,
    pub p: f64,
    pub h: f64,
    /// Patch cells per axis are 2m+1; offsets up to ±m are tabulated.
    m: i64,
    side: usize,
    vals: Vec<f64>,
    /// Discrete energy ½‖w‖²_{H¹,h} − ‖w₊^{p+1}‖_h/(p+1) of the patch
    /// soliton; the grid-native counterpart of I(w).
    pub i_w_grid: f64,
    /// Per-axis Σ_faces h^{n-2}(Δ_face w)², the lattice ∫(∂w/∂x_j)².
    pub grad_sq: [f64; 2],
    pub newton_iterations: usize,
    pub residual: f64,
}

impl LatticeProfile {
    /// Profile value at a lattice offset from the center, when tabulated.
    pub fn value(&self, off: [i64; 2]) -> Option<f64> {
        if off[0].abs() > self.m || off[1].abs() > self.m {
            return None;
        }
        let ix = (off[0] + self.m) as usize;
        let iy = if self.dim == 1 { 0 } else { (off[1] + self.m) as usize };
        Some(self.vals[iy * self.side + ix])
    }

    pub fn center_value(&self) -> f64 {
        self.value([0, 0]).unwrap()
    }

    fn build(gs: &GroundState, h: f64) -> Result<LatticeProfile> {
        let dim = gs.dim;
        let p = gs.p;
        let grid = Grid::box_grid(dim, PATCH_HALF, h);
        let n = grid.n_nodes();
        let mut u: Vec<f64> = grid.coords.iter().map(|c| gs.eval(c[0].hypot(c[1]))).collect();
        symmetrize(&grid, &mut u);

        // The residual floor is set by cancellation in the second
        // difference, eps·u/h²; don't ask for less than that.
        let tol = (1e-12 * gs.w0).max(8.0 * f64::EPSILON * gs.w0 / (h * h));
        let mut prev = f64::INFINITY;
        let mut res = f64::INFINITY;
        let mut iters = 0;
        for iter in 0..25 {
            let su = grid.stiffness.apply(&u);
            let f_v: Vec<f64> = (0..n)
                .map(|i| -su[i] + grid.weights[i] * (-u[i] + u[i].max(0.0).powf(p)))
                .collect();
            res = f_v
                .iter()
                .zip(&grid.weights)
                .map(|(f, w)| (f / w).abs())
                .fold(0.0, f64::max);
            iters = iter;
            if res < tol {
                break;
            }
            if res >= prev {
                // Stalled at the rounding floor is fine; growth is not.
                if res < 50.0 * tol {
                    break;
                }
                return Err(Error::IterationDiverged(format!(
                    "lattice profile Newton residual grew to {res:.3e} at iteration {iter}"
                )));
            }
            prev = res;
            let c: Vec<f64> = u.iter().map(|ui| p * ui.max(0.0).powf(p - 1.0)).collect();
            let m_v = grid.shifted_matrix(&c);
            let ldl = BandLdl::factor(&m_v, grid.bandwidth, 1.0, 1e-12)?;
            let delta = ldl.solve(&f_v);
            for (ui, d) in u.iter_mut().zip(&delta) {
                *ui += d;
            }
            symmetrize(&grid, &mut u);
        }
        if res > 50.0 * tol {
            return Err(Error::ToleranceNotMet(format!(
                "lattice profile residual {res:.3e} exceeds tol {tol:.3e}"
            )));
        }

        let su = grid.stiffness.apply(&u);
        let grad_total: f64 = su.iter().zip(&u).map(|(s, ui)| s * ui).sum();
        let mass = grid.inner(&u, &u);
        let pot = grid.integrate(|i| u[i].max(0.0).powf(p + 1.0));
        let i_w_grid = 0.5 * (grad_total + mass) - pot / (p + 1.0);
        let grad_sq = axis_grad_sq(&grid, &u);

        let m = ((grid.nx - 1) / 2) as i64;
        Ok(LatticeProfile {
            dim,
            p,
            h,
            m,
            side: grid.nx,
            vals: u,
            i_w_grid,
            grad_sq,
            newton_iterations: iters,
            residual: res,
        })
    }
}

/// Average a patch field over the symmetry group of the box (axis
/// reflections, plus the diagonal swap in two dimensions). The soliton is
/// invariant under all of these; projecting each Newton iterate back onto
/// the symmetric subspace keeps roundoff out of the near-null translation
/// modes, whose eigenvalues at this patch size sit below machine precision.
fn symmetrize(grid: &Grid, u: &mut [f64]) {
    let nx = grid.nx;
    let ny = grid.ny;
    let mut out = vec![0.0; u.len()];
    if grid.dim == 1 {
        for ix in 0..nx {
            out[ix] = 0.5 * (u[ix] + u[nx - 1 - ix]);
        }
    } else {
        for iy in 0..ny {
            for ix in 0..nx {
                let images = [
                    (ix, iy),
                    (nx - 1 - ix, iy),
                    (ix, ny - 1 - iy),
                    (nx - 1 - ix, ny - 1 - iy),
                    (iy, ix),
                    (ny - 1 - iy, ix),
                    (iy, nx - 1 - ix),
                    (ny - 1 - iy, nx - 1 - ix),
                ];
                let s: f64 = images.iter().map(|&(jx, jy)| u[jy * nx + jx]).sum();
                out[iy * nx + ix] = s / 8.0;
            }
        }
    }
    u.copy_from_slice(&out);
}

fn axis_grad_sq(grid: &Grid, u: &[f64]) -> [f64; 2] {
    let coeff = if grid.dim == 1 { 1.0 / grid.h } else { 1.0 };
    let mut out = [0.0; 2];
    for (a, &[ix, iy]) in grid.cells.iter().enumerate() {
        if ix + 1 < grid.nx {
            if let Some(b) = grid.node_at([
                grid.coords[a][0] + grid.h,
                grid.coords[a][1],
            ]) {
                out[0] += coeff * (u[b] - u[a]).powi(2);
            }
        }
        if grid.dim == 2 && iy + 1 < grid.ny {
            if let Some(b) = grid.node_at([
                grid.coords[a][0],
                grid.coords[a][1] + grid.h,
            ]) {
                out[1] += coeff * (u[b] - u[a]).powi(2);
            }
        }
    }
    out
}

/// Profiles are deterministic functions of (dim, p, h); keep the computed
/// ones around so repeated bank construction skips the Newton solve.
fn profile_cache(gs: &GroundState, h: f64) -> Result<Arc<LatticeProfile>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64, u64), Arc<LatticeProfile>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (gs.dim, gs.p.to_bits(), h.to_bits());
    if let Some(p) = cache.lock().unwrap().get(&key) {
        return Ok(p.clone());
    }
    let built = Arc::new(LatticeProfile::build(gs, h)?);
    cache.lock().unwrap().entry(key).or_insert_with(|| built.clone());
    Ok(built)
}

/// One spike, snapped to a grid node: its free lattice profile, the
/// corrected profile solving the discrete Neumann problem, and their
/// difference, the boundary correction.
#[derive(Debug)]
pub struct CorrectedSpike {
    /// Node the center snapped to.
    pub center: usize,
    /// Rescaled coordinates of that node.
    pub q: [f64; 2],
    /// Free profile w(· − q), lattice soliton inside the patch radius,
    /// continuum tail beyond.
    pub free: Vec<f64>,
    /// freeᵖ, precomputed: it is the corrected-spike source term and the
    /// weight in every interaction integral.
    pub free_p: Vec<f64>,
    /// v solving (−Δ_h + 1)v = freeᵖ with zero flux.
    pub corrected: Vec<f64>,
}

impl CorrectedSpike {
    /// φ = free − corrected, negative near the boundary, ~ −A_n K(|x−q*|).
    pub fn boundary_correction(&self) -> Vec<f64> {
        self.free.iter().zip(&self.corrected).map(|(w, v)| w - v).collect()
    }
}

/// Builds and caches corrected spikes over one grid. Holds the factored
/// screened-Poisson operator so each new spike costs a single back-solve.
pub struct SpikeBank<'a> {
    pub gs: &'a GroundState,
    pub grid: &'a Grid,
    pub profile: Arc<LatticeProfile>,
    helm: BandLdl,
    cache: Mutex<HashMap<[i64; 2], Arc<CorrectedSpike>>>,
}

/// Cached spikes kept before the map is cleared. A ladder sweep touches a
/// handful of centers at a time; the cap just stops trial moves from
/// accumulating fields forever.
const SPIKE_CACHE_CAP: usize = 32;

impl<'a> SpikeBank<'a> {
    pub fn new(gs: &'a GroundState, grid: &'a Grid) -> Result<Self> {
        let profile = profile_cache(gs, grid.h)?;
        let m = grid.helmholtz_matrix();
        let helm = BandLdl::factor(&m, grid.bandwidth, 1.0, 0.0)?;
        Ok(SpikeBank { gs, grid, profile, helm, cache: Mutex::new(HashMap::new()) })
    }

    /// Physical coordinates of the node a spike at `q_phys` snaps to.
    pub fn snap(&self, q_phys: [f64; 2]) -> [f64; 2] {
        let eps = self.grid.eps;
        let node = self.grid.nearest_node([q_phys[0] / eps, q_phys[1] / eps]);
        let c = self.grid.coords[node];
        [c[0] * eps, c[1] * eps]
    }

    /// Corrected spike centered at the node nearest to `q_phys`.
    pub fn spike_at(&self, q_phys: [f64; 2]) -> Result<Arc<CorrectedSpike>> {
        let eps = self.grid.eps;
        let node = self.grid.nearest_node([q_phys[0] / eps, q_phys[1] / eps]);
        let cell = [self.grid.cells[node][0] as i64, self.grid.cells[node][1] as i64];
        if let Some(hit) = self.cache.lock().unwrap().get(&cell) {
            return Ok(hit.clone());
        }
        let spike = Arc::new(self.build_spike(node)?);
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= SPIKE_CACHE_CAP {
            cache.clear();
        }
        cache.insert(cell, spike.clone());
        Ok(spike)
    }

    fn build_spike(&self, center: usize) -> Result<CorrectedSpike> {
        let grid = self.grid;
        let q = grid.coords[center];
        let n = grid.n_nodes();
        let mut free = vec![0.0; n];
        for i in 0..n {
            let off = grid.cell_offset(center, i);
            free[i] = match self.profile.value(off) {
                Some(v) => v,
                None => self.gs.eval(dist(grid.coords[i], q)),
            };
        }
        let free_p: Vec<f64> = free.iter().map(|w| w.max(0.0).powf(self.profile.p)).collect();
        let rhs: Vec<f64> = free_p.iter().zip(&grid.weights).map(|(f, w)| f * w).collect();
        let corrected = self.helm.solve(&rhs);
        Ok(CorrectedSpike { center, q, free, free_p, corrected })
    }

    /// All corrected spikes of a configuration, in order.
    pub fn spikes(&self, config: &Configuration) -> Result<Vec<Arc<CorrectedSpike>>> {
        config.points.iter().map(|&q| self.spike_at(q)).collect()
    }

    /// w_{ε,𝐐} = Σ corrected spikes.
    pub fn sum(&self, config: &Configuration) -> Result<SpikeField> {
        let spikes = self.spikes(config)?;
        let n = self.grid.n_nodes();
        let mut vals = vec![0.0; n];
        for s in &spikes {
            for (o, v) in vals.iter_mut().zip(&s.corrected) {
                *o += v;
            }
        }
        let provenance =
            if spikes.len() == 1 { Provenance::SingleSpike } else { Provenance::SpikeSum };
        Ok(SpikeField::new(vals, provenance))
    }

    /// Projection directions Z_ij = ∂w/∂x_j(· − q_i) · χ(|· − q_i|), one per
    /// spike and axis, each supported in the cutoff ball.
    pub fn projection_set(&self, config: &Configuration) -> Result<ProjectionSet> {
        let grid = self.grid;
        let eps = grid.eps;
        let rho = config.rho;
        let mut z = Vec::with_capacity(config.k() * grid.dim);
        let mut labels = Vec::new();
        for (i, &qp) in config.points.iter().enumerate() {
            let node = grid.nearest_node([qp[0] / eps, qp[1] / eps]);
            let q = grid.coords[node];
            for axis in 0..grid.dim {
                let mut field = vec![0.0; grid.n_nodes()];
                for (id, x) in grid.coords.iter().enumerate() {
                    let r = dist(*x, q);
                    if r == 0.0 {
                        continue;
                    }
                    let chi = cutoff(r, rho);
                    if chi == 0.0 {
                        continue;
                    }
                    field[id] = self.gs.eval_dw(r) * (x[axis] - q[axis]) / r * chi;
                }
                z.push(field);
                labels.push((i, axis));
            }
        }
        Ok(ProjectionSet { z, labels, rho })
    }
}

/// The Z_ij fields for one configuration, flattened spike-major.
pub struct ProjectionSet {
    pub z: Vec<Vec<f64>>,
    /// (spike index, axis) per entry of `z`.
    pub labels: Vec<(usize, usize)>,
    pub rho: f64,
}

impl ProjectionSet {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Shape;
    use crate::ground_state::solve_ground_state;
    use proptest::prelude::*;

    fn gs1() -> GroundState {
        solve_ground_state(1, 3.0, 35.0, 1e-10).unwrap()
    }

    fn gs2() -> GroundState {
        solve_ground_state(2, 3.0, 35.0, 1e-10).unwrap()
    }

    #[test]
    fn bessel_k0_matches_integral_representation() {
        // K₀(x) = ∫₀^∞ exp(−x cosh t) dt, by trapezoid over the doubly
        // exponentially decaying integrand.
        let oracle = |x: f64| {
            let ht = 0.005f64;
            let mut acc = 0.5 * (-x).exp();
            let mut t = ht;
            while t < 30.0 {
                let v = (-x * t.cosh()).exp();
                acc += v;
                if v < 1e-300 {
                    break;
                }
                t += ht;
            }
            acc * ht
        };
        for x in [0.3, 1.0, 2.0, 5.0, 10.0] {
            let got = bessel_k0(x);
            let want = oracle(x);
            assert!((got - want).abs() < 2e-7, "K0({x}) = {got}, oracle {want}");
        }
    }

    #[test]
    fn lattice_profile_solves_the_discrete_equation() {
        let gs = gs1();
        let prof = profile_cache(&gs, 0.25).unwrap();
        assert!(prof.residual < 1e-11, "1d residual {:.3e}", prof.residual);
        // The lattice soliton differs from the sampled continuum profile at
        // O(h²) but stays close to it.
        let diff0 = (prof.center_value() - gs.w0).abs();
        assert!(diff0 > 1e-6 && diff0 < 0.02, "center offset {diff0:.3e}");
        assert!((prof.i_w_grid - gs.i_w).abs() < 0.02 * gs.i_w);

        let gs = gs2();
        let prof = profile_cache(&gs, 0.25).unwrap();
        assert!(prof.residual < 1e-11, "2d residual {:.3e}", prof.residual);
        assert!((prof.i_w_grid - gs.i_w).abs() < 0.02 * gs.i_w);
        // Both axes carry the same discrete Dirichlet energy.
        let rel = (prof.grad_sq[0] - prof.grad_sq[1]).abs() / prof.grad_sq[0];
        assert!(rel < 1e-12, "axis asymmetry {rel:.3e}");
    }

    fn interval_bank(eps: f64, h: f64) -> (Domain, Grid) {
        let dom = Domain::new(Shape::Interval { a: 0.0, b: 1.0 }, eps).unwrap();
        let grid = Grid::from_domain(&dom, h).unwrap();
        (dom, grid)
    }

    #[test]
    fn corrected_spike_solves_its_equation_everywhere() {
        let gs = gs1();
        let (_dom, grid) = interval_bank(0.02, 0.25);
        let bank = SpikeBank::new(&gs, &grid).unwrap();
        let s = bank.spike_at([0.3, 0.0]).unwrap();
        assert!(s.corrected.iter().all(|v| *v > 0.0), "corrected spike must stay positive");
        // (−Δ+1)v = wᵖ holds at every node including the boundary cells,
        // which is exactly the zero-flux condition.
        let sv = grid.stiffness.apply(&s.corrected);
        let res = (0..grid.n_nodes())
            .map(|i| (sv[i] / grid.weights[i] + s.corrected[i] - s.free_p[i]).abs())
            .fold(0.0, f64::max);
        assert!(res < 1e-10, "discrete Neumann residual {res:.3e}");
    }

    #[test]
    fn deep_spike_needs_no_correction() {
        let gs = gs1();
        let (_dom, grid) = interval_bank(0.02, 0.25);
        let bank = SpikeBank::new(&gs, &grid).unwrap();
        // d/ε = 25 from either wall.
        let s = bank.spike_at([0.5, 0.0]).unwrap();
        let phi = s.boundary_correction();
        let max = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 1e-7 * gs.w0, "deep-spike correction {max:.3e}");
    }

    #[test]
    fn boundary_correction_tracks_the_kernel() {
        // The correction is a mirror-source response: φ(z) ≈ −c·K(|z−Q*|)
        // with one constant c > 0 across the near-boundary region.
        let gs = gs1();
        let (_dom, grid) = interval_bank(0.02, 0.25);
        let bank = SpikeBank::new(&gs, &grid).unwrap();
        let s = bank.spike_at([0.1, 0.0]).unwrap(); // d/ε = 5
        let phi = s.boundary_correction();
        let q_star = -s.q[0];
        let mut ratios = Vec::new();
        for (i, x) in grid.coords.iter().enumerate() {
            if x[0] <= 2.0 {
                ratios.push(phi[i] / helmholtz_kernel(1, (x[0] - q_star).abs()));
            }
        }
        assert!(ratios.iter().all(|r| *r < 0.0), "correction must be negative");
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo / hi < 1.25, "1d ratio spread [{lo:.4}, {hi:.4}]");

        let gs = gs2();
        let dom =
            Domain::new(Shape::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }, 0.05).unwrap();
        let grid2 = Grid::from_domain(&dom, 0.25).unwrap();
        let bank = SpikeBank::new(&gs, &grid2).unwrap();
        let s = bank.spike_at([0.25, 0.5]).unwrap(); // d/ε = 5 from x = 0
        let phi = s.boundary_correction();
        let q_star = [-s.q[0], s.q[1]];
        let mut ratios = Vec::new();
        for (i, x) in grid2.coords.iter().enumerate() {
            if x[0] <= 1.0 && (x[1] - s.q[1]).abs() <= 2.0 {
                ratios.push(phi[i] / helmholtz_kernel(2, dist(*x, q_star)));
            }
        }
        assert!(ratios.iter().all(|r| *r < 0.0));
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo / hi < 1.25, "2d ratio spread [{lo:.4}, {hi:.4}]");
    }

    #[test]
    fn sum_is_locally_one_spike_and_small_far_away() {
        let gs = gs1();
        let dom = Domain::new(Shape::Interval { a: 0.0, b: 1.0 }, 0.01).unwrap();
        let grid = Grid::from_domain(&dom, 0.25).unwrap();
        let bank = SpikeBank::new(&gs, &grid).unwrap();
        let mut near = Vec::new();
        let mut far = Vec::new();
        for rho in [8.0, 10.0, 12.0] {
            let q1 = [0.5 - rho * 0.01 / 2.0, 0.0];
            let q2 = [0.5 + rho * 0.01 / 2.0, 0.0];
            let config = Configuration::new(&dom, vec![q1, q2], rho, 0.0).unwrap();
            let sum = bank.sum(&config).unwrap();
            let s1 = bank.spike_at(q1).unwrap();
            let centers = config.rescaled(0.01);
            let mut m_near = 0.0f64;
            let mut m_far = 0.0f64;
            for (i, x) in grid.coords.iter().enumerate() {
                let d1 = dist(*x, centers[0]);
                let d2 = dist(*x, centers[1]);
                if d1 <= rho / 2.0 {
                    m_near = m_near.max((sum[i] - s1.corrected[i]).abs());
                } else if d2 > rho / 2.0 {
                    m_far = m_far.max(sum[i].abs());
                }
            }
            near.push((rho, m_near));
            far.push((rho, m_far));
        }
        for series in [&near, &far] {
            let slope = ((series[2].1 / series[0].1).ln()) / (series[2].0 - series[0].0);
            assert!(slope < -0.45, "decay slope {slope:.3}");
            for (rho, m) in series {
                assert!(*m < 4.0 * (-rho / 2.0).exp(), "C too large at rho {rho}: {m:.3e}");
            }
        }
    }

    #[test]
    fn projection_directions_are_near_orthonormal() {
        let gs = gs2();
        let dom =
            Domain::new(Shape::Rectangle { x0: 0.0, x1: 1.2, y0: 0.0, y1: 1.2 }, 0.05).unwrap();
        let grid = Grid::from_domain(&dom, 0.25).unwrap();
        let bank = SpikeBank::new(&gs, &grid).unwrap();
        let rho = 8.0;
        let config = Configuration::new(
            &dom,
            vec![[0.4, 0.6], [0.8, 0.6]],
            rho,
            0.0,
        )
        .unwrap();
        let zs = bank.projection_set(&config).unwrap();
        assert_eq!(zs.len(), 4);
        let cont = gs.grad_component_l2sq();
        for a in 0..zs.len() {
            for b in 0..=a {
                let g = grid.inner(&zs.z[a], &zs.z[b]);
                if a == b {
                    let gap = (g - cont).abs() / cont;
                    assert!(gap < (-0.5 * rho).exp(), "diagonal gap {gap:.3e}");
                } else {
                    assert!(
                        g.abs() < (-rho / 2.0).exp() * cont,
                        "off-diagonal {a},{b}: {g:.3e}"
                    );
                }
            }
        }
        // Odd integrand: the plain integral of every Z vanishes.
        for z in &zs.z {
            let total = grid.integrate(|i| z[i]);
            assert!(total.abs() < 1e-12, "∫Z = {total:.3e}");
        }
    }

    #[test]
    fn cutoff_mass_gap_shrinks_with_rho() {
        // 1 − ∫(w′χ)²/∫(w′)² ≤ e^{−ρ/2}, radial continuum integrals.
        let gs = gs1();
        let dr = gs.r_grid[1] - gs.r_grid[0];
        let total: f64 = gs.dw.iter().map(|d| d * d).sum::<f64>() * dr;
        let mut last = 1.0;
        for rho in [8.0, 12.0] {
            let kept: f64 = gs
                .r_grid
                .iter()
                .zip(&gs.dw)
                .map(|(r, d)| (d * cutoff(*r, rho)).powi(2))
                .sum::<f64>()
                * dr;
            let gap = 1.0 - kept / total;
            assert!(gap > 0.0 && gap < (-0.5 * rho).exp(), "gap {gap:.3e} at rho {rho}");
            assert!(gap < last);
            last = gap;
        }
        let (r_in, r_out) = cutoff_radii(8.0);
        assert!(cutoff(r_in, 8.0) == 1.0 && cutoff(r_out, 8.0) == 0.0);
        assert!(r_out == 32.0 / 9.0);
    }

    #[test]
    fn star_norm_of_a_free_spike_peaks_just_off_center() {
        let gs = gs1();
        let (_dom, grid) = interval_bank(0.02, 0.25);
        let bank = SpikeBank::new(&gs, &grid).unwrap();
        let s = bank.spike_at([0.5, 0.0]).unwrap();
        // Sampled continuum profile against the weight e^{-r/2}. The
        // quotient w(r)e^{r/2} rises from the center (the weight's slope
        // beats w′(0) = 0) and tops out where tanh r = η; on this lattice
        // the nearest node distance is 0.5, so the closed form pins the sup.
        let vals: Vec<f64> =
            grid.coords.iter().map(|x| gs.eval(dist(*x, s.q))).collect();
        let norm = star_norm(&grid, &vals, &[s.q], 0.5);
        let expected = std::f64::consts::SQRT_2 / 0.5f64.cosh() * 0.25f64.exp();
        assert!(norm > gs.w0);
        assert!((norm - expected).abs() < 1e-9, "norm {norm}, closed form {expected}");
        // The weight itself has norm 1.
        let w: Vec<f64> = grid.coords.iter().map(|x| (-0.5 * dist(*x, s.q)).exp()).collect();
        assert!((star_norm(&grid, &w, &[s.q], 0.5) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn translation_moves_the_spike_exactly() {
        let gs = gs1();
        let (_dom, grid) = interval_bank(0.02, 0.25);
        let bank = SpikeBank::new(&gs, &grid).unwrap();
        let a = bank.spike_at([0.5, 0.0]).unwrap();
        let b = bank.spike_at([0.5 + 0.25 * 0.02, 0.0]).unwrap();
        assert_eq!(grid.cell_offset(a.center, b.center), [1, 0]);
        let mut worst = 0.0f64;
        for i in 0..grid.n_nodes() - 1 {
            worst = worst.max((b.corrected[i + 1] - a.corrected[i]).abs());
        }
        // The free parts translate exactly; only the boundary response
        // differs, and the spike is deep.
        assert!(worst < 1e-10, "translation defect {worst:.3e}");
    }

    #[test]
    fn spike_cache_returns_shared_fields() {
        let gs = gs1();
        let (_dom, grid) = interval_bank(0.02, 0.25);
        let bank = SpikeBank::new(&gs, &grid).unwrap();
        let a = bank.spike_at([0.5, 0.0]).unwrap();
        let b = bank.spike_at([0.5001, 0.0]).unwrap(); // same cell after snapping
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn infeasible_configurations_are_refused() {
        let dom = Domain::new(Shape::Interval { a: 0.0, b: 1.0 }, 0.02).unwrap();
        assert!(Configuration::new(&dom, vec![[0.3, 0.0], [0.35, 0.0]], 8.0, 0.0).is_err());
        let c = Configuration::new(&dom, vec![[0.3, 0.0], [0.7, 0.0]], 8.0, 0.0).unwrap();
        assert_eq!(c.k(), 2);
        assert_eq!(c.moved(1, [0.6, 0.0]).points[1], [0.6, 0.0]);
        assert_eq!(c.extended([0.5, 0.0]).k(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn star_norm_is_a_norm(
            f in prop::collection::vec(-1.0f64..1.0, 40),
            g in prop::collection::vec(-1.0f64..1.0, 40),
            alpha in -3.0f64..3.0,
        ) {
            let dom = Domain::new(Shape::Interval { a: 0.0, b: 1.0 }, 0.1).unwrap();
            let grid = Grid::from_domain(&dom, 0.25).unwrap();
            let centers = [[3.0, 0.0], [7.0, 0.0]];
            let sf = star_norm(&grid, &f, &centers, 0.5);
            let sg = star_norm(&grid, &g, &centers, 0.5);
            let scaled: Vec<f64> = f.iter().map(|v| alpha * v).collect();
            prop_assert!((star_norm(&grid, &scaled, &centers, 0.5) - alpha.abs() * sf).abs() < 1e-12);
            let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
            prop_assert!(star_norm(&grid, &sum, &centers, 0.5) <= sf + sg + 1e-12);
            let sup = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            // W ≤ k, so the weighted sup dominates sup/k; W > 0 always.
            prop_assert!(sf >= sup / 2.0 - 1e-12);
            if sup > 0.0 { prop_assert!(sf > 0.0); }
        }
    }
}
