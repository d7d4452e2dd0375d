//! The radial ground state w of  Δw − w + wᵖ = 0  on ℝⁿ.
//!
//! `w` is the unique positive, radially decreasing solution decaying at
//! infinity. It is the building block for every spike ansatz in this crate,
//! and its tail constants control all interaction asymptotics:
//!
//! ```text
//!   w(r) = A_n · r^{-(n-1)/2} e^{-r} (1 + O(1/r)),
//!   γ    = ∫ w(y)ᵖ e^{-y₁} dy,
//!   I(w) = ½∫(|∇w|² + w²) − 1/(p+1)∫w^{p+1},
//!   λ₁   = principal eigenvalue of Δ − 1 + p w^{p-1}.
//! ```
//!
//! ## Method
//!
//! Shooting on the radial ODE w″ + (n−1)/r·w′ − w + wᵖ = 0 with bisection on
//! w(0): undershoots bounce back (w′ turns positive while w > 0), overshoots
//! cross zero. The separating value is the ground state. Integration uses an
//! adaptive Cash-Karp 4(5) scheme started from the even series
//! w(r) ≈ w(0) + (w(0) − w(0)ᵖ) r²/(2n).
//!
//! Forward shooting in double precision degrades past r ≈ ½·ln(1/ε_machine)
//! because the decaying orbit is exponentially unstable: a 1-ulp error in
//! w(0) grows like eʳ. The deep tail is therefore built in the opposite,
//! stable direction. A provisional amplitude is fitted where the logarithmic
//! derivative first tracks the asymptotic form (the handover radius,
//! |w′/w + 1 + (n−1)/(2r) − S′/S| < 10⁻³ with S the far-field series below),
//! the asymptotic formula seeds (w, w′) at r_max, and the ODE is integrated
//! backward down to a join radius r_j ≈ 5 while the amplitude is adjusted so
//! the descent lands exactly on the forward value at r_j. Both table halves
//! are then genuine trajectories and meet with a slope mismatch at the level
//! of the forward shot's contamination at r_j, ~e^{r_j}·ulp.
//!
//! The tail beyond r_max uses the far-field solution of the linearized
//! equation w″ + (n−1)/r·w′ − w = 0, which is r^{-(n-2)/2}K_{(n-2)/2}(r):
//! pure e^{-r} for n = 1, and for n = 2 the K₀ asymptotic series
//! A·r^{-1/2}e^{-r}·S(r) with S(r) = 1 − 1/8r + 9/128r² − ⋯ truncated where
//! it is smallest. A one-parameter amplitude refit on deep backward data
//! (r ∈ [12, 20] by default) then pins A_n far more tightly than any window
//! reachable by forward shooting.
//!
//! ## Verification hooks
//!
//! - 1D, p = 3 has the closed form w(r) = √2·sech(r) with I(w) = 4/3,
//!   γ = 4√2, A₁ = 2√2, λ₁ = 3 (eigenfunction sech²); the tests pin all of
//!   these.
//! - `ode_residual_max` re-checks the tabulated (w, w′) pair against the
//!   first-order system with sixth-order first differences at every interior
//!   node, so table noise enters as ulp/h rather than ulp/h².
//! - `tail_convolution_ratio` measures e^{s}s^{(n-1)/2}∫wᵖ(x)w(x+se₁)dx / A_n,
//!   which must approach γ for large s.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Surface area of the unit sphere S^{n-1} (n = 1 gives the two-point set).
fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => unreachable!("only dim 1 and 2 are supported"),
    }
}

/// Composite Simpson over the uniform table, in units of the node spacing.
/// A trailing odd interval falls back to trapezoid; the integrands used here
/// are ~1e-15 by then, so the fallback never shows in the result.
fn simpson(n_nodes: usize, f: impl Fn(usize) -> f64) -> f64 {
    let last_even = if (n_nodes - 1) % 2 == 0 {
        n_nodes - 1
    } else {
        n_nodes - 2
    };
    let mut acc = 0.0;
    let mut i = 1;
    while i < last_even {
        acc += f(i - 1) + 4.0 * f(i) + f(i + 1);
        i += 2;
    }
    acc /= 3.0;
    if last_even != n_nodes - 1 {
        acc += 0.5 * (f(n_nodes - 2) + f(n_nodes - 1));
    }
    acc
}

/// Tabulated radial ground state together with its derived constants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundState {
    /// File/format version for the cache.
    pub version: u32,
    pub dim: usize,
    pub p: f64,
    /// Uniform radial grid 0, dr, 2dr, …, r_max.
    pub r_grid: Vec<f64>,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    /// Fitted tail amplitude: w ≈ A_n r^{-(n-1)/2} e^{-r} S(r).
    pub a_n: f64,
    /// Energy of the ground state.
    pub i_w: f64,
    /// γ = ∫ wᵖ e^{-y₁} dy.
    pub gamma: f64,
    /// Principal eigenvalue of Δ − 1 + p w^{p-1}.
    pub lambda1: f64,
    /// Principal eigenfunction on `r_grid`, max-normalized to 1.
    pub phi0: Vec<f64>,
    /// Where the logarithmic derivative first reaches the asymptotic form.
    pub handover_radius: f64,
    /// Junction of the forward-shot and backward-descent table halves.
    pub join_radius: f64,
    /// Central value w(0).
    pub w0: f64,
    /// ODE tolerance the table was built with.
    pub tol_ode: f64,
}

const TABLE_DR: f64 = 0.0025;
const LOGDER_TOL: f64 = 1e-3;

/// K₀ asymptotic series: K₀(r) = √(π/2r)·e^{-r}·(1 + Σ tₖ/rᵏ) with
/// tₖ = (−1)ᵏ((2k−1)!!)²/(k!·8ᵏ). Truncated at six terms, well short of the
/// optimal order for every r ≥ 10, so the truncation error ~t₇/r⁷ stays a
/// few parts in 10⁸ across the refit window.
const K0_SERIES: [f64; 6] = [
    -0.125,
    0.0703125,
    -0.0732421875,
    0.112152099609375,
    -0.22710800170898438,
    0.5725014209747314,
];

/// Far-field correction factor S(r) and its derivative S′(r) in the tail
/// model w ≈ A·r^{-(n-1)/2}·e^{-r}·S(r). The model is the decaying solution
/// of the linearized equation w″ + (n−1)/r·w′ − w = 0: pure e^{-r} in 1D
/// (S ≡ 1), the K₀ series in 2D. Unlike a generic fitted correction, this
/// form satisfies the ODE itself to O(w/r⁷), which the residual check needs.
fn tail_series(dim: usize, r: f64) -> (f64, f64) {
    if dim == 1 {
        return (1.0, 0.0);
    }
    let mut s = 1.0;
    let mut ds = 0.0;
    let mut rk = 1.0;
    for (k, t) in K0_SERIES.iter().enumerate() {
        rk /= r;
        s += t * rk;
        ds -= (k + 1) as f64 * t * rk / r;
    }
    (s, ds)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ShotOutcome {
    /// w′ turned positive while w > 0: initial value too low.
    Bounced,
    /// w crossed zero: initial value too high.
    Crossed,
    /// Reached r_max still positive and decreasing (only the razor-edge
    /// bisection limit produces this).
    Survived,
}

struct RadialOde {
    dim: usize,
    p: f64,
}

impl RadialOde {
    #[inline]
    fn rhs(&self, r: f64, w: f64, v: f64) -> (f64, f64) {
        let wp = if w > 0.0 { w.powf(self.p) } else { 0.0 };
        let friction = if self.dim > 1 { (self.dim as f64 - 1.0) / r * v } else { 0.0 };
        (v, w - wp - friction)
    }
}

/// One adaptive Cash-Karp step; returns (accepted, new_h, y_out).
fn ck_step(ode: &RadialOde, r: f64, y: (f64, f64), h: f64, rtol: f64) -> (bool, f64, (f64, f64)) {
    const B: [[f64; 5]; 5] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
        [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0],
        [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0],
        [
            1631.0 / 55296.0,
            175.0 / 512.0,
            575.0 / 13824.0,
            44275.0 / 110592.0,
            253.0 / 4096.0,
        ],
    ];
    const A: [f64; 5] = [1.0 / 5.0, 3.0 / 10.0, 3.0 / 5.0, 1.0, 7.0 / 8.0];
    const C: [f64; 6] = [37.0 / 378.0, 0.0, 250.0 / 621.0, 125.0 / 594.0, 0.0, 512.0 / 1771.0];
    const DC: [f64; 6] = [
        37.0 / 378.0 - 2825.0 / 27648.0,
        0.0,
        250.0 / 621.0 - 18575.0 / 48384.0,
        125.0 / 594.0 - 13525.0 / 55296.0,
        -277.0 / 14336.0,
        512.0 / 1771.0 - 1.0 / 4.0,
    ];

    let mut k = [(0.0f64, 0.0f64); 6];
    k[0] = ode.rhs(r, y.0, y.1);
    for s in 1..6 {
        let mut acc = (0.0, 0.0);
        for (j, kj) in k.iter().enumerate().take(s) {
            acc.0 += B[s - 1][j] * kj.0;
            acc.1 += B[s - 1][j] * kj.1;
        }
        k[s] = ode.rhs(r + A[s - 1] * h, y.0 + h * acc.0, y.1 + h * acc.1);
    }
    let mut y5 = (0.0, 0.0);
    let mut de = (0.0, 0.0);
    for (j, kj) in k.iter().enumerate() {
        y5.0 += C[j] * kj.0;
        y5.1 += C[j] * kj.1;
        de.0 += DC[j] * kj.0;
        de.1 += DC[j] * kj.1;
    }
    let out = (y.0 + h * y5.0, y.1 + h * y5.1);
    let scale0 = 1e-14 + rtol * y.0.abs().max(out.0.abs());
    let scale1 = 1e-14 + rtol * y.1.abs().max(out.1.abs());
    let err = ((h * de.0 / scale0).abs()).max((h * de.1 / scale1).abs());
    if err <= 1.0 {
        let grow = if err > 0.0 { (0.9 * err.powf(-0.2)).min(5.0) } else { 5.0 };
        (true, h * grow, out)
    } else {
        (false, h * (0.9 * err.powf(-0.25)).max(0.1), out)
    }
}

/// Integrate and classify a shot. If `table` is given, force landing on its
/// nodes and record (w, w′) there.
fn shoot(
    ode: &RadialOde,
    beta: f64,
    r_max: f64,
    rtol: f64,
    mut table: Option<(&mut [f64], &mut [f64])>,
) -> ShotOutcome {
    let r0 = 1e-4;
    let n = ode.dim as f64;
    let mut r = r0;
    // Even series w = β + c₂r² + c₄r⁴ + O(r⁶); the r⁴ term matters because
    // its omission leaves an O(r₀³) bias in w′ that the whole trajectory
    // inherits (≈10⁻¹² for r₀ = 10⁻⁴, visible to the residual check).
    let c2 = (beta - beta.powf(ode.p)) / (2.0 * n);
    let c4 = (1.0 - ode.p * beta.powf(ode.p - 1.0)) * c2 / (4.0 * (n + 2.0));
    let mut y = (
        beta + c2 * r0 * r0 + c4 * r0 * r0 * r0 * r0,
        2.0 * c2 * r0 + 4.0 * c4 * r0 * r0 * r0,
    );
    let mut h = 1e-4f64;
    let mut next_node = 0usize;
    if let Some((w, dw)) = table.as_mut() {
        // Node 0 sits at r = 0; fill by the series.
        w[0] = beta;
        dw[0] = 0.0;
        next_node = 1;
    }
    let node_count = table.as_ref().map(|(w, _)| w.len()).unwrap_or(0);
    while r < r_max {
        let mut step = h.min(r_max - r).max(1e-12);
        if table.is_some() && next_node < node_count {
            let rn = next_node as f64 * TABLE_DR;
            if r + step >= rn {
                step = rn - r;
            }
        }
        let (accepted, new_h, out) = ck_step(ode, r, y, step, rtol);
        if !accepted {
            h = new_h;
            continue;
        }
        r += step;
        y = out;
        h = new_h.min(0.05);
        if let Some((w, dw)) = table.as_mut() {
            if next_node < node_count {
                let rn = next_node as f64 * TABLE_DR;
                if (r - rn).abs() < 1e-9 {
                    w[next_node] = y.0;
                    dw[next_node] = y.1;
                    next_node += 1;
                }
            }
        }
        if y.0 < 0.0 {
            return ShotOutcome::Crossed;
        }
        if y.1 > 0.0 && y.0 > 0.0 && r > 10.0 * r0 {
            return ShotOutcome::Bounced;
        }
        if y.0 > 4.0 * beta {
            return ShotOutcome::Bounced;
        }
    }
    ShotOutcome::Survived
}

/// Integrate the full nonlinear ODE downward from `r_top`, seeded on the
/// asymptotic tail with amplitude `amp` and landing on every table node.
/// Returns (w, w′) at node `i_stop`; nodes strictly above `i_stop` (and the
/// seed node itself) are written into `table` when given.
///
/// Descending is the stable direction for the decaying orbit: seed error
/// along the growing mode is damped by e^{-(r_top-r)}, so the result is a
/// genuine trajectory with relative accuracy set by `rtol` rather than by
/// the eʳ·ulp contamination of forward shooting.
fn tail_descend(
    ode: &RadialOde,
    amp: f64,
    a_exp: f64,
    r_top: f64,
    i_stop: usize,
    rtol: f64,
    mut table: Option<(&mut [f64], &mut [f64])>,
) -> (f64, f64) {
    let (s, ds) = tail_series(ode.dim, r_top);
    let w_top = amp * r_top.powf(-a_exp) * (-r_top).exp() * s;
    let mut y = (w_top, w_top * (-1.0 - a_exp / r_top + ds / s));
    if let Some((w, dw)) = table.as_mut() {
        let m = w.len() - 1;
        w[m] = y.0;
        dw[m] = y.1;
    }
    let mut r = r_top;
    let mut next_node = (r_top / TABLE_DR).round() as usize - 1;
    let mut h = -1e-3f64;
    for _ in 0..2_000_000usize {
        let rn = next_node as f64 * TABLE_DR;
        let step = h.max(-0.05).max(rn - r).min(-1e-12);
        let (accepted, new_h, out) = ck_step(ode, r, y, step, rtol);
        if !accepted {
            h = new_h;
            continue;
        }
        r += step;
        y = out;
        h = new_h;
        if !y.0.is_finite() || !y.1.is_finite() {
            return (f64::NAN, f64::NAN);
        }
        if (r - rn).abs() < 1e-9 {
            if next_node == i_stop {
                return (y.0, y.1);
            }
            if let Some((w, dw)) = table.as_mut() {
                w[next_node] = y.0;
                dw[next_node] = y.1;
            }
            next_node -= 1;
        }
    }
    (f64::NAN, f64::NAN)
}

/// Solve for the ground state. `dim` ∈ {1, 2}, `p` > 1, `tol` is the ODE
/// relative tolerance (default 1e-10 from the CLI).
pub fn solve_ground_state(dim: usize, p: f64, r_max: f64, tol: f64) -> Result<GroundState> {
    if !(dim == 1 || dim == 2) {
        return Err(Error::NoDecayBracket {
            dim,
            p,
            detail: "only dim 1 and 2 are supported".into(),
        });
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::NoDecayBracket { dim, p, detail: "need p > 1".into() });
    }
    let ode = RadialOde { dim, p };

    // All shots run tighter than the requested table tolerance: the shooting
    // parameter must match the integrator it is bisected for (the decaying
    // orbit amplifies any mismatch by e^r), and the residual check divides
    // per-node noise by the squared node spacing.
    let rtol = (tol * 1e-2).max(1e-13).min(tol);
    // Bracket: small amplitudes bounce, large ones cross.
    let mut lo = 0.5f64;
    let mut hi = 4.0f64;
    let mut tries = 0;
    while shoot(&ode, lo, r_max, rtol, None) != ShotOutcome::Bounced {
        lo *= 0.5;
        tries += 1;
        if tries > 20 {
            return Err(Error::NoDecayBracket {
                dim,
                p,
                detail: format!("no bouncing shot down to w(0) = {lo}"),
            });
        }
    }
    tries = 0;
    while shoot(&ode, hi, r_max, rtol, None) != ShotOutcome::Crossed {
        hi *= 2.0;
        tries += 1;
        if tries > 12 {
            return Err(Error::NoDecayBracket {
                dim,
                p,
                detail: format!("no crossing shot up to w(0) = {hi}"),
            });
        }
    }
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // f64 exhausted
        }
        match shoot(&ode, mid, r_max, rtol, None) {
            ShotOutcome::Bounced => lo = mid,
            ShotOutcome::Crossed => hi = mid,
            ShotOutcome::Survived => {
                // Rarest case: treat as slightly low (the decaying orbit is
                // approached from below in amplitude).
                lo = mid;
            }
        }
    }
    let beta = 0.5 * (lo + hi);

    // Final tabulating run.
    let n_nodes = (r_max / TABLE_DR).round() as usize + 1;
    let mut w = vec![0.0f64; n_nodes];
    let mut dw = vec![0.0f64; n_nodes];
    let _ = shoot(&ode, beta, r_max, rtol, Some((&mut w, &mut dw)));
    let r_grid: Vec<f64> = (0..n_nodes).map(|i| i as f64 * TABLE_DR).collect();

    // Handover radius: the log-derivative matches the asymptotic form.
    let a_exp = (dim as f64 - 1.0) / 2.0;
    let target = |r: f64| {
        let (s, ds) = tail_series(dim, r);
        -1.0 - a_exp / r + ds / s
    };
    let mut handover = None;
    for i in 1..n_nodes {
        let r = r_grid[i];
        if r < 2.0 || w[i] <= 0.0 || dw[i] >= 0.0 {
            continue;
        }
        if (dw[i] / w[i] - target(r)).abs() < LOGDER_TOL {
            handover = Some(i);
            break;
        }
    }
    let ih = handover.ok_or_else(|| {
        Error::ToleranceNotMet(format!(
            "no handover radius below r_max = {r_max}; tail never reached asymptotic form"
        ))
    })?;

    // Last reliable node: where the shot stops tracking the decaying orbit.
    let mut ibad = n_nodes - 1;
    for i in ih..n_nodes {
        let r = r_grid[i];
        if w[i] <= 0.0 || dw[i] >= 0.0 || (dw[i] / w[i] - target(r)).abs() > 0.05 {
            ibad = i;
            break;
        }
    }

    // Provisional amplitude: one-parameter fit of ln A in
    // ln w = ln A − r − a·ln r + ln S(r) on [r_h + 2, min(r_h + 6, r_bad − ½)].
    // Starting two units past handover keeps the decaying nonlinear
    // correction out of the window; the 14.0 cap keeps forward-shot
    // contamination out of it for exponents whose handover comes late.
    let model = |r: f64| -r - a_exp * r.ln() + tail_series(dim, r).0.ln();
    let ifit_start = ih + (2.0 / TABLE_DR) as usize;
    let fit_end_r = (r_grid[ih] + 6.0).min(r_grid[ibad] - 0.5).min(14.0);
    let ifit_end = ((fit_end_r / TABLE_DR) as usize).min(n_nodes - 1);
    if ifit_end <= ifit_start + 8 {
        return Err(Error::ToleranceNotMet(
            "tail fit window collapsed; increase r_max".into(),
        ));
    }
    let window_mean_ln_a = |lo: usize, hi: usize, w: &[f64]| -> (f64, f64) {
        let mut sum = 0.0;
        for i in lo..=hi {
            sum += w[i].ln() - model(r_grid[i]);
        }
        let ln_a = sum / (hi - lo + 1) as f64;
        let mut drift = 0.0f64;
        for i in lo..=hi {
            drift = drift.max((w[i].ln() - model(r_grid[i]) - ln_a).abs());
        }
        (ln_a, drift)
    };
    let (ln_a_seed, drift) = window_mean_ln_a(ifit_start, ifit_end, &w);
    if drift > 0.005 {
        return Err(Error::ToleranceNotMet(format!(
            "tail amplitude drifts by {:.2}% across the fit window",
            drift * 100.0
        )));
    }
    let amp_seed = ln_a_seed.exp();

    // Requested r_max must put the tail below 1e-12 before the descent is
    // attempted.
    let r_top = r_grid[n_nodes - 1];
    if amp_seed * (model(r_top)).exp() >= 1e-12 {
        return Err(Error::ToleranceNotMet(format!(
            "w(r_max) ≈ {:.3e} ≥ 1e-12; r_max = {r_max} too small",
            amp_seed * (model(r_top)).exp()
        )));
    }

    // Join node: deep enough that the forward data has resolved the profile,
    // shallow enough that forward contamination (~eʳ·ulp) is still orders of
    // magnitude below the table tolerance.
    let r_join = (r_grid[ih] + 1.0).clamp(3.0, 5.0);
    let i_join = (r_join / TABLE_DR).round() as usize;
    let w_join = w[i_join];

    // Adjust the descent amplitude until it lands on the forward value at
    // the join node. The dependence is linear up to the (tiny, decaying)
    // nonlinear term, so the proportional update converges superlinearly.
    // The descent runs a notch tighter than the forward shots: its
    // accumulated phase error is what sets the slope mismatch where the two
    // trajectory halves meet.
    let rtol_b = (rtol * 0.1).max(1e-13);
    let mut amp = amp_seed;
    let mut best = (f64::INFINITY, amp_seed);
    for _ in 0..12 {
        let (wb, _) = tail_descend(&ode, amp, a_exp, r_top, i_join, rtol_b, None);
        if !wb.is_finite() || wb <= 0.0 {
            break;
        }
        let gap = (wb - w_join).abs();
        if gap < best.0 {
            best = (gap, amp);
        }
        if gap <= 4.0 * f64::EPSILON * w_join {
            break;
        }
        amp *= w_join / wb;
    }
    if !(best.0 <= 64.0 * f64::EPSILON * w_join) {
        return Err(Error::ToleranceNotMet(format!(
            "tail descent missed the forward value at r = {r_join} by {:.3e}",
            best.0
        )));
    }

    // Cross-fade between the halves over ±0.5 around the join instead of
    // hard-switching: the remaining slope mismatch (~10⁻¹¹, set by how
    // sharply bisection can pin w(0) at the shot tolerance) would otherwise
    // land entirely between two nodes and be amplified by 1/h in the
    // residual check. Blending spreads it across 400 nodes, where it enters
    // only through the smoothstep's O(1) derivative.
    let half = (0.5 / TABLE_DR).round() as usize;
    let i_lo = i_join - half;
    let i_hi = i_join + half;
    let mut wb = vec![0.0f64; n_nodes];
    let mut vb = vec![0.0f64; n_nodes];
    tail_descend(&ode, best.1, a_exp, r_top, i_lo, rtol_b, Some((&mut wb, &mut vb)));
    for i in i_lo..n_nodes {
        if i >= i_hi {
            w[i] = wb[i];
            dw[i] = vb[i];
        } else {
            let t = (i - i_lo) as f64 / (i_hi - i_lo) as f64;
            let s = t * t * t * (10.0 + t * (6.0 * t - 15.0));
            w[i] = (1.0 - s) * w[i] + s * wb[i];
            dw[i] = (1.0 - s) * dw[i] + s * vb[i];
        }
    }

    // Final amplitude from deep backward data, where the only systematic
    // left is the series truncation (a few 10⁻⁸ relative on [12, 20]).
    let refit_lo = (r_join + 2.0).max(12.0f64.min(r_top - 6.0));
    let refit_hi = 20.0f64.min(r_top - 1.0);
    let jlo = (refit_lo / TABLE_DR).round() as usize;
    let jhi = (refit_hi / TABLE_DR).round() as usize;
    if jhi <= jlo + 8 {
        return Err(Error::ToleranceNotMet(
            "tail refit window collapsed; increase r_max".into(),
        ));
    }
    let (ln_a, drift) = window_mean_ln_a(jlo, jhi, &w);
    if drift > 0.005 {
        return Err(Error::ToleranceNotMet(format!(
            "descent tail drifts by {:.2}% across the refit window",
            drift * 100.0
        )));
    }
    let a_n = ln_a.exp();

    let mut gs = GroundState {
        version: 1,
        dim,
        p,
        r_grid,
        w,
        dw,
        a_n,
        i_w: 0.0,
        gamma: 0.0,
        lambda1: 0.0,
        phi0: Vec::new(),
        handover_radius: TABLE_DR * ih as f64,
        join_radius: TABLE_DR * i_join as f64,
        w0: beta,
        tol_ode: tol,
    };
    let res = gs.ode_residual_max();
    if res > tol {
        return Err(Error::ToleranceNotMet(format!(
            "ODE residual {res:.3e} exceeds tol {tol:.3e}"
        )));
    }
    gs.i_w = gs.energy_radial();
    gs.gamma = compute_gamma(&gs, 0);
    let (lam, phi0) = principal_eigenpair(&gs);
    gs.lambda1 = lam;
    gs.phi0 = phi0;
    Ok(gs)
}

impl GroundState {
    /// Profile value at radius `r ≥ 0` (cubic Hermite on the table, fitted
    /// tail formula beyond it).
    pub fn eval(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        let r_max = *self.r_grid.last().unwrap();
        if r >= r_max {
            return self.tail(r);
        }
        let x = r / TABLE_DR;
        let i = (x as usize).min(self.w.len() - 2);
        let t = x - i as f64;
        hermite(self.w[i], self.w[i + 1], self.dw[i] * TABLE_DR, self.dw[i + 1] * TABLE_DR, t)
    }

    /// Radial derivative w′(r).
    pub fn eval_dw(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        let r_max = *self.r_grid.last().unwrap();
        if r >= r_max {
            return self.tail_dw(r);
        }
        let x = r / TABLE_DR;
        let i = (x as usize).min(self.w.len() - 2);
        let t = x - i as f64;
        // The Hermite basis differentiates in t-units; rescale to r-units.
        hermite_deriv(self.w[i], self.w[i + 1], self.dw[i] * TABLE_DR, self.dw[i + 1] * TABLE_DR, t)
            / TABLE_DR
    }

    fn tail(&self, r: f64) -> f64 {
        let a = (self.dim as f64 - 1.0) / 2.0;
        self.a_n * r.powf(-a) * (-r).exp() * tail_series(self.dim, r).0
    }

    fn tail_dw(&self, r: f64) -> f64 {
        let a = (self.dim as f64 - 1.0) / 2.0;
        let (s, ds) = tail_series(self.dim, r);
        self.tail(r) * (-1.0 - a / r + ds / s)
    }

    /// Principal eigenfunction at radius `r` (linear interpolation, zero
    /// beyond the table).
    pub fn eval_phi0(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        let x = r / TABLE_DR;
        let i = x as usize;
        if i + 1 >= self.phi0.len() {
            return 0.0;
        }
        let t = x - i as f64;
        self.phi0[i] * (1.0 - t) + self.phi0[i + 1] * t
    }

    /// I(w) from the radial table.
    fn energy_radial(&self) -> f64 {
        let s = sphere_area(self.dim);
        let nm1 = self.dim as f64 - 1.0;
        let acc = simpson(self.r_grid.len(), |i| {
            let r = self.r_grid[i];
            let rw = if self.dim == 1 { 1.0 } else { r.powf(nm1) };
            let f = 0.5 * (self.dw[i] * self.dw[i] + self.w[i] * self.w[i])
                - self.w[i].max(0.0).powf(self.p + 1.0) / (self.p + 1.0);
            f * rw
        });
        s * acc * TABLE_DR
    }

    /// ∫_{ℝⁿ} (∂w/∂y_j)² dy (independent of j by symmetry).
    pub fn grad_component_l2sq(&self) -> f64 {
        let s = sphere_area(self.dim) / self.dim as f64;
        let nm1 = self.dim as f64 - 1.0;
        let acc = simpson(self.r_grid.len(), |i| {
            let r = self.r_grid[i];
            let rw = if self.dim == 1 { 1.0 } else { r.powf(nm1) };
            self.dw[i] * self.dw[i] * rw
        });
        s * acc * TABLE_DR
    }

    /// Max residual of the first-order system over every interior node:
    /// both |Dw − w′| and |Dw′ + (n−1)/r·w′ − w + w₊ᵖ|, with D the
    /// seven-point sixth-order first difference. Checking the (w, w′) pair
    /// instead of second-differencing w keeps the f64 amplification of table
    /// noise at ulp/h rather than ulp/h², which is what makes a 10⁻¹⁰ gate
    /// reachable at all. Stencils are closed with the even/odd extension at
    /// the origin and the tail formula beyond the table.
    pub fn ode_residual_max(&self) -> f64 {
        let m = self.w.len() - 1;
        let wat = |j: isize| -> f64 {
            if j < 0 {
                self.w[(-j) as usize]
            } else if (j as usize) <= m {
                self.w[j as usize]
            } else {
                self.tail(j as f64 * TABLE_DR)
            }
        };
        let vat = |j: isize| -> f64 {
            if j < 0 {
                -self.dw[(-j) as usize]
            } else if (j as usize) <= m {
                self.dw[j as usize]
            } else {
                self.tail_dw(j as f64 * TABLE_DR)
            }
        };
        fn d6(f: &dyn Fn(isize) -> f64, k: isize) -> f64 {
            (f(k + 3) - f(k - 3) + 9.0 * (f(k - 2) - f(k + 2)) + 45.0 * (f(k + 1) - f(k - 1)))
                / (60.0 * TABLE_DR)
        }
        let mut worst = 0.0f64;
        for i in 1..m {
            let k = i as isize;
            let r = self.r_grid[i];
            let friction = if self.dim > 1 {
                (self.dim as f64 - 1.0) / r * self.dw[i]
            } else {
                0.0
            };
            let res_w = d6(&wat, k) - self.dw[i];
            let res_v = d6(&vat, k) + friction - self.w[i] + self.w[i].max(0.0).powf(self.p);
            worst = worst.max(res_w.abs()).max(res_v.abs());
        }
        worst
    }

    /// Relative gap in the identity ∫(|∇w|² + w²) = ∫w^{p+1}, which follows
    /// from multiplying the equation by w and integrating by parts.
    pub fn energy_identity_rel_gap(&self) -> f64 {
        let nm1 = self.dim as f64 - 1.0;
        let rw = |i: usize| {
            let r = self.r_grid[i];
            if self.dim == 1 {
                1.0
            } else {
                r.powf(nm1)
            }
        };
        let lhs = simpson(self.r_grid.len(), |i| {
            (self.dw[i] * self.dw[i] + self.w[i] * self.w[i]) * rw(i)
        });
        let rhs = simpson(self.r_grid.len(), |i| {
            self.w[i].max(0.0).powf(self.p + 1.0) * rw(i)
        });
        (lhs - rhs).abs() / rhs
    }

    /// Write the state as versioned JSON.
    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let gs: GroundState = serde_json::from_reader(std::io::BufReader::new(file))?;
        Ok(gs)
    }
}

#[inline]
fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * m1
}

#[inline]
fn hermite_deriv(y0: f64, y1: f64, m0: f64, m1: f64, t: f64) -> f64 {
    let t2 = t * t;
    (6.0 * t2 - 6.0 * t) * y0
        + (3.0 * t2 - 4.0 * t + 1.0) * m0
        + (-6.0 * t2 + 6.0 * t) * y1
        + (3.0 * t2 - 2.0 * t) * m1
}

/// γ = ∫ wᵖ e^{-y·e_axis} dy by tensor trapezoid quadrature over the box
/// where the integrand is above ~1e-15 of its peak. `axis` picks the decay
/// direction (0 or 1); the value must not depend on it.
pub fn compute_gamma(gs: &GroundState, axis: usize) -> f64 {
    let p = gs.p;
    let span = 14.0 * std::f64::consts::LN_10;
    let l_neg = span / (p - 1.0) + 2.0;
    let l_pos = span / (p + 1.0) + 2.0;
    match gs.dim {
        1 => {
            let hq = 0.002;
            let n = ((l_neg + l_pos) / hq).ceil() as usize;
            let mut acc = 0.0;
            for i in 0..=n {
                let y = -l_neg + i as f64 * hq;
                let f = gs.eval(y.abs()).powf(p) * (-y).exp();
                let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += wgt * f;
            }
            acc * hq
        }
        2 => {
            let hq = 0.02;
            let l_perp = span / p + 2.0;
            let n1 = ((l_neg + l_pos) / hq).ceil() as usize;
            let n2 = (2.0 * l_perp / hq).ceil() as usize;
            let mut acc = 0.0;
            for i in 0..=n1 {
                let u = -l_neg + i as f64 * hq;
                let wu = if i == 0 || i == n1 { 0.5 } else { 1.0 };
                let mut row = 0.0;
                for j in 0..=n2 {
                    let v = -l_perp + j as f64 * hq;
                    let r = (u * u + v * v).sqrt();
                    let f = gs.eval(r).powf(p);
                    let wv = if j == 0 || j == n2 { 0.5 } else { 1.0 };
                    row += wv * f * if axis == 0 { (-u).exp() } else { (-v).exp() };
                }
                acc += wu * row;
            }
            acc * hq * hq
        }
        _ => unreachable!(),
    }
}

/// Principal eigenpair of Δ − 1 + p w^{p-1} restricted to radial functions,
/// discretized by finite volumes on a uniform grid with a decay (Dirichlet)
/// closure at the outer radius. Richardson-extrapolated over two
/// resolutions. The eigenfunction is returned on the ground-state table
/// grid, max-normalized.
pub fn principal_eigenpair(gs: &GroundState) -> (f64, Vec<f64>) {
    let r_eig = gs.r_grid.last().unwrap().min(30.0);
    let (l_h, _) = radial_sector_top(gs, 0, r_eig, 0.005, 0);
    let (l_h2, vec_fine) = radial_sector_top(gs, 0, r_eig, 0.0025, 0);
    let lam = (4.0 * l_h2 - l_h) / 3.0;

    // Interpolate the fine-grid eigenvector onto the table grid.
    let h = 0.0025;
    let mut phi0 = Vec::with_capacity(gs.r_grid.len());
    for &r in &gs.r_grid {
        let x = (r - 0.5 * h) / h;
        if x <= 0.0 {
            phi0.push(vec_fine[0]);
            continue;
        }
        let i = x as usize;
        if i + 1 >= vec_fine.len() {
            phi0.push(0.0);
            continue;
        }
        let t = x - i as f64;
        phi0.push(vec_fine[i] * (1.0 - t) + vec_fine[i + 1] * t);
    }
    let m = phi0.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
    for v in phi0.iter_mut() {
        *v /= m;
    }
    (lam, phi0)
}

/// Top eigenvalue (k-th largest) of the radial operator in angular sector
/// `ell`: Δ_r − ℓ(ℓ+n−2)/r² − 1 + p w^{p-1}. Returns (eigenvalue,
/// eigenvector at cell centers).
pub fn radial_sector_top(
    gs: &GroundState,
    ell: usize,
    r_out: f64,
    h: f64,
    k: usize,
) -> (f64, Vec<f64>) {
    let m = (r_out / h).round() as usize;
    let nm1 = gs.dim as f64 - 1.0;
    let lterm = (ell as f64) * (ell as f64 + gs.dim as f64 - 2.0);
    let rpow = |r: f64| if gs.dim == 1 { 1.0 } else { r.powf(nm1) };
    let mut diag = vec![0.0f64; m];
    let mut off = vec![0.0f64; m - 1];
    let mut vol = vec![0.0f64; m];
    for i in 0..m {
        let rc = (i as f64 + 0.5) * h;
        vol[i] = rpow(rc) * h;
        let pot = -1.0 - lterm / (rc * rc) + gs.p * gs.eval(rc).powf(gs.p - 1.0);
        let mut d = pot;
        if i > 0 {
            d -= rpow(i as f64 * h) / h / vol[i];
        }
        if i + 1 < m {
            d -= rpow((i + 1) as f64 * h) / h / vol[i];
        } else {
            // Dirichlet closure at the outer face (ghost at distance h/2).
            d -= rpow(m as f64 * h) / (0.5 * h) / vol[i];
        }
        diag[i] = d;
    }
    for i in 0..m - 1 {
        let c = rpow((i + 1) as f64 * h) / h;
        off[i] = c / (vol[i] * vol[i + 1]).sqrt();
    }
    let lam = crate::linalg::tridiag::kth_largest_eigenvalue(&diag, &off, k, 1e-12);
    let v_sym = crate::linalg::tridiag::inverse_iteration(&diag, &off, lam + 1e-9 * (1.0 + lam.abs()), 3);
    // Undo the symmetrizing similarity (v = W^{-1/2} v_sym).
    let v: Vec<f64> = v_sym.iter().zip(&vol).map(|(x, w)| x / w.sqrt()).collect();
    (lam, v)
}

/// e^{s} s^{(n-1)/2} ∫ wᵖ(x) w(x + s·e₁) dx / A_n. Converges to γ as s → ∞.
pub fn tail_convolution_ratio(gs: &GroundState, s: f64) -> f64 {
    let p = gs.p;
    let span = 14.0 * std::f64::consts::LN_10;
    let l_lo = -0.5 * s;
    let l_hi = span / (p + 1.0) + 2.0;
    let integral = match gs.dim {
        1 => {
            let hq = 0.002;
            let n = ((l_hi - l_lo) / hq).ceil() as usize;
            let mut acc = 0.0;
            for i in 0..=n {
                let x = l_lo + i as f64 * hq;
                let f = gs.eval(x.abs()).powf(p) * gs.eval((x + s).abs());
                let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += wgt * f;
            }
            acc * hq
        }
        2 => {
            let hq = 0.02;
            let l_perp = span / p + 2.0;
            let n1 = ((l_hi - l_lo) / hq).ceil() as usize;
            let n2 = (2.0 * l_perp / hq).ceil() as usize;
            let mut acc = 0.0;
            for i in 0..=n1 {
                let u = l_lo + i as f64 * hq;
                let wu = if i == 0 || i == n1 { 0.5 } else { 1.0 };
                let mut row = 0.0;
                for j in 0..=n2 {
                    let v = -l_perp + j as f64 * hq;
                    let f = gs.eval((u * u + v * v).sqrt()).powf(p)
                        * gs.eval(((u + s) * (u + s) + v * v).sqrt());
                    let wv = if j == 0 || j == n2 { 0.5 } else { 1.0 };
                    row += wv * f;
                }
                acc += wu * row;
            }
            acc * hq * hq
        }
        _ => unreachable!(),
    };
    s.exp() * s.powf((gs.dim as f64 - 1.0) / 2.0) * integral / gs.a_n
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form for the 1D soliton: w(r) = ((p+1)/2)^{1/(p-1)}
    /// sech^{2/(p-1)}((p-1)r/2). For p = 3 this is √2·sech(r).
    fn soliton_1d(p: f64, r: f64) -> f64 {
        let amp = ((p + 1.0) / 2.0).powf(1.0 / (p - 1.0));
        amp * (1.0 / ((p - 1.0) * r / 2.0).cosh()).powf(2.0 / (p - 1.0))
    }

    #[test]
    fn sech_profile_recovered_to_1e6() {
        let gs = solve_ground_state(1, 3.0, 35.0, 1e-10).unwrap();
        assert!((gs.w0 - std::f64::consts::SQRT_2).abs() < 1e-9, "w0 = {}", gs.w0);
        let mut worst = 0.0f64;
        for i in 0..gs.r_grid.len() {
            let exact = std::f64::consts::SQRT_2 / gs.r_grid[i].cosh();
            worst = worst.max((gs.w[i] - exact).abs());
        }
        assert!(worst < 1e-6, "profile error {worst}");
        // Off-node interpolation too.
        let mut worst_interp = 0.0f64;
        for k in 0..5000 {
            let r = 0.0013 + k as f64 * 0.0061;
            worst_interp = worst_interp.max((gs.eval(r) - std::f64::consts::SQRT_2 / r.cosh()).abs());
        }
        assert!(worst_interp < 1e-6, "interpolated error {worst_interp}");
        // The interpolated derivative, at off-node radii, against the
        // closed form w′ = −√2 sech(r) tanh(r).
        let mut worst_dw = 0.0f64;
        for k in 0..5000 {
            let r = 0.0013 + k as f64 * 0.0061;
            let exact = -std::f64::consts::SQRT_2 / r.cosh() * r.tanh();
            worst_dw = worst_dw.max((gs.eval_dw(r) - exact).abs());
        }
        assert!(worst_dw < 1e-6, "interpolated derivative error {worst_dw}");
    }

    #[test]
    fn energy_of_1d_cubic_soliton_is_four_thirds() {
        let gs = solve_ground_state(1, 3.0, 35.0, 1e-10).unwrap();
        assert!((gs.i_w - 4.0 / 3.0).abs() < 1e-6, "I_w = {}", gs.i_w);
    }

    #[test]
    fn tail_amplitude_1d_is_two_sqrt_two() {
        // √2·sech(r) → 2√2·e^{-r}.
        let gs = solve_ground_state(1, 3.0, 35.0, 1e-10).unwrap();
        assert!((gs.a_n - 2.0 * std::f64::consts::SQRT_2).abs() < 2e-4, "A_1 = {}", gs.a_n);
    }

    #[test]
    fn gamma_1d_matches_closed_form_and_brute_force() {
        // ∫ (√2 sech y)³ e^{-y} dy = 2√2·∫sech³(y)(cosh y − sinh y)/... = 4√2.
        let gs = solve_ground_state(1, 3.0, 35.0, 1e-10).unwrap();
        let exact = 4.0 * std::f64::consts::SQRT_2;
        assert!((gs.gamma - exact).abs() / exact < 1e-7, "gamma = {}", gs.gamma);

        // Independent oracle: brute force against the closed-form profile at
        // ten-fold resolution.
        let hq = 0.0002;
        let n = (40.0 / hq) as usize;
        let mut acc = 0.0;
        for i in 0..=n {
            let y = -24.0 + i as f64 * hq;
            if y > 16.0 {
                break;
            }
            let f = soliton_1d(3.0, y.abs()).powi(3) * (-y).exp();
            let wgt = if i == 0 { 0.5 } else { 1.0 };
            acc += wgt * f;
        }
        let oracle = acc * hq;
        assert!((oracle - exact).abs() / exact < 1e-6, "oracle {oracle}");
        assert!((gs.gamma - oracle).abs() / oracle < 1e-6);
    }

    #[test]
    fn gamma_direction_invariance_2d() {
        let gs = solve_ground_state(2, 3.0, 35.0, 1e-10).unwrap();
        let g1 = compute_gamma(&gs, 0);
        let g2 = compute_gamma(&gs, 1);
        assert!((g1 - g2).abs() / g1 < 1e-8, "g1 = {g1}, g2 = {g2}");
        assert!(g1 > 0.0);
    }

    #[test]
    fn principal_eigenvalue_1d_cubic_is_three() {
        // The linearized operator d²/dy² − 1 + 6 sech² has top eigenvalue 3
        // with eigenfunction sech².
        let gs = solve_ground_state(1, 3.0, 35.0, 1e-10).unwrap();
        assert!((gs.lambda1 - 3.0).abs() < 1e-4, "lambda1 = {}", gs.lambda1);
        // Eigenfunction matches sech² after max-normalization.
        let mut worst = 0.0f64;
        for (i, &r) in gs.r_grid.iter().enumerate().step_by(200) {
            if r > 12.0 {
                break;
            }
            let exact = 1.0 / r.cosh().powi(2);
            worst = worst.max((gs.phi0[i] - exact).abs());
        }
        assert!(worst < 1e-3, "phi0 error {worst}");
    }

    #[test]
    fn eigenpair_residual_against_substitution() {
        // Substituting sech² into the discretized operator reproduces 3·φ₀.
        let gs = solve_ground_state(1, 3.0, 30.0, 1e-10).unwrap();
        let h = 0.002;
        let mut worst = 0.0f64;
        for k in 1..4000 {
            let r = k as f64 * h + 0.3;
            if r > 10.0 {
                break;
            }
            let phi = |x: f64| 1.0 / x.cosh().powi(2);
            let d2 = (phi(r - h) - 2.0 * phi(r) + phi(r + h)) / (h * h);
            let lhs = d2 - phi(r) + 3.0 * gs.eval(r).powi(2) * phi(r);
            worst = worst.max((lhs - 3.0 * phi(r)).abs());
        }
        assert!(worst < 1e-4, "substitution residual {worst}");
    }

    #[test]
    fn kernel_gap_sectors() {
        // Beyond the principal mode and the translation mode the spectrum
        // must sit strictly below zero.
        let gs1 = solve_ground_state(1, 3.0, 30.0, 1e-10).unwrap();
        // n = 1: the even sector (Neumann at 0) is covered by lambda1, and
        // the odd sector tops out at the zero translation mode, so the
        // meaningful gap statement left is that the second even eigenvalue
        // sits well below zero.
        let (second_even, _) = radial_sector_top(&gs1, 0, 30.0, 0.005, 1);
        assert!(second_even < -0.5, "second even eigenvalue {second_even}");

        let gs2 = solve_ground_state(2, 3.0, 30.0, 1e-10).unwrap();
        let (top0, _) = radial_sector_top(&gs2, 0, 30.0, 0.005, 0);
        let (snd0, _) = radial_sector_top(&gs2, 0, 30.0, 0.005, 1);
        let (top1, _) = radial_sector_top(&gs2, 1, 30.0, 0.005, 0);
        let (snd1, _) = radial_sector_top(&gs2, 1, 30.0, 0.005, 1);
        let (top2, _) = radial_sector_top(&gs2, 2, 30.0, 0.005, 0);
        assert!(top0 > 0.0, "principal eigenvalue {top0}");
        assert!(snd0 < -0.1, "second radial eigenvalue {snd0}");
        assert!(top1.abs() < 5e-3, "translation eigenvalue {top1}");
        assert!(snd1 < -0.1, "second ell=1 eigenvalue {snd1}");
        assert!(top2 < -0.1, "top ell=2 eigenvalue {top2}");
    }

    #[test]
    fn two_dimensional_profile_cross_checks() {
        let gs = solve_ground_state(2, 3.0, 35.0, 1e-10).unwrap();
        // Frozen after two-resolution agreement; the central amplitude of
        // the 2D cubic ground state.
        assert!((gs.w0 - 2.2062).abs() < 5e-4, "w0 = {}", gs.w0);
        assert!(gs.a_n > 0.0 && gs.i_w > 0.0 && gs.gamma > 0.0);
        assert!(gs.lambda1 > 0.0, "lambda1 = {}", gs.lambda1);
        // Independent resolution: a looser shot tolerance must change
        // nothing material, or the values above were never converged.
        let gs_coarse = solve_ground_state(2, 3.0, 35.0, 1e-8).unwrap();
        assert!((gs.w0 - gs_coarse.w0).abs() < 1e-8);
        assert!((gs.i_w - gs_coarse.i_w).abs() / gs.i_w < 1e-7);
        assert!((gs.a_n - gs_coarse.a_n).abs() / gs.a_n < 1e-4);
    }

    #[test]
    fn ode_residual_below_tolerance() {
        let gs = solve_ground_state(1, 3.0, 35.0, 1e-10).unwrap();
        let res = gs.ode_residual_max();
        assert!(res < 1e-10, "1D residual {res}");
        let gs2 = solve_ground_state(2, 3.0, 35.0, 1e-10).unwrap();
        let res2 = gs2.ode_residual_max();
        assert!(res2 < 1e-10, "2D residual {res2}");
    }

    #[test]
    fn integrated_identity_from_multiplying_by_w() {
        for dim in [1, 2] {
            let gs = solve_ground_state(dim, 3.0, 35.0, 1e-10).unwrap();
            let gap = gs.energy_identity_rel_gap();
            assert!(gap < 1e-6, "identity gap {gap} (dim {dim})");
        }
    }

    #[test]
    fn monotone_decreasing_table() {
        for dim in [1, 2] {
            let gs = solve_ground_state(dim, 3.0, 35.0, 1e-10).unwrap();
            for i in 1..gs.w.len() {
                assert!(gs.w[i] < gs.w[i - 1], "w not strictly decreasing at node {i} (dim {dim})");
                assert!(gs.dw[i] < 0.0);
            }
            // Dense sampling of the interpolant stays monotone as well.
            let mut prev = gs.eval(0.0);
            for k in 1..20000 {
                let r = k as f64 * 0.0013;
                let v = gs.eval(r);
                assert!(v < prev, "interpolant not monotone at r = {r}");
                prev = v;
            }
        }
    }

    #[test]
    fn r_max_too_small_is_rejected() {
        match solve_ground_state(1, 3.0, 10.0, 1e-10) {
            Err(Error::ToleranceNotMet(_)) => {}
            other => panic!("expected ToleranceNotMet, got {other:?}"),
        }
    }

    #[test]
    fn bad_exponent_reports_no_bracket() {
        match solve_ground_state(1, 0.5, 35.0, 1e-10) {
            Err(Error::NoDecayBracket { .. }) => {}
            other => panic!("expected NoDecayBracket, got {other:?}"),
        }
    }

    #[test]
    fn json_roundtrip_preserves_table() {
        let gs = solve_ground_state(1, 3.0, 35.0, 1e-8).unwrap();
        let dir = std::env::temp_dir().join("spikes-gs-roundtrip-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("gs.json");
        gs.save_json(&path).unwrap();
        let back = GroundState::load_json(&path).unwrap();
        assert_eq!(back.w.len(), gs.w.len());
        assert_eq!(back.w[1234], gs.w[1234]);
        assert_eq!(back.gamma, gs.gamma);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn convolution_ratio_approaches_gamma_1d() {
        let gs = solve_ground_state(1, 3.0, 35.0, 1e-10).unwrap();
        let ratio = tail_convolution_ratio(&gs, 12.0);
        let rel = (ratio - gs.gamma).abs() / gs.gamma;
        assert!(rel < 0.02, "ratio {ratio} vs gamma {} (rel {rel})", gs.gamma);
        // And e^s·∫w³(x)w(x+s)dx → A₁·γ = 16 exactly for the sech soliton.
        let product = ratio * gs.a_n;
        assert!((product - 16.0).abs() / 16.0 < 0.03, "A·γ limit {product}");
    }
}
