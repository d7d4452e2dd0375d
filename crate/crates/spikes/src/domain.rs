//! Physical domains and their boundary geometry.
//!
//! Everything downstream needs three exact pieces of data about a point in
//! the domain: its distance to the boundary, the nearest boundary point with
//! its outward normal, and the mirror image across that nearest face. All
//! three are closed-form for the shapes supported here, so no projection
//! iteration is involved and the identity |Q - Q*| = 2 d(Q) holds to
//! rounding.
//!
//! Points are carried as `[f64; 2]` throughout; one-dimensional domains use
//! the first component and keep the second at zero.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest admissible value of the small parameter. The asymptotic regime
/// the solver targets degrades quickly above this; configurations violating
/// it are refused up front rather than allowed to produce junk.
pub const EPS_MAX: f64 = 0.25;

/// Supported domain shapes, in physical coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    /// The interval [a, b].
    Interval { a: f64, b: f64 },
    /// Axis-aligned rectangle [x0, x1] × [y0, y1].
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    /// Disk of radius `r` centered at (cx, cy).
    Disk { cx: f64, cy: f64, r: f64 },
}

/// A physical domain together with the singular-perturbation parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub shape: Shape,
    pub epsilon: f64,
}

/// Exact boundary data for an interior point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGeometry {
    /// Distance to the boundary.
    pub distance: f64,
    /// Nearest boundary point.
    pub nearest: [f64; 2],
    /// Outward unit normal at `nearest`.
    pub normal: [f64; 2],
    /// Mirror image across the nearest face, Q* = Q + 2 d ν.
    pub reflected: [f64; 2],
}

impl Domain {
    pub fn new(shape: Shape, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < EPS_MAX) {
            return Err(Error::ConfigParse(format!(
                "epsilon must lie in (0, {EPS_MAX}), got {epsilon}"
            )));
        }
        match shape {
            Shape::Interval { a, b } if !(b > a) => Err(Error::ConfigParse(format!(
                "empty interval [{a}, {b}]"
            ))),
            Shape::Rectangle { x0, x1, y0, y1 } if !(x1 > x0 && y1 > y0) => {
                Err(Error::ConfigParse(format!(
                    "empty rectangle [{x0}, {x1}] x [{y0}, {y1}]"
                )))
            }
            Shape::Disk { r, .. } if !(r > 0.0) => {
                Err(Error::ConfigParse(format!("disk radius must be positive, got {r}")))
            }
            shape => Ok(Domain { shape, epsilon }),
        }
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Lebesgue measure of the domain (length or area).
    pub fn measure(&self) -> f64 {
        match self.shape {
            Shape::Interval { a, b } => b - a,
            Shape::Rectangle { x0, x1, y0, y1 } => (x1 - x0) * (y1 - y0),
            Shape::Disk { r, .. } => std::f64::consts::PI * r * r,
        }
    }

    /// Bounding box in physical coordinates, as (lower corner, upper corner).
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match self.shape {
            Shape::Interval { a, b } => ([a, 0.0], [b, 0.0]),
            Shape::Rectangle { x0, x1, y0, y1 } => ([x0, y0], [x1, y1]),
            Shape::Disk { cx, cy, r } => ([cx - r, cy - r], [cx + r, cy + r]),
        }
    }

    /// Whether the point lies in the closed domain.
    pub fn contains(&self, q: [f64; 2]) -> bool {
        match self.shape {
            Shape::Interval { a, b } => q[0] >= a && q[0] <= b,
            Shape::Rectangle { x0, x1, y0, y1 } => {
                q[0] >= x0 && q[0] <= x1 && q[1] >= y0 && q[1] <= y1
            }
            Shape::Disk { cx, cy, r } => {
                let dx = q[0] - cx;
                let dy = q[1] - cy;
                dx * dx + dy * dy <= r * r
            }
        }
    }

    /// Distance from an interior point to the boundary.
    pub fn boundary_distance(&self, q: [f64; 2]) -> Result<f64> {
        Ok(self.boundary_geometry(q)?.distance)
    }

    /// Distance, nearest boundary point, outward normal, and mirror image for
    /// an interior point. Fails with `PointOutsideDomain` otherwise.
    ///
    /// Rectangle ties between faces resolve in the fixed order left, right,
    /// bottom, top, so results are reproducible on symmetric inputs. A point
    /// at the center of a disk has no preferred direction; the positive x
    /// axis is used there.
    pub fn boundary_geometry(&self, q: [f64; 2]) -> Result<BoundaryGeometry> {
        if !self.contains(q) {
            return Err(Error::PointOutsideDomain { x: q[0], y: q[1] });
        }
        let geo = match self.shape {
            Shape::Interval { a, b } => {
                let (d, nearest, normal) = if q[0] - a <= b - q[0] {
                    (q[0] - a, [a, 0.0], [-1.0, 0.0])
                } else {
                    (b - q[0], [b, 0.0], [1.0, 0.0])
                };
                BoundaryGeometry {
                    distance: d,
                    nearest,
                    normal,
                    reflected: [q[0] + 2.0 * d * normal[0], 0.0],
                }
            }
            Shape::Rectangle { .. } => {
                let faces = self.rectangle_faces(q);
                let (d, nearest, normal) = faces
                    .iter()
                    .copied()
                    .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                    .unwrap();
                BoundaryGeometry {
                    distance: d,
                    nearest,
                    normal,
                    reflected: [q[0] + 2.0 * d * normal[0], q[1] + 2.0 * d * normal[1]],
                }
            }
            Shape::Disk { cx, cy, r } => {
                let dx = q[0] - cx;
                let dy = q[1] - cy;
                let rho = (dx * dx + dy * dy).sqrt();
                let normal = if rho > 0.0 { [dx / rho, dy / rho] } else { [1.0, 0.0] };
                let d = r - rho;
                BoundaryGeometry {
                    distance: d,
                    nearest: [cx + r * normal[0], cy + r * normal[1]],
                    normal,
                    reflected: [q[0] + 2.0 * d * normal[0], q[1] + 2.0 * d * normal[1]],
                }
            }
        };
        Ok(geo)
    }

    /// Mirror image of an interior point across the nearest boundary face.
    pub fn reflect_point(&self, q: [f64; 2]) -> Result<[f64; 2]> {
        Ok(self.boundary_geometry(q)?.reflected)
    }

    /// Mirror images across every boundary face whose distance is within
    /// `slack` of the minimum. For the rectangle this picks up the second
    /// face near a corner; interval and disk always return one image. Used
    /// by the feasibility check so that a spike close to a corner clears
    /// both walls, not just the marginally nearer one.
    pub fn reflections_within(&self, q: [f64; 2], slack: f64) -> Result<Vec<[f64; 2]>> {
        let geo = self.boundary_geometry(q)?;
        let mut out = vec![geo.reflected];
        if let Shape::Rectangle { .. } = self.shape {
            for (d, _, normal) in self.rectangle_faces(q) {
                if d > geo.distance + slack {
                    continue;
                }
                let refl = [q[0] + 2.0 * d * normal[0], q[1] + 2.0 * d * normal[1]];
                if !out.iter().any(|r| r == &refl) {
                    out.push(refl);
                }
            }
        }
        Ok(out)
    }

    fn rectangle_faces(&self, q: [f64; 2]) -> [(f64, [f64; 2], [f64; 2]); 4] {
        match self.shape {
            Shape::Rectangle { x0, x1, y0, y1 } => [
                (q[0] - x0, [x0, q[1]], [-1.0, 0.0]),
                (x1 - q[0], [x1, q[1]], [1.0, 0.0]),
                (q[1] - y0, [q[0], y0], [0.0, -1.0]),
                (y1 - q[1], [q[0], y1], [0.0, 1.0]),
            ],
            _ => unreachable!("rectangle_faces on a non-rectangle"),
        }
    }
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Feasibility of a spike configuration: every pair of centers at distance
/// at least ρε, and every center close enough to the boundary to feel it
/// also at distance at least ρε from its mirror images.
///
/// The mirror constraint is only meaningful for centers within the boundary
/// layer; beyond `10 ε |log ε|` the image interaction is far below every
/// tolerance in the pipeline and the constraint is skipped. `corner_slack`
/// widens the set of faces whose images are checked (pass one mesh cell,
/// h·ε, so a near-corner spike cannot hide behind a tie-break).
pub fn check_feasible(
    domain: &Domain,
    points: &[[f64; 2]],
    rho: f64,
    corner_slack: f64,
) -> Result<()> {
    let eps = domain.epsilon;
    let min_sep = rho * eps;
    // Separation exactly rho*eps is admissible; a relative haircut keeps
    // roundoff in the distance computation from rejecting it.
    let floor = min_sep * (1.0 - 1e-12);
    let layer = 10.0 * eps * eps.ln().abs();
    for (i, &p) in points.iter().enumerate() {
        if !domain.contains(p) {
            return Err(Error::PointOutsideDomain { x: p[0], y: p[1] });
        }
        for &q in points.iter().take(i) {
            let d = dist(p, q);
            if d < floor {
                return Err(Error::InfeasibleConfiguration(format!(
                    "centers at distance {d:.6e} < rho*eps = {min_sep:.6e}"
                )));
            }
        }
        let geo = domain.boundary_geometry(p)?;
        if geo.distance <= layer {
            // Every spike, not just this one, must clear the mirror image.
            for refl in domain.reflections_within(p, corner_slack)? {
                for &q in points.iter() {
                    let d = dist(q, refl);
                    if d < floor {
                        return Err(Error::InfeasibleConfiguration(format!(
                            "center at distance {:.6e} from boundary, image gap {d:.6e} < rho*eps = {min_sep:.6e}",
                            geo.distance
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Smallest pairwise gap and smallest image gap of a configuration, in
/// physical units. Either slot is +inf when the constraint set is empty
/// (fewer than two spikes, or none in the boundary layer).
pub fn feasibility_margins(
    domain: &Domain,
    points: &[[f64; 2]],
    corner_slack: f64,
) -> Result<(f64, f64)> {
    let eps = domain.epsilon;
    let layer = 10.0 * eps * eps.ln().abs();
    let mut min_pair = f64::INFINITY;
    let mut min_image = f64::INFINITY;
    for (i, &p) in points.iter().enumerate() {
        for &q in points.iter().take(i) {
            min_pair = min_pair.min(dist(p, q));
        }
        let geo = domain.boundary_geometry(p)?;
        if geo.distance <= layer {
            for refl in domain.reflections_within(p, corner_slack)? {
                for &q in points.iter() {
                    min_image = min_image.min(dist(q, refl));
                }
            }
        }
    }
    Ok((min_pair, min_image))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit_interval() -> Domain {
        Domain::new(Shape::Interval { a: 0.0, b: 1.0 }, 0.02).unwrap()
    }

    fn unit_disk() -> Domain {
        Domain::new(Shape::Disk { cx: 0.0, cy: 0.0, r: 1.0 }, 0.1).unwrap()
    }

    fn unit_square() -> Domain {
        Domain::new(Shape::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }, 0.05).unwrap()
    }

    #[test]
    fn interval_reflection() {
        let geo = unit_interval().boundary_geometry([0.3, 0.0]).unwrap();
        assert_abs_diff_eq!(geo.distance, 0.3, epsilon = 1e-15);
        assert_eq!(geo.normal, [-1.0, 0.0]);
        assert_abs_diff_eq!(geo.reflected[0], -0.3, epsilon = 1e-15);
    }

    #[test]
    fn disk_reflection() {
        let geo = unit_disk().boundary_geometry([0.5, 0.0]).unwrap();
        assert_abs_diff_eq!(geo.distance, 0.5, epsilon = 1e-15);
        assert_eq!(geo.normal, [1.0, 0.0]);
        assert_abs_diff_eq!(geo.reflected[0], 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(geo.reflected[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn disk_center_uses_fixed_direction() {
        let geo = unit_disk().boundary_geometry([0.0, 0.0]).unwrap();
        assert_eq!(geo.normal, [1.0, 0.0]);
        assert_abs_diff_eq!(geo.distance, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(geo.reflected[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn rectangle_reflection() {
        let geo = unit_square().boundary_geometry([0.5, 0.2]).unwrap();
        assert_abs_diff_eq!(geo.distance, 0.2, epsilon = 1e-15);
        assert_eq!(geo.normal, [0.0, -1.0]);
        assert_abs_diff_eq!(geo.reflected[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(geo.reflected[1], -0.2, epsilon = 1e-15);
    }

    #[test]
    fn rectangle_tie_breaks_left_before_bottom() {
        let geo = unit_square().boundary_geometry([0.25, 0.25]).unwrap();
        assert_eq!(geo.normal, [-1.0, 0.0]);
    }

    #[test]
    fn corner_produces_two_images() {
        let refl = unit_square().reflections_within([0.1, 0.1001], 0.01).unwrap();
        assert_eq!(refl.len(), 2);
        assert!(refl.contains(&[-0.1, 0.1001]));
        assert!(refl.contains(&[0.1, -0.1001]));
        // Far from the corner only the near face reflects.
        let refl = unit_square().reflections_within([0.1, 0.5], 0.01).unwrap();
        assert_eq!(refl.len(), 1);
    }

    #[test]
    fn outside_points_are_refused() {
        assert!(matches!(
            unit_disk().boundary_geometry([1.2, 0.0]),
            Err(Error::PointOutsideDomain { .. })
        ));
        assert!(matches!(
            unit_interval().boundary_geometry([-0.1, 0.0]),
            Err(Error::PointOutsideDomain { .. })
        ));
    }

    #[test]
    fn epsilon_is_validated() {
        assert!(Domain::new(Shape::Interval { a: 0.0, b: 1.0 }, 0.3).is_err());
        assert!(Domain::new(Shape::Interval { a: 0.0, b: 1.0 }, 0.0).is_err());
        assert!(Domain::new(Shape::Interval { a: 1.0, b: 0.0 }, 0.1).is_err());
    }

    #[test]
    fn measures() {
        assert_abs_diff_eq!(unit_interval().measure(), 1.0);
        assert_abs_diff_eq!(unit_square().measure(), 1.0);
        assert_abs_diff_eq!(unit_disk().measure(), std::f64::consts::PI, epsilon = 1e-15);
    }

    #[test]
    fn feasibility_separation_and_images() {
        let dom = unit_interval();
        // rho*eps = 0.16; 0.3 and 0.7 are 0.4 apart, each 0.3 from the wall.
        assert!(check_feasible(&dom, &[[0.3, 0.0], [0.7, 0.0]], 8.0, 0.0).is_ok());
        // Pair too close.
        assert!(check_feasible(&dom, &[[0.3, 0.0], [0.4, 0.0]], 8.0, 0.0).is_err());
        // Near-wall spike: image gap 2*0.05 = 0.1 < 0.16. The boundary layer
        // 10*eps*|log eps| = 0.78 covers the whole interval at eps = 0.02.
        assert!(check_feasible(&dom, &[[0.05, 0.0]], 8.0, 0.0).is_err());
        assert!(check_feasible(&dom, &[[0.08, 0.0]], 8.0, 0.0).is_ok());
    }

    #[test]
    fn near_corner_feasibility_checks_both_walls() {
        let dom = unit_square();
        // rho*eps = 0.4. The point clears the bottom wall's image exactly at
        // 2*0.2 = 0.4 but the left wall, one whisker farther, would fail;
        // with slack covering the gap the configuration is refused.
        let q = [0.15, 0.149];
        assert!(check_feasible(&dom, &[q], 8.0, 0.0).is_err());
        let q = [0.21, 0.2];
        assert!(check_feasible(&dom, &[q], 8.0, 0.0).is_ok());
        let q = [0.201, 0.2];
        assert!(check_feasible(&dom, &[q], 8.0, 0.01).is_ok());
        let q = [0.199, 0.2];
        assert!(check_feasible(&dom, &[q], 8.0, 0.01).is_err());
    }

    proptest! {
        #[test]
        fn reflection_distance_is_twice_boundary_distance(
            x in 0.001f64..0.999,
            y in 0.001f64..0.999,
        ) {
            for dom in [unit_interval(), unit_square(), unit_disk()] {
                let q = match dom.shape {
                    Shape::Interval { .. } => [x, 0.0],
                    Shape::Rectangle { .. } => [x, y],
                    // Scale into the open disk.
                    Shape::Disk { .. } => [(2.0 * x - 1.0) * 0.7, (2.0 * y - 1.0) * 0.7],
                };
                let geo = dom.boundary_geometry(q).unwrap();
                prop_assert!((dist(q, geo.reflected) - 2.0 * geo.distance).abs() < 1e-12);
                prop_assert!((dist(geo.nearest, q) - geo.distance).abs() < 1e-12);
                // The image lies outside, its midpoint with q on the boundary.
                prop_assert!(!dom.contains(geo.reflected) || geo.distance == 0.0);
            }
        }
    }
}
