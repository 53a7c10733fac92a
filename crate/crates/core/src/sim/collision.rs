//! Oriented-rectangle overlap via the separating axis test.

use crate::scenario::{VehicleGeometry, VehicleState};

/// True when the two vehicle footprints overlap (touching counts as overlap).
///
/// Only the two edge normals of each rectangle need testing.
pub fn check_collision(
    a: &VehicleState,
    ga: &VehicleGeometry,
    b: &VehicleState,
    gb: &VehicleGeometry,
) -> bool {
    let (dx, dy) = (b.x - a.x, b.y - a.y);

    // Bounding circles first; most pairs in a scene are far apart.
    let reach = 0.5 * (ga.length.hypot(ga.width) + gb.length.hypot(gb.width));
    if dx * dx + dy * dy > reach * reach {
        return false;
    }

    let (sa, ca) = a.psi.sin_cos();
    let (sb, cb) = b.psi.sin_cos();
    let axes = [(ca, sa), (-sa, ca), (cb, sb), (-sb, cb)];
    let (hla, hwa) = (0.5 * ga.length, 0.5 * ga.width);
    let (hlb, hwb) = (0.5 * gb.length, 0.5 * gb.width);

    axes.iter().all(|&(nx, ny)| {
        let radius_a = hla * (ca * nx + sa * ny).abs() + hwa * (-sa * nx + ca * ny).abs();
        let radius_b = hlb * (cb * nx + sb * ny).abs() + hwb * (-sb * nx + cb * ny).abs();
        (dx * nx + dy * ny).abs() <= radius_a + radius_b
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sedan() -> VehicleGeometry {
        VehicleGeometry::default()
    }

    fn corners(s: &VehicleState, g: &VehicleGeometry) -> [(f64, f64); 4] {
        let (sn, cs) = s.psi.sin_cos();
        let (hl, hw) = (g.length / 2.0, g.width / 2.0);
        [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)]
            .map(|(u, w)| (s.x + cs * u - sn * w, s.y + sn * u + cs * w))
    }

    fn inside(p: (f64, f64), s: &VehicleState, g: &VehicleGeometry) -> bool {
        let probe = VehicleState::new(p.0, p.1, 0.0, 0.0);
        let (bx, by) = s.to_body_frame(&probe);
        bx.abs() <= g.length / 2.0 && by.abs() <= g.width / 2.0
    }

    fn segments_cross(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
        let orient = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
            (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
        };
        let d1 = orient(q1, q2, p1);
        let d2 = orient(q1, q2, p2);
        let d3 = orient(p1, p2, q1);
        let d4 = orient(p1, p2, q2);
        d1 * d2 <= 0.0 && d3 * d4 <= 0.0
    }

    /// Geometric oracle: convex polygons overlap iff a corner of one lies in the
    /// other or two edges cross.
    fn polygon_overlap(a: &VehicleState, b: &VehicleState, g: &VehicleGeometry) -> bool {
        let (ca, cb) = (corners(a, g), corners(b, g));
        if ca.iter().any(|&p| inside(p, b, g)) || cb.iter().any(|&p| inside(p, a, g)) {
            return true;
        }
        (0..4)
            .any(|i| (0..4).any(|j| segments_cross(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4])))
    }

    #[test]
    fn identical_states_collide() {
        let s = VehicleState::new(3.0, -2.0, 0.7, 5.0);
        assert!(check_collision(&s, &sedan(), &s, &sedan()));
    }

    #[test]
    fn separated_along_x() {
        let a = VehicleState::new(0.0, 0.0, 0.0, 0.0);
        let b = VehicleState::new(10.0, 0.0, 0.0, 0.0);
        assert!(!check_collision(&a, &sedan(), &b, &sedan()));
    }

    #[test]
    fn overlapping_along_x() {
        let a = VehicleState::new(0.0, 0.0, 0.0, 0.0);
        let b = VehicleState::new(4.0, 0.0, 0.0, 0.0);
        assert!(check_collision(&a, &sedan(), &b, &sedan()));
    }

    #[test]
    fn rotated_corner_gap() {
        // A 45° box beside an axis-aligned one: circles overlap, SAT separates.
        let a = VehicleState::new(0.0, 0.0, 0.0, 0.0);
        let b = VehicleState::new(0.0, 3.4, PI / 4.0, 0.0);
        assert!(!check_collision(&a, &sedan(), &b, &sedan()));
        let c = VehicleState::new(0.0, 2.2, PI / 4.0, 0.0);
        assert!(check_collision(&a, &sedan(), &c, &sedan()));
    }

    proptest! {
        #[test]
        fn matches_polygon_oracle(
            x in -6.0..6.0f64, y in -6.0..6.0f64, psi in -PI..PI, psi_a in -PI..PI
        ) {
            let a = VehicleState::new(0.0, 0.0, psi_a, 0.0);
            let b = VehicleState::new(x, y, psi, 0.0);
            let sat = check_collision(&a, &sedan(), &b, &sedan());
            prop_assert_eq!(sat, polygon_overlap(&a, &b, &sedan()));
            prop_assert_eq!(sat, check_collision(&b, &sedan(), &a, &sedan()));
        }
    }
}
