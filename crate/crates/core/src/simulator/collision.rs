//! Footprint overlap of two vessels modelled as oriented rectangles.

use crate::dynamics::{VesselParams, VesselState};
use crate::geometry::Vec2;

/// Separating-axis test for two `length × width` rectangles centred on the
/// vessel positions and aligned with their headings. Touching counts as a
/// collision. `margin` inflates every side of both rectangles.
pub fn check_collision(a: &VesselState, pa: &VesselParams, b: &VesselState, pb: &VesselParams, margin: f64) -> bool {
    let d = b.position() - a.position();
    let reach_a = 0.5 * (pa.length + pa.width) + margin * std::f64::consts::SQRT_2;
    let reach_b = 0.5 * (pb.length + pb.width) + margin * std::f64::consts::SQRT_2;
    if d.norm() > reach_a + reach_b {
        return false;
    }
    let (ua, va) = axes(a);
    let (ub, vb) = axes(b);
    let ha = (0.5 * pa.length + margin, 0.5 * pa.width + margin);
    let hb = (0.5 * pb.length + margin, 0.5 * pb.width + margin);
    for axis in [ua, va, ub, vb] {
        let ra = ha.0 * ua.dot(axis).abs() + ha.1 * va.dot(axis).abs();
        let rb = hb.0 * ub.dot(axis).abs() + hb.1 * vb.dot(axis).abs();
        if d.dot(axis).abs() > ra + rb {
            return false;
        }
    }
    true
}

fn axes(s: &VesselState) -> (Vec2, Vec2) {
    let u = s.phi.unit();
    (u, Vec2::new(-u.y, u.x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn t1() -> VesselParams {
        VesselParams::type1()
    }

    #[test]
    fn examples() {
        let a = VesselState::new(0.0, 0.0, 0.3, 5.0);
        assert!(check_collision(&a, &t1(), &a, &t1(), 0.0));
        let far = VesselState::new(1e4, 0.0, 0.3, 5.0);
        assert!(!check_collision(&a, &t1(), &far, &t1(), 0.0));
        let a = VesselState::new(0.0, 0.0, 0.0, 5.0);
        let touching = VesselState::new(0.0, 25.4, 0.0, 5.0);
        assert!(check_collision(&a, &t1(), &touching, &t1(), 0.0));
        let apart = VesselState::new(0.0, 25.5, 0.0, 5.0);
        assert!(!check_collision(&a, &t1(), &apart, &t1(), 0.0));
        assert!(check_collision(&a, &t1(), &apart, &t1(), 0.1));
    }

    #[test]
    fn bow_to_bow_and_crossed_rectangles() {
        let a = VesselState::new(0.0, 0.0, 0.0, 5.0);
        let ahead = VesselState::new(175.0, 0.0, PI, 5.0);
        assert!(check_collision(&a, &t1(), &ahead, &t1(), 0.0));
        let ahead = VesselState::new(175.1, 0.0, PI, 5.0);
        assert!(!check_collision(&a, &t1(), &ahead, &t1(), 0.0));
        // Perpendicular: the beam of one against the bow of the other.
        let cross = VesselState::new(0.0, 12.7 + 87.5, PI / 2.0, 5.0);
        assert!(check_collision(&a, &t1(), &cross, &t1(), 0.0));
        let cross = VesselState::new(0.0, 12.7 + 87.6, PI / 2.0, 5.0);
        assert!(!check_collision(&a, &t1(), &cross, &t1(), 0.0));
    }

    /// Point-sampling oracle: does any sample of rectangle `b` fall inside `a`?
    fn sampled_overlap(a: &VesselState, b: &VesselState, p: &VesselParams) -> bool {
        let inside = |s: &VesselState, q: Vec2| {
            let (u, v) = axes(s);
            let d = q - s.position();
            d.dot(u).abs() <= 0.5 * p.length && d.dot(v).abs() <= 0.5 * p.width
        };
        let (ub, vb) = axes(b);
        let n = 60;
        for i in 0..=n {
            for j in 0..=6 {
                let s = (i as f64 / n as f64 - 0.5) * p.length;
                let t = (j as f64 / 6.0 - 0.5) * p.width;
                if inside(a, b.position() + ub * s + vb * t) {
                    return true;
                }
            }
        }
        false
    }

    proptest! {
        #[test]
        fn symmetric_and_sound(x in -250.0..250.0f64, y in -250.0..250.0f64, pa in -PI..PI, pb in -PI..PI) {
            let p = t1();
            let a = VesselState::new(0.0, 0.0, pa, 5.0);
            let b = VesselState::new(x, y, pb, 5.0);
            let hit = check_collision(&a, &p, &b, &p, 0.0);
            prop_assert_eq!(hit, check_collision(&b, &p, &a, &p, 0.0));
            // Any sampled point inside implies overlap.
            if sampled_overlap(&a, &b, &p) || sampled_overlap(&b, &a, &p) {
                prop_assert!(hit);
            }
        }
    }
}
