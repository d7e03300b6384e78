//! Desired-position trajectory along the active waypoint polyline.

use crate::geometry::{orthop, Vec2};
use crate::waypoint::WaypointPlan;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    /// `p^d_0 ..= p^d_N`.
    pub positions: Vec<Vec2>,
    pub dt: f64,
}

impl ReferenceTrajectory {
    pub fn horizon(&self) -> usize {
        self.positions.len() - 1
    }
}

/// Projects `p0` onto the segment from the last reached waypoint to the next
/// one, then advances `speed · dt` per step along the remaining waypoints.
/// The reference holds at the final waypoint.
pub fn get_reference(plan: &WaypointPlan, p0: Vec2, speed: f64, dt: f64, steps: usize) -> ReferenceTrajectory {
    let mut start = plan.last_reached;
    let mut rest: Vec<Vec2> = plan.active.iter().map(|w| w.position).collect();
    // Zero-length segments are skipped.
    while let Some(&first) = rest.first() {
        if first.distance(start) > 1e-9 {
            break;
        }
        start = first;
        rest.remove(0);
    }
    let Some(&next) = rest.first() else {
        return ReferenceTrajectory {
            positions: vec![if plan.active.is_empty() { p0 } else { start }; steps + 1],
            dt,
        };
    };
    let seg = next - start;
    let along = orthop(p0 - start, seg).map_or(Vec2::ZERO, |v| v);
    let t = if along.dot(seg) < 0.0 { 0.0 } else { (along.norm() / seg.norm()).min(1.0) };
    let projected = start + seg * t;

    let mut polyline = Vec::with_capacity(rest.len() + 1);
    polyline.push(projected);
    polyline.extend(rest);

    let mut positions = Vec::with_capacity(steps + 1);
    positions.push(projected);
    let step = speed * dt;
    let (mut seg_idx, mut offset) = (0usize, 0.0f64);
    for _ in 0..steps {
        let mut remaining = step;
        loop {
            if seg_idx + 1 >= polyline.len() {
                break;
            }
            let (a, b) = (polyline[seg_idx], polyline[seg_idx + 1]);
            let len = a.distance(b);
            if offset + remaining <= len {
                offset += remaining;
                break;
            }
            remaining -= len - offset;
            seg_idx += 1;
            offset = 0.0;
        }
        let p = if seg_idx + 1 >= polyline.len() {
            polyline[polyline.len() - 1]
        } else {
            let (a, b) = (polyline[seg_idx], polyline[seg_idx + 1]);
            let len = a.distance(b);
            if len > 0.0 { a + (b - a) * (offset / len) } else { a }
        };
        positions.push(p);
    }
    ReferenceTrajectory { positions, dt }
}
