//! Runtime scaling with the number of vessels.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{VesselParams, VesselState};
use crate::error::{Error, Result};
use crate::geometry::{Angle, Vec2};
use crate::simulator::{IsmVessel, Scenario, Simulation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub vessels: usize,
    /// Median wall time per simulation step, seconds.
    pub step: f64,
    pub mpc: f64,
    pub waypoint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub rows: Vec<ProfileRow>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl ProfileReport {
    pub fn to_table(&self) -> String {
        let mut out = format!("{:>7} {:>12} {:>12} {:>12}\n", "vessels", "step [s]", "mpc [s]", "waypoint [s]");
        for r in &self.rows {
            out.push_str(&format!(
                "{:>7} {:>12.6} {:>12.6} {:>12.6}\n",
                r.vessels, r.step, r.mpc, r.waypoint
            ));
        }
        out.push_str(&format!(
            "linear fit: step = {:.6} + {:.6}·n, R² = {:.4}\n",
            self.intercept, self.slope, self.r_squared
        ));
        out
    }
}

/// `n` vessels evenly spaced on a circle, each bound for the opposite side.
pub fn ring_scenario(n: usize, params: &VesselParams, radius: f64, steps: usize) -> Scenario {
    let vessels = (0..n)
        .map(|i| {
            let theta = 2.0 * PI * i as f64 / n as f64;
            let p = Angle::new(theta).unit() * radius;
            IsmVessel {
                name: format!("v{i}"),
                params: params.clone(),
                initial: VesselState::new(p.x, p.y, theta + PI, params.v_des),
                goals: vec![Vec2::ZERO - p],
            }
        })
        .collect();
    Scenario {
        dt: 1.0,
        max_steps: steps,
        seed: 0,
        vessels,
        obstacles: vec![],
        collision_margin: 0.0,
    }
}

/// Least-squares line through `(x, y)`; returns slope, intercept and R².
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}

/// Times `steps` simulation steps for every fleet size from 1 to
/// `max_vessels`. Medians keep scheduler spikes out of the fit.
pub fn profile(max_vessels: usize, steps: usize, params: &VesselParams) -> Result<ProfileReport> {
    if max_vessels == 0 || steps == 0 {
        return Err(Error::Config("profile needs at least one vessel and one step".into()));
    }
    let mut rows = Vec::new();
    for n in 1..=max_vessels {
        let s = ring_scenario(n, params, 8000.0, steps);
        let mut sim = Simulation::new(&s)?;
        while sim.step()? {}
        let (_, result) = sim.finish();
        let median = |f: fn(&crate::simulator::StepTiming) -> f64| {
            let mut xs: Vec<f64> = result.timings.iter().map(f).collect();
            xs.sort_by(f64::total_cmp);
            xs.get(xs.len() / 2).copied().unwrap_or(0.0)
        };
        rows.push(ProfileRow {
            vessels: n,
            step: median(|t| t.total),
            mpc: median(|t| t.mpc),
            waypoint: median(|t| t.waypoint),
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.vessels as f64, r.step)).collect();
    let (slope, intercept, r_squared) = if pts.len() > 1 { linear_fit(&pts) } else { (0.0, pts[0].1, 1.0) };
    Ok(ProfileReport {
        rows,
        slope,
        intercept,
        r_squared,
    })
}
