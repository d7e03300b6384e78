//! COLREGS encounter predicates for power-driven vessels on the open sea.
//!
//! Every predicate is evaluated from the perspective of vessel `l` with
//! respect to another vessel `m`. Sectors are measured by the relative bearing
//! of `m` seen from `l`; orientations by the relative heading `φ_m − φ_l`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{VesselParams, VesselState};
use crate::error::{Error, Result};
use crate::geometry::{vec2rad, wrap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateParams {
    pub t_horizon: f64,
    /// Horizon used by the stand-on predicate.
    pub t_horizon_check: f64,
    pub delta_head_on: f64,
    /// `l` sails faster than `m` when `v_l ≥ speed_factor · v_m`.
    pub speed_factor: f64,
    /// Outer bound of the side sectors (sidelight arc).
    pub side_sector: f64,
    /// Maximum heading difference for an overtaking encounter.
    pub overtake_delta: f64,
}

impl Default for PredicateParams {
    fn default() -> Self {
        PredicateParams {
            t_horizon: 420.0,
            t_horizon_check: 420.0,
            delta_head_on: 10f64.to_radians(),
            speed_factor: 1.1,
            side_sector: 112.5f64.to_radians(),
            overtake_delta: 67.5f64.to_radians(),
        }
    }
}

impl PredicateParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("t_horizon", self.t_horizon),
            ("t_horizon_check", self.t_horizon_check),
            ("delta_head_on", self.delta_head_on),
            ("speed_factor", self.speed_factor),
            ("side_sector", self.side_sector),
            ("overtake_delta", self.overtake_delta),
        ];
        for (name, value) in checks {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        if self.delta_head_on >= PI / 2.0 {
            return Err(Error::Config("delta_head_on must be below π/2".into()));
        }
        if self.side_sector <= self.delta_head_on || self.side_sector >= PI {
            return Err(Error::Config(
                "side_sector must lie between delta_head_on and π".into(),
            ));
        }
        Ok(())
    }
}

/// A vessel as seen by the predicates: its state and the radius of the disc
/// that encloses it for collision-cone tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Participant {
    pub state: VesselState,
    pub radius: f64,
}

impl Participant {
    pub fn new(state: VesselState, params: &VesselParams) -> Self {
        Participant {
            state,
            radius: params.disc_radius(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncounterKind {
    HeadOnGiveWay,
    CrossingGiveWay,
    OvertakeGiveWay,
    StandOn,
    None,
}

impl EncounterKind {
    pub fn is_give_way(self) -> bool {
        matches!(
            self,
            EncounterKind::HeadOnGiveWay
                | EncounterKind::CrossingGiveWay
                | EncounterKind::OvertakeGiveWay
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EncounterKind::HeadOnGiveWay => "head_on",
            EncounterKind::CrossingGiveWay => "crossing",
            EncounterKind::OvertakeGiveWay => "overtake",
            EncounterKind::StandOn => "stand_on",
            EncounterKind::None => "none",
        }
    }

    /// Resolves raw predicate values. Give-way obligations take precedence
    /// over standing on; two give-way predicates at once is an error.
    pub fn from_flags(flags: EncounterFlags) -> Result<Self> {
        let give_way = [
            (flags.head_on, EncounterKind::HeadOnGiveWay),
            (flags.crossing, EncounterKind::CrossingGiveWay),
            (flags.overtake, EncounterKind::OvertakeGiveWay),
        ];
        let mut active = give_way.iter().filter(|(on, _)| *on).map(|(_, k)| *k);
        match (active.next(), active.next()) {
            (Some(a), Some(b)) => Err(Error::Invariant(format!(
                "{} and {} hold simultaneously",
                a.as_str(),
                b.as_str()
            ))),
            (Some(k), None) => Ok(k),
            _ if flags.keep => Ok(EncounterKind::StandOn),
            _ => Ok(EncounterKind::None),
        }
    }
}

impl std::str::FromStr for EncounterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            EncounterKind::HeadOnGiveWay,
            EncounterKind::CrossingGiveWay,
            EncounterKind::OvertakeGiveWay,
            EncounterKind::StandOn,
            EncounterKind::None,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::Validation(format!("unknown encounter kind {s:?}")))
    }
}

impl std::fmt::Display for EncounterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EncounterFlags {
    pub head_on: bool,
    pub crossing: bool,
    pub overtake: bool,
    pub keep: bool,
}

/// Relative bearing of `m` seen from `l`, in `[-π, π)`.
pub fn relative_bearing(l: &VesselState, m: &VesselState) -> f64 {
    match vec2rad(m.position(), l.position()) {
        Ok(b) => wrap(b.rad() - l.phi.rad()),
        Err(_) => 0.0,
    }
}

/// Heading of `m` relative to `l`.
pub fn relative_heading(l: &VesselState, m: &VesselState) -> f64 {
    m.phi.diff(l.phi)
}

pub fn in_front_sector(l: &VesselState, m: &VesselState, p: &PredicateParams) -> bool {
    relative_bearing(l, m).abs() <= p.delta_head_on
}

pub fn in_right_sector(l: &VesselState, m: &VesselState, p: &PredicateParams) -> bool {
    let b = relative_bearing(l, m);
    b > -p.side_sector && b <= -p.delta_head_on
}

pub fn in_left_sector(l: &VesselState, m: &VesselState, p: &PredicateParams) -> bool {
    let b = relative_bearing(l, m);
    b >= p.delta_head_on && b < p.side_sector
}

/// True when `m` lies in the stern sector of `l`.
pub fn in_behind_sector(l: &VesselState, m: &VesselState, p: &PredicateParams) -> bool {
    relative_bearing(l, m).abs() >= p.side_sector
}

/// True when the relative heading deviates from `reference` by more than `delta`.
pub fn orientation_delta(l: &VesselState, m: &VesselState, delta: f64, reference: f64) -> bool {
    wrap(relative_heading(l, m) - reference).abs() > delta
}

/// `m` heads across the bow of `l` from starboard to port.
pub fn orientation_towards_left(l: &VesselState, m: &VesselState, delta: f64) -> bool {
    let psi = relative_heading(l, m);
    psi >= delta && psi < PI - delta
}

/// `m` heads across the bow of `l` from port to starboard.
pub fn orientation_towards_right(l: &VesselState, m: &VesselState, delta: f64) -> bool {
    let psi = relative_heading(l, m);
    psi > -(PI - delta) && psi <= -delta
}

pub fn sails_faster(l: &VesselState, m: &VesselState, p: &PredicateParams) -> bool {
    l.v >= p.speed_factor * m.v
}

/// Velocity-obstacle test: the relative velocity points into the cone of the
/// combined disc and the current gap closes within `t_horizon` at that rate.
pub fn collision_possible(l: &Participant, m: &Participant, t_horizon: f64) -> bool {
    let r = m.state.position() - l.state.position();
    let dist = r.norm();
    let radius = l.radius + m.radius;
    if dist <= radius {
        return true;
    }
    let v_rel = l.state.velocity() - m.state.velocity();
    let speed = v_rel.norm();
    if speed * t_horizon < dist {
        return false;
    }
    let along = r.dot(v_rel);
    if along <= 0.0 {
        return false;
    }
    // Perpendicular miss distance of the relative ray from m's centre.
    let miss = r.cross(v_rel).abs() / speed;
    miss <= radius
}

pub fn head_on(l: &Participant, m: &Participant, p: &PredicateParams) -> bool {
    collision_possible(l, m, p.t_horizon)
        && in_front_sector(&l.state, &m.state, p)
        && !orientation_delta(&l.state, &m.state, p.delta_head_on, PI)
}

pub fn crossing(l: &Participant, m: &Participant, p: &PredicateParams) -> bool {
    crossing_geometry(&l.state, &m.state, p) && collision_possible(l, m, p.t_horizon)
}

fn crossing_geometry(l: &VesselState, m: &VesselState, p: &PredicateParams) -> bool {
    // Excluding the overtaking geometry keeps the give-way kinds disjoint.
    in_right_sector(l, m, p)
        && orientation_towards_left(l, m, p.delta_head_on)
        && !in_behind_sector(m, l, p)
}

pub fn overtake(l: &Participant, m: &Participant, p: &PredicateParams) -> bool {
    overtake_with_horizon(l, m, p, p.t_horizon)
}

fn overtake_with_horizon(l: &Participant, m: &Participant, p: &PredicateParams, t: f64) -> bool {
    in_behind_sector(&m.state, &l.state, p)
        && !orientation_delta(&l.state, &m.state, p.overtake_delta, 0.0)
        && sails_faster(&l.state, &m.state, p)
        && collision_possible(l, m, t)
}

pub fn keep(l: &Participant, m: &Participant, p: &PredicateParams) -> bool {
    let crossed = in_left_sector(&l.state, &m.state, p)
        && orientation_towards_right(&l.state, &m.state, p.delta_head_on)
        && !in_behind_sector(&m.state, &l.state, p)
        && collision_possible(l, m, p.t_horizon_check);
    crossed || overtake_with_horizon(m, l, p, p.t_horizon_check)
}

pub fn flags(l: &Participant, m: &Participant, p: &PredicateParams) -> EncounterFlags {
    EncounterFlags {
        head_on: head_on(l, m, p),
        crossing: crossing(l, m, p),
        overtake: overtake(l, m, p),
        keep: keep(l, m, p),
    }
}

/// Encounter role of `l` with respect to `m`.
pub fn classify(l: &Participant, m: &Participant, p: &PredicateParams) -> Result<EncounterKind> {
    EncounterKind::from_flags(flags(l, m, p))
}
