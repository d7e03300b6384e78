//! Rule-adaptive waypoint engine.
//!
//! Each vessel owns one [`WaypointEngine`]. Every time step it consumes reached
//! waypoints, watches the other vessels for encounters and, once an encounter
//! has persisted for the reaction time, rewrites the active waypoint list into
//! an evasive maneuver. When the maneuver ends the vessel resumes the unreached
//! part of its original task.

use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::dynamics::{VesselParams, VesselState};
use crate::error::{Error, Result};
use crate::geometry::{in_h, intersect, rad2vec, vec2rad, wrap, Angle, Line2, Vec2};
use crate::predicates::{self, classify, EncounterKind, Participant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaypointKind {
    /// Consumed once the vessel comes within `d_wp`.
    Normal,
    /// Placed out of reach; only sets a direction.
    Guiding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Vec2,
    pub kind: WaypointKind,
    /// Index into the original goal list, if this waypoint is one of them.
    pub goal: Option<usize>,
}

impl Waypoint {
    pub fn normal(position: Vec2) -> Self {
        Waypoint {
            position,
            kind: WaypointKind::Normal,
            goal: None,
        }
    }
}

/// Guiding waypoint `d_guide` ahead of `position` along `direction`.
pub fn make_guiding(position: Vec2, direction: Angle, params: &VesselParams) -> Result<Waypoint> {
    let reach = params.horizon * params.v_max;
    if params.d_guide <= reach {
        return Err(Error::Config(format!(
            "guiding distance {} is reachable within the horizon ({reach} m)",
            params.d_guide
        )));
    }
    Ok(Waypoint {
        position: position + rad2vec(direction) * params.d_guide,
        kind: WaypointKind::Guiding,
        goal: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPlan {
    pub active: Vec<Waypoint>,
    pub goals: Vec<Vec2>,
    pub reached: Vec<bool>,
    /// Start of the segment currently tracked.
    pub last_reached: Vec2,
    /// Speed to hold instead of the desired speed, set while standing on.
    pub hold_speed: Option<f64>,
}

impl WaypointPlan {
    pub fn new(start: Vec2, goals: Vec<Vec2>) -> Result<Self> {
        if goals.is_empty() {
            return Err(Error::Validation("a vessel needs at least one goal".into()));
        }
        let mut plan = WaypointPlan {
            active: Vec::new(),
            reached: vec![false; goals.len()],
            goals,
            last_reached: start,
            hold_speed: None,
        };
        plan.resume(start);
        Ok(plan)
    }

    pub fn is_finished(&self) -> bool {
        self.reached.iter().all(|r| *r)
    }

    pub fn next_waypoint(&self) -> Option<&Waypoint> {
        self.active.first()
    }

    /// Replaces the active list with every unreached goal, in order, heading
    /// for the first of them from `from`.
    pub fn resume(&mut self, from: Vec2) {
        self.active = self
            .goals
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.reached[*i])
            .map(|(i, g)| Waypoint {
                position: *g,
                kind: WaypointKind::Normal,
                goal: Some(i),
            })
            .collect();
        self.last_reached = from;
        self.hold_speed = None;
    }

    /// Installs a maneuver starting at `from`.
    pub fn replace(&mut self, from: Vec2, waypoints: Vec<Waypoint>) {
        self.active = waypoints;
        self.last_reached = from;
    }

    /// Pops leading normal waypoints within reach. The final goal uses the
    /// tighter `d_term`. Returns how many were consumed.
    pub fn consume(&mut self, p: Vec2, params: &VesselParams) -> usize {
        let last_goal = self.goals.len() - 1;
        let mut count = 0;
        while let Some(w) = self.active.first().copied() {
            if w.kind != WaypointKind::Normal {
                break;
            }
            let radius = if w.goal == Some(last_goal) {
                params.d_term
            } else {
                params.d_wp
            };
            if p.distance(w.position) > radius {
                break;
            }
            self.active.remove(0);
            self.last_reached = w.position;
            if let Some(i) = w.goal {
                self.reached[i] = true;
            }
            count += 1;
        }
        count
    }
}

/// Whether the heading stayed within `alpha_so` of the direction from `p1`
/// towards `p2` over the trailing `t_so` window. `headings` is oldest first.
pub fn stable_orientation(
    headings: &[Angle],
    p1: Vec2,
    p2: Vec2,
    params: &VesselParams,
    dt: f64,
) -> bool {
    let n = (params.t_so / dt - 1e-9).ceil().max(1.0) as usize;
    if headings.len() < n {
        return false;
    }
    let Ok(desired) = vec2rad(p2, p1) else {
        return false;
    };
    headings[headings.len() - n..]
        .iter()
        .all(|phi| phi.diff(desired).abs() <= params.alpha_so)
}

/// True when `obs` is at least `d` behind the vessel at `own`.
pub fn obstacle_behind(own: &VesselState, obs: Vec2, d: f64) -> bool {
    in_h(obs - own.position(), own.phi, -d)
}

/// Another vessel as seen by the engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub participant: Participant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encounter {
    pub kind: EncounterKind,
    pub obstacle: usize,
    pub phase: u8,
    pub start_time: f64,
    pub ism0: VesselState,
    pub obs0: VesselState,
    /// Distance sailed since the maneuver started.
    pub travelled: f64,
    /// Points whose connecting direction the vessel must settle on.
    pub stable_from: Vec2,
    pub stable_to: Vec2,
    /// Waypoints of the maneuver in order of use.
    pub waypoints: Vec<Vec2>,
    clear_since: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    id: usize,
    kind: EncounterKind,
    since: f64,
    heading: Angle,
}

/// Head-on maneuver: a guiding waypoint `α_h1` to starboard.
pub fn plan_head_on(ism0: &VesselState, params: &VesselParams) -> Result<Waypoint> {
    make_guiding(ism0.position(), ism0.phi - params.alpha_h1, params)
}

/// Crossing turn target `W_c1`: at least `α_c1` to starboard, or straight at
/// the obstacle when it already lies further to starboard.
pub fn crossing_first_waypoint(ism0: &VesselState, obs0: &VesselState, params: &VesselParams) -> Vec2 {
    let turned = ism0.phi - params.alpha_c1;
    let beta = match vec2rad(obs0.position(), ism0.position()) {
        Ok(bearing) if bearing.diff(ism0.phi) < -params.alpha_c1 => bearing,
        _ => turned,
    };
    ism0.position() + rad2vec(beta) * params.d_c1
}

/// Crossing plan `[W_c1, W_c2]`.
pub fn plan_crossing(
    ism0: &VesselState,
    obs0: &VesselState,
    params: &VesselParams,
) -> Result<[Waypoint; 2]> {
    let w1 = crossing_first_waypoint(ism0, obs0, params);
    let w2 = make_guiding(w1, ism0.phi - FRAC_PI_2, params)?;
    Ok([Waypoint::normal(w1), w2])
}

/// Overtaking side: `-1` for starboard, `+1` for port.
pub fn overtake_side(ism0: &VesselState, obs0: &VesselState) -> f64 {
    if obs0.phi.diff(ism0.phi) >= 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Overtaking target `W_o1`: abeam of the obstacle, at least `d_o1` off its
/// track and at least `α_o1` off the own heading.
pub fn overtake_first_waypoint(ism0: &VesselState, obs0: &VesselState, params: &VesselParams) -> Vec2 {
    let s = overtake_side(ism0, obs0);
    let p_ism = ism0.position();
    let lateral = obs0.phi + s * FRAC_PI_2;
    let min_turn = ism0.phi + s * params.alpha_o1;
    let p_o = obs0.position() + rad2vec(lateral) * params.d_o1;
    if let Ok(b) = vec2rad(p_o, p_ism) {
        if s * b.diff(ism0.phi) >= params.alpha_o1 {
            return p_o;
        }
    }
    let g1 = Line2::new(p_ism, min_turn);
    let g2 = Line2::new(obs0.position(), lateral);
    let x = intersect(&g2, &g1);
    let ahead = (x - p_ism).dot(rad2vec(min_turn)) > 0.0;
    let offset = (x - obs0.position()).dot(rad2vec(lateral));
    let parallel = (rad2vec(min_turn).cross(rad2vec(lateral))).abs() < crate::geometry::PARALLEL_TOLERANCE;
    if parallel || !ahead || offset < params.d_o1 * (1.0 - 1e-9) {
        return p_ism + rad2vec(min_turn) * params.d_o1;
    }
    x
}

/// Overtaking plan `[W_o1, W_o2]`.
pub fn plan_overtake(
    ism0: &VesselState,
    obs0: &VesselState,
    params: &VesselParams,
) -> Result<[Waypoint; 2]> {
    let w1 = overtake_first_waypoint(ism0, obs0, params);
    let w2 = make_guiding(w1, ism0.phi, params)?;
    Ok([Waypoint::normal(w1), w2])
}

/// Per-vessel encounter phase machine and waypoint plan.
#[derive(Debug, Clone)]
pub struct WaypointEngine {
    pub params: VesselParams,
    pub plan: WaypointPlan,
    encounter: Option<Encounter>,
    pending: Vec<Pending>,
    headings: VecDeque<Angle>,
    last_position: Option<Vec2>,
    dt: f64,
}

impl WaypointEngine {
    pub fn new(params: VesselParams, plan: WaypointPlan, dt: f64) -> Self {
        WaypointEngine {
            params,
            plan,
            encounter: None,
            pending: Vec::new(),
            headings: VecDeque::new(),
            last_position: None,
            dt,
        }
    }

    pub fn encounter(&self) -> Option<&Encounter> {
        self.encounter.as_ref()
    }

    pub fn encounter_kind(&self) -> EncounterKind {
        self.encounter
            .as_ref()
            .map_or(EncounterKind::None, |e| e.kind)
    }

    /// Advances the engine by one time step at time `t`. `others` is a
    /// snapshot of every other vessel taken at the start of the step.
    pub fn update(&mut self, t: f64, own: &VesselState, others: &[Neighbor]) -> Result<()> {
        self.record(own);
        let consumed = self.plan.consume(own.position(), &self.params);

        let Some(mut enc) = self.encounter.take() else {
            return self.detect(t, own, others);
        };
        let Some(obs) = others.iter().find(|n| n.id == enc.obstacle) else {
            log::debug!("obstacle {} left the scene, resuming", enc.obstacle);
            self.finish(own.position());
            return Ok(());
        };
        let me = Participant::new(*own, &self.params);
        let done = match enc.kind {
            EncounterKind::StandOn => {
                if predicates::keep(&me, &obs.participant, &self.params.predicates) {
                    enc.clear_since = None;
                    false
                } else {
                    let since = *enc.clear_since.get_or_insert(t);
                    t - since >= self.params.t_react - 1e-9
                }
            }
            EncounterKind::HeadOnGiveWay => self.advance_head_on(&mut enc, own, &me, obs)?,
            EncounterKind::CrossingGiveWay => self.advance_crossing(&mut enc, own, obs, consumed)?,
            EncounterKind::OvertakeGiveWay => self.advance_overtake(&mut enc, own, obs, consumed),
            EncounterKind::None => true,
        };
        if done {
            log::debug!("{} encounter with vessel {} finished at t={t}", enc.kind, enc.obstacle);
            self.finish(own.position());
            self.plan.consume(own.position(), &self.params);
        } else {
            self.encounter = Some(enc);
        }
        Ok(())
    }

    fn record(&mut self, own: &VesselState) {
        let p = own.position();
        if let (Some(prev), Some(enc)) = (self.last_position, self.encounter.as_mut()) {
            enc.travelled += p.distance(prev);
        }
        self.last_position = Some(p);
        let window = (self.params.t_so / self.dt).ceil() as usize + 1;
        self.headings.push_back(own.phi);
        while self.headings.len() > window {
            self.headings.pop_front();
        }
    }

    fn stable(&self, enc: &Encounter) -> bool {
        let headings: Vec<Angle> = self.headings.iter().copied().collect();
        stable_orientation(&headings, enc.stable_from, enc.stable_to, &self.params, self.dt)
    }

    fn finish(&mut self, at: Vec2) {
        self.encounter = None;
        self.pending.clear();
        self.plan.resume(at);
    }

    fn detect(&mut self, t: f64, own: &VesselState, others: &[Neighbor]) -> Result<()> {
        let me = Participant::new(*own, &self.params);
        let mut pending = Vec::with_capacity(self.pending.len());
        for n in others {
            let kind = classify(&me, &n.participant, &self.params.predicates)?;
            if kind == EncounterKind::None {
                continue;
            }
            let prev = self
                .pending
                .iter()
                .find(|p| p.id == n.id && p.kind == kind)
                .copied();
            pending.push(prev.unwrap_or(Pending {
                id: n.id,
                kind,
                since: t,
                heading: own.phi,
            }));
        }
        self.pending = pending;

        let ready = self
            .pending
            .iter()
            .filter(|p| t - p.since >= self.params.t_react - 1e-9)
            .min_by(|a, b| a.since.total_cmp(&b.since))
            .copied();
        let Some(lock) = ready else {
            return Ok(());
        };
        let obs = others
            .iter()
            .find(|n| n.id == lock.id)
            .expect("pending entries refer to present vessels");
        self.start(t, own, &obs.participant.state, lock)
    }

    fn start(&mut self, t: f64, own: &VesselState, obs0: &VesselState, lock: Pending) -> Result<()> {
        let p = own.position();
        let mut enc = Encounter {
            kind: lock.kind,
            obstacle: lock.id,
            phase: 1,
            start_time: t,
            ism0: *own,
            obs0: *obs0,
            travelled: 0.0,
            stable_from: p,
            stable_to: p,
            waypoints: Vec::new(),
            clear_since: None,
        };
        match lock.kind {
            EncounterKind::StandOn => {
                let w = make_guiding(p, lock.heading, &self.params)?;
                enc.waypoints.push(w.position);
                self.plan.replace(p, vec![w]);
                self.plan.hold_speed = Some(own.v);
            }
            EncounterKind::HeadOnGiveWay => {
                let w = plan_head_on(own, &self.params)?;
                enc.waypoints.push(w.position);
                self.plan.replace(p, vec![w]);
            }
            EncounterKind::CrossingGiveWay => {
                let ws = plan_crossing(own, obs0, &self.params)?;
                enc.waypoints.extend(ws.iter().map(|w| w.position));
                enc.stable_from = ws[0].position;
                enc.stable_to = ws[1].position;
                self.plan.replace(p, ws.to_vec());
            }
            EncounterKind::OvertakeGiveWay => {
                let ws = plan_overtake(own, obs0, &self.params)?;
                enc.waypoints.extend(ws.iter().map(|w| w.position));
                enc.stable_from = ws[0].position;
                enc.stable_to = ws[1].position;
                self.plan.replace(p, ws.to_vec());
            }
            EncounterKind::None => return Ok(()),
        }
        log::debug!("{} encounter with vessel {} started at t={t}", lock.kind, lock.id);
        self.pending.clear();
        self.encounter = Some(enc);
        Ok(())
    }

    fn advance_head_on(
        &mut self,
        enc: &mut Encounter,
        own: &VesselState,
        me: &Participant,
        obs: &Neighbor,
    ) -> Result<bool> {
        let p = &self.params;
        if enc.phase == 1 {
            let clear = !predicates::collision_possible(me, &obs.participant, p.predicates.t_horizon);
            if clear && enc.travelled >= p.d_h1 {
                let dir = vec2rad(enc.obs0.position(), enc.ism0.position())?;
                let w = make_guiding(own.position(), dir, p)?;
                enc.phase = 2;
                enc.stable_from = own.position();
                enc.stable_to = w.position;
                enc.waypoints.push(w.position);
                self.plan.replace(own.position(), vec![w]);
            }
            return Ok(false);
        }
        Ok(obstacle_behind(own, obs.participant.state.position(), p.d_h2) && self.stable(enc))
    }

    fn advance_crossing(
        &mut self,
        enc: &mut Encounter,
        own: &VesselState,
        obs: &Neighbor,
        consumed: usize,
    ) -> Result<bool> {
        let p = &self.params;
        if enc.phase == 1 {
            if consumed > 0 {
                enc.phase = 2;
            } else {
                return Ok(false);
            }
        }
        let behind = |d| obstacle_behind(own, obs.participant.state.position(), d);
        if enc.phase == 2 {
            if behind(p.d_c2) && self.stable(enc) {
                let w = make_guiding(own.position(), enc.ism0.phi, p)?;
                enc.phase = 3;
                enc.stable_from = own.position();
                enc.stable_to = w.position;
                enc.waypoints.push(w.position);
                self.plan.replace(own.position(), vec![w]);
            }
            return Ok(false);
        }
        Ok(behind(p.d_c3) && self.stable(enc))
    }

    fn advance_overtake(
        &mut self,
        enc: &mut Encounter,
        own: &VesselState,
        obs: &Neighbor,
        consumed: usize,
    ) -> bool {
        if enc.phase == 1 {
            if consumed == 0 {
                return false;
            }
            enc.phase = 2;
        }
        obstacle_behind(own, obs.participant.state.position(), self.params.d_o2) && self.stable(enc)
    }
}

/// Initial heading change the maneuver asks for: the signed angle between the
/// own heading and the direction to the first active waypoint.
pub fn commanded_turn(own: &VesselState, plan: &WaypointPlan) -> Option<f64> {
    let w = plan.next_waypoint()?;
    let dir = vec2rad(w.position, own.position()).ok()?;
    Some(wrap(dir.rad() - own.phi.rad()))
}
