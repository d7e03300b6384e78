//! Closed-loop environment: every step each active vessel updates its
//! waypoints and solves its MPC on a shared snapshot, then all vessels advance
//! together.

pub mod collision;

use std::time::Instant;

use crate::dynamics::{self, ControlInput, VesselParams, VesselState};
use crate::error::{Error, Result};
use crate::geometry::{Angle, Vec2};
use crate::mpc::MpcController;
use crate::predicates::{EncounterKind, Participant};
use crate::waypoint::{Neighbor, WaypointEngine, WaypointPlan};

pub use collision::check_collision;

/// A vessel steered by the waypoint engine and the MPC.
#[derive(Debug, Clone, PartialEq)]
pub struct IsmVessel {
    pub name: String,
    pub params: VesselParams,
    pub initial: VesselState,
    pub goals: Vec<Vec2>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedState {
    pub t: f64,
    pub state: VesselState,
}

/// A non-reactive vessel replaying a recorded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleVessel {
    pub name: String,
    pub params: VesselParams,
    pub trajectory: Vec<TimedState>,
}

impl ObstacleVessel {
    /// State at time `t`, interpolated linearly between samples. Before the
    /// first sample the vessel sits at its first state; after the last one it
    /// is parked there with zero speed.
    pub fn state_at(&self, t: f64) -> VesselState {
        let tr = &self.trajectory;
        let first = tr[0];
        if t <= first.t {
            return first.state;
        }
        let last = tr[tr.len() - 1];
        if t > last.t {
            return VesselState { v: 0.0, ..last.state };
        }
        let i = tr.partition_point(|s| s.t < t);
        let hi = tr[i];
        if hi.t == t {
            return hi.state;
        }
        let lo = tr[i - 1];
        let f = (t - lo.t) / (hi.t - lo.t);
        let (a, b) = (lo.state, hi.state);
        VesselState {
            x: a.x + f * (b.x - a.x),
            y: a.y + f * (b.y - a.y),
            phi: Angle::new(a.phi.rad() + f * b.phi.diff(a.phi)),
            v: a.v + f * (b.v - a.v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub dt: f64,
    pub max_steps: usize,
    pub seed: u64,
    pub vessels: Vec<IsmVessel>,
    pub obstacles: Vec<ObstacleVessel>,
    /// Inflation of every footprint side for collision checks.
    pub collision_margin: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        if self.vessels.is_empty() {
            return bad("a scenario needs at least one ISM vessel".into());
        }
        if self.collision_margin < 0.0 {
            return bad("collision_margin must be non-negative".into());
        }
        let mut names = std::collections::HashSet::new();
        for v in &self.vessels {
            if !names.insert(v.name.as_str()) {
                return bad(format!("duplicate vessel id {:?}", v.name));
            }
            v.params
                .validate()
                .map_err(|e| Error::Validation(format!("vessel {:?}: {e}", v.name)))?;
            if v.goals.is_empty() {
                return bad(format!("vessel {:?} has no goals", v.name));
            }
            if !v.initial.is_finite() || v.goals.iter().any(|g| !g.is_finite()) {
                return bad(format!("vessel {:?} has non-finite coordinates", v.name));
            }
            if v.initial.v < 0.0 || v.initial.v > v.params.v_max {
                return bad(format!("vessel {:?} starts outside [0, v_max]", v.name));
            }
        }
        for o in &self.obstacles {
            if !names.insert(o.name.as_str()) {
                return bad(format!("duplicate vessel id {:?}", o.name));
            }
            if o.trajectory.is_empty() {
                return bad(format!("obstacle {:?} has an empty trajectory", o.name));
            }
            if o.trajectory.windows(2).any(|w| w[1].t <= w[0].t) {
                return bad(format!("obstacle {:?} timestamps must increase", o.name));
            }
            if o.trajectory.iter().any(|s| !s.state.is_finite() || !s.t.is_finite()) {
                return bad(format!("obstacle {:?} has non-finite samples", o.name));
            }
        }
        let initial = self.initial_footprints();
        for i in 0..initial.len() {
            for j in (i + 1)..initial.len() {
                let ((a, pa), (b, pb)) = (initial[i], initial[j]);
                if check_collision(&a, pa, &b, pb, self.collision_margin) {
                    return bad(format!("vessels {i} and {j} overlap at t=0"));
                }
            }
        }
        Ok(())
    }

    fn initial_footprints(&self) -> Vec<(VesselState, &VesselParams)> {
        self.vessels
            .iter()
            .map(|v| (v.initial, &v.params))
            .chain(self.obstacles.iter().map(|o| (o.state_at(0.0), &o.params)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: VesselState,
    /// Input applied from `t` to `t + dt`; zero for obstacles.
    pub input: ControlInput,
    pub encounter: EncounterKind,
    pub next_waypoint: Option<Vec2>,
    /// Desired position `p^d_0` the MPC tracked at this step.
    pub reference: Option<Vec2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    GoalReached,
    Collision,
    Timeout,
    /// Obstacles simply stop being recorded.
    Replay,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::GoalReached => "goal_reached",
            Termination::Collision => "collision",
            Termination::Timeout => "timeout",
            Termination::Replay => "replay",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub name: String,
    pub is_obstacle: bool,
    pub params: VesselParams,
    pub samples: Vec<Sample>,
    pub termination: Termination,
}

/// Snapshot of a vessel's waypoint plan, recorded whenever it changes.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanSnapshot {
    pub t: f64,
    pub vessel: usize,
    pub waypoints: Vec<crate::waypoint::Waypoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// ISM vessels first, then obstacles, in scenario order.
    pub tracks: Vec<Track>,
    pub plans: Vec<PlanSnapshot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepTiming {
    pub total: f64,
    pub mpc: f64,
    pub waypoint: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub goal_reached: Vec<bool>,
    pub collision: bool,
    /// Track indices of the first colliding pair.
    pub collision_pair: Option<(usize, usize)>,
    pub steps: usize,
    pub timings: Vec<StepTiming>,
}

impl RunResult {
    pub fn all_goals_reached(&self) -> bool {
        self.goal_reached.iter().all(|g| *g)
    }
}

struct Active {
    engine: WaypointEngine,
    mpc: MpcController,
    state: VesselState,
    input: ControlInput,
    done: bool,
}

/// Step-by-step simulation of one scenario.
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    vessels: Vec<Active>,
    tracks: Vec<Track>,
    plans: Vec<PlanSnapshot>,
    timings: Vec<StepTiming>,
    step: usize,
    collision: Option<(usize, usize)>,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        scenario.validate()?;
        let mut vessels = Vec::with_capacity(scenario.vessels.len());
        let mut plans = Vec::new();
        for (i, v) in scenario.vessels.iter().enumerate() {
            let plan = WaypointPlan::new(v.initial.position(), v.goals.clone())?;
            plans.push(PlanSnapshot {
                t: 0.0,
                vessel: i,
                waypoints: plan.active.clone(),
            });
            vessels.push(Active {
                engine: WaypointEngine::new(v.params.clone(), plan, scenario.dt),
                mpc: MpcController::new(v.params.clone(), scenario.dt),
                state: v.initial,
                input: ControlInput::ZERO,
                done: false,
            });
        }
        let mut tracks: Vec<Track> = scenario
            .vessels
            .iter()
            .map(|v| Track {
                name: v.name.clone(),
                is_obstacle: false,
                params: v.params.clone(),
                samples: Vec::new(),
                termination: Termination::Timeout,
            })
            .collect();
        for o in &scenario.obstacles {
            tracks.push(Track {
                name: o.name.clone(),
                is_obstacle: true,
                params: o.params.clone(),
                samples: vec![obstacle_sample(0.0, o.state_at(0.0))],
                termination: Termination::Replay,
            });
        }
        Ok(Simulation {
            scenario,
            vessels,
            tracks,
            plans,
            timings: Vec::new(),
            step: 0,
            collision: None,
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.scenario.dt
    }

    pub fn is_running(&self) -> bool {
        self.collision.is_none()
            && self.step < self.scenario.max_steps
            && self.vessels.iter().any(|v| !v.done)
    }

    pub fn state(&self, vessel: usize) -> VesselState {
        self.vessels[vessel].state
    }

    pub fn engine(&self, vessel: usize) -> &WaypointEngine {
        &self.vessels[vessel].engine
    }

    /// Advances one time step. Returns whether the run continues.
    pub fn step(&mut self) -> Result<bool> {
        if !self.is_running() {
            return Ok(false);
        }
        let started = Instant::now();
        let sc = self.scenario;
        let t = self.time();
        let n_ism = self.vessels.len();

        let mut snapshot: Vec<Neighbor> = Vec::with_capacity(n_ism + sc.obstacles.len());
        for (i, v) in self.vessels.iter().enumerate() {
            if !v.done {
                snapshot.push(Neighbor {
                    id: i,
                    participant: Participant::new(v.state, &sc.vessels[i].params),
                });
            }
        }
        for (j, o) in sc.obstacles.iter().enumerate() {
            snapshot.push(Neighbor {
                id: n_ism + j,
                participant: Participant::new(o.state_at(t), &o.params),
            });
        }

        let mut timing = StepTiming::default();
        let mut others = Vec::with_capacity(snapshot.len());
        for i in 0..n_ism {
            if self.vessels[i].done {
                continue;
            }
            others.clear();
            others.extend(snapshot.iter().filter(|n| n.id != i).copied());
            let v = &mut self.vessels[i];
            let before = v.engine.plan.active.clone();

            let t0 = Instant::now();
            v.engine.update(t, &v.state, &others)?;
            timing.waypoint += t0.elapsed().as_secs_f64();

            if v.engine.plan.active != before {
                self.plans.push(PlanSnapshot {
                    t,
                    vessel: i,
                    waypoints: v.engine.plan.active.clone(),
                });
            }

            let t1 = Instant::now();
            let out = v.mpc.step(&v.state, &v.input, &v.engine.plan);
            timing.mpc += t1.elapsed().as_secs_f64();

            v.input = out.input;
            self.tracks[i].samples.push(Sample {
                t,
                state: v.state,
                input: out.input,
                encounter: v.engine.encounter_kind(),
                next_waypoint: v.engine.plan.next_waypoint().map(|w| w.position),
                reference: out.reference.positions.first().copied(),
            });
        }

        for (i, v) in self.vessels.iter_mut().enumerate() {
            if !v.done {
                v.state = dynamics::step(&v.state, &v.input, sc.dt, sc.vessels[i].params.v_max);
            }
        }
        self.step += 1;
        let t_next = self.time();
        for (j, o) in sc.obstacles.iter().enumerate() {
            self.tracks[n_ism + j].samples.push(obstacle_sample(t_next, o.state_at(t_next)));
        }

        self.check_collisions(t_next);
        if self.collision.is_none() {
            self.check_goals();
        }
        timing.total = started.elapsed().as_secs_f64();
        self.timings.push(timing);
        Ok(self.is_running())
    }

    fn check_collisions(&mut self, t: f64) {
        let sc = self.scenario;
        let n_ism = self.vessels.len();
        let mut bodies: Vec<(usize, VesselState, &VesselParams)> = Vec::new();
        for (i, v) in self.vessels.iter().enumerate() {
            if !v.done {
                bodies.push((i, v.state, &sc.vessels[i].params));
            }
        }
        for (j, o) in sc.obstacles.iter().enumerate() {
            bodies.push((n_ism + j, o.state_at(t), &o.params));
        }
        for a in 0..bodies.len() {
            for b in (a + 1)..bodies.len() {
                let ((ia, sa, pa), (ib, sb, pb)) = (bodies[a], bodies[b]);
                if ia >= n_ism && ib >= n_ism {
                    continue;
                }
                if check_collision(&sa, pa, &sb, pb, sc.collision_margin) {
                    log::info!("collision between {} and {} at t={t}", self.tracks[ia].name, self.tracks[ib].name);
                    self.collision = Some((ia, ib));
                    for i in [ia, ib] {
                        if i < n_ism {
                            self.tracks[i].termination = Termination::Collision;
                            self.push_final(i, t);
                        }
                    }
                    return;
                }
            }
        }
    }

    fn check_goals(&mut self) {
        let t = self.time();
        for i in 0..self.vessels.len() {
            let v = &mut self.vessels[i];
            if v.done {
                continue;
            }
            let plan = &mut v.engine.plan;
            let last = plan.goals.len() - 1;
            let earlier = plan.reached[..last].iter().all(|r| *r);
            if earlier && v.state.position().distance(plan.goals[last]) <= v.engine.params.d_term {
                plan.reached[last] = true;
            }
            if plan.is_finished() {
                v.done = true;
                self.tracks[i].termination = Termination::GoalReached;
                self.push_final(i, t);
            }
        }
    }

    /// Records the state a vessel ended in.
    fn push_final(&mut self, i: usize, t: f64) {
        let state = self.vessels[i].state;
        self.vessels[i].done = true;
        self.tracks[i].samples.push(Sample {
            t,
            state,
            input: ControlInput::ZERO,
            encounter: EncounterKind::None,
            next_waypoint: None,
            reference: None,
        });
    }

    pub fn finish(mut self) -> (Trajectory, RunResult) {
        let n_ism = self.vessels.len();
        for i in 0..n_ism {
            if !self.vessels[i].done {
                let t = self.time();
                self.push_final(i, t);
            }
        }
        let goal_reached = self.tracks[..n_ism]
            .iter()
            .map(|t| t.termination == Termination::GoalReached)
            .collect();
        (
            Trajectory {
                dt: self.scenario.dt,
                tracks: self.tracks,
                plans: self.plans,
            },
            RunResult {
                goal_reached,
                collision: self.collision.is_some(),
                collision_pair: self.collision,
                steps: self.step,
                timings: self.timings,
            },
        )
    }
}

fn obstacle_sample(t: f64, state: VesselState) -> Sample {
    Sample {
        t,
        state,
        input: ControlInput::ZERO,
        encounter: EncounterKind::None,
        next_waypoint: None,
        reference: None,
    }
}

/// Runs a scenario to completion.
pub fn run(scenario: &Scenario) -> Result<(Trajectory, RunResult)> {
    let mut sim = Simulation::new(scenario)?;
    while sim.step()? {}
    Ok(sim.finish())
}
