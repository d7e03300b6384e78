//! Seeded generator of critical two-vessel encounters.
//!
//! Both vessels sail straight towards a common crossing point `X` and would
//! reach it within `arrival_window` seconds of each other at their cruise
//! speeds. Every emitted scenario carries a criticality certificate: replaying
//! both vessels as non-reactive straight-liners ends in a footprint overlap or
//! a near miss.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{VesselParams, VesselState};
use crate::error::{Error, Result};
use crate::geometry::{Angle, Vec2};
use crate::predicates::{self, EncounterKind, Participant};
use crate::simulator::{check_collision, IsmVessel, ObstacleVessel, Scenario, TimedState};

const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncounterMix {
    HeadOn,
    Crossing,
    Overtake,
    Random,
}

impl EncounterMix {
    pub fn as_str(self) -> &'static str {
        match self {
            EncounterMix::HeadOn => "head_on",
            EncounterMix::Crossing => "crossing",
            EncounterMix::Overtake => "overtake",
            EncounterMix::Random => "random",
        }
    }
}

impl fmt::Display for EncounterMix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncounterMix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head_on" => Ok(EncounterMix::HeadOn),
            "crossing" => Ok(EncounterMix::Crossing),
            "overtake" => Ok(EncounterMix::Overtake),
            "random" => Ok(EncounterMix::Random),
            other => Err(Error::Config(format!("unknown encounter mix {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub count: usize,
    pub seed: u64,
    pub mix: EncounterMix,
    pub params: VesselParams,
    pub dt: f64,
    /// Initial distance between the vessels, metres.
    pub separation: (f64, f64),
    /// Relative spread of cruise speeds around `v_des`.
    pub speed_jitter: f64,
    /// Largest difference of the arrival times at the crossing point.
    pub arrival_window: f64,
    /// Distance of each goal beyond the crossing point.
    pub goal_beyond: (f64, f64),
}

impl GeneratorConfig {
    pub fn new(count: usize, seed: u64, mix: EncounterMix, params: VesselParams) -> Self {
        GeneratorConfig {
            count,
            seed,
            mix,
            params,
            dt: 1.0,
            separation: (2000.0, 6000.0),
            speed_jitter: 0.2,
            arrival_window: 60.0,
            goal_beyond: (2000.0, 5000.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.count == 0 {
            return bad("count must be at least 1");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        let (s0, s1) = self.separation;
        let (g0, g1) = self.goal_beyond;
        if !(s0 > 0.0 && s1 >= s0 && g0 > 0.0 && g1 >= g0 && s1.is_finite() && g1.is_finite()) {
            return bad("separation and goal ranges must be positive and ordered");
        }
        if !(0.0..1.0).contains(&self.speed_jitter) {
            return bad("speed_jitter must lie in [0, 1)");
        }
        if !(self.arrival_window >= 0.0) {
            return bad("arrival_window must be non-negative");
        }
        self.params.validate()
    }
}

/// Outcome of the straight-line replay of a generated scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub min_distance: f64,
    pub overlap: bool,
    pub threshold: f64,
    /// First give-way classification seen by each vessel.
    pub roles: [EncounterKind; 2],
}

impl Certificate {
    pub fn critical(&self) -> bool {
        self.overlap || self.min_distance < self.threshold
    }
}

/// Replays the first two vessels of `s` at constant velocity towards their
/// final goals.
pub fn certificate(s: &Scenario) -> Certificate {
    let [a, b] = [&s.vessels[0], &s.vessels[1]];
    let threshold = 3.0 * (a.params.length + a.params.width).max(b.params.length + b.params.width) / 4.0;
    let pp = &a.params.predicates;
    let mut cert = Certificate {
        min_distance: f64::INFINITY,
        overlap: false,
        threshold,
        roles: [EncounterKind::None; 2],
    };
    for k in 0..=s.max_steps {
        let t = k as f64 * s.dt;
        let sa = straight_state(a, t);
        let sb = straight_state(b, t);
        cert.min_distance = cert.min_distance.min(sa.position().distance(sb.position()));
        cert.overlap |= check_collision(&sa, &a.params, &sb, &b.params, 0.0);
        let pa = Participant::new(sa, &a.params);
        let pb = Participant::new(sb, &b.params);
        for (i, (l, m)) in [(pa, pb), (pb, pa)].into_iter().enumerate() {
            if cert.roles[i] == EncounterKind::None {
                cert.roles[i] = predicates::classify(&l, &m, pp).unwrap_or(EncounterKind::None);
            }
        }
    }
    cert
}

fn straight_heading(v: &IsmVessel) -> Angle {
    let goal = *v.goals.last().expect("vessels have goals");
    crate::geometry::vec2rad(goal, v.initial.position()).unwrap_or(v.initial.phi)
}

fn straight_state(v: &IsmVessel, t: f64) -> VesselState {
    let start = v.initial.position();
    let total = start.distance(*v.goals.last().expect("vessels have goals"));
    let d = v.initial.v * t;
    let phi = straight_heading(v);
    let p = start + phi.unit() * d.min(total);
    VesselState {
        x: p.x,
        y: p.y,
        phi,
        v: if d < total { v.initial.v } else { 0.0 },
    }
}

/// Replaces vessel `index` by a non-reactive obstacle sailing straight to its
/// final goal at its initial speed.
pub fn into_mixed(s: &Scenario, index: usize) -> Scenario {
    let mut out = s.clone();
    let v = out.vessels.remove(index);
    let goal = *v.goals.last().expect("vessels have goals");
    let start = v.initial.position();
    let heading = straight_heading(&v);
    let total = start.distance(goal);
    let duration = if v.initial.v > 0.0 { total / v.initial.v } else { 0.0 };
    let n = (duration / s.dt).floor() as usize;
    let mut trajectory: Vec<TimedState> = (0..=n)
        .map(|k| {
            let t = k as f64 * s.dt;
            let p = start + heading.unit() * (v.initial.v * t);
            TimedState {
                t,
                state: VesselState {
                    x: p.x,
                    y: p.y,
                    phi: heading,
                    v: v.initial.v,
                },
            }
        })
        .collect();
    if duration > n as f64 * s.dt {
        trajectory.push(TimedState {
            t: duration,
            state: VesselState {
                x: goal.x,
                y: goal.y,
                phi: heading,
                v: v.initial.v,
            },
        });
    }
    out.obstacles.insert(
        0,
        ObstacleVessel {
            name: v.name,
            params: v.params,
            trajectory,
        },
    );
    out
}

/// An ISM vessel standing on while a non-reactive vessel approaches from port
/// on an exact collision course.
pub fn adversarial_crossing(params: &VesselParams) -> Scenario {
    let v = params.v_des;
    let t_meet = 600.0;
    let own = IsmVessel {
        name: "own".into(),
        params: params.clone(),
        initial: VesselState::new(-v * t_meet, 0.0, 0.0, v),
        goals: vec![Vec2::new(4000.0, 0.0)],
    };
    let other = IsmVessel {
        name: "intruder".into(),
        params: params.clone(),
        initial: VesselState::new(0.0, v * t_meet, -PI / 2.0, v),
        goals: vec![Vec2::new(0.0, -4000.0)],
    };
    let s = Scenario {
        dt: 1.0,
        max_steps: 3000,
        seed: 0,
        vessels: vec![own, other],
        obstacles: vec![],
        collision_margin: 0.0,
    };
    into_mixed(&s, 1)
}

/// Generates `cfg.count` critical scenarios; scenario `i` depends only on the
/// seed and `i`.
pub fn generate_critical(cfg: &GeneratorConfig) -> Result<Vec<Scenario>> {
    cfg.validate()?;
    (0..cfg.count).map(|i| generate_one(cfg, i)).collect()
}

fn generate_one(cfg: &GeneratorConfig, index: usize) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let kind = match cfg.mix {
        EncounterMix::Random => [EncounterMix::HeadOn, EncounterMix::Crossing, EncounterMix::Overtake][rng.gen_range(0..3)],
        m => m,
    };
    for _ in 0..MAX_ATTEMPTS {
        let Some(s) = sample(cfg, kind, &mut rng, index) else { continue };
        let cert = certificate(&s);
        if cert.critical() && roles_match(kind, cert.roles) {
            return Ok(s);
        }
    }
    Err(Error::Config(format!(
        "no critical {kind} scenario found within {MAX_ATTEMPTS} attempts; widen the ranges"
    )))
}

fn roles_match(kind: EncounterMix, roles: [EncounterKind; 2]) -> bool {
    use EncounterKind::*;
    let mut r = roles;
    r.sort_by_key(|k| k.as_str());
    match kind {
        EncounterMix::HeadOn => roles == [HeadOnGiveWay, HeadOnGiveWay],
        EncounterMix::Crossing => r == [CrossingGiveWay, StandOn],
        EncounterMix::Overtake => r == [OvertakeGiveWay, StandOn],
        EncounterMix::Random => false,
    }
}

fn sample(cfg: &GeneratorConfig, kind: EncounterMix, rng: &mut ChaCha8Rng, index: usize) -> Option<Scenario> {
    let p = &cfg.params;
    let delta = p.predicates.delta_head_on;
    let jitter = |rng: &mut ChaCha8Rng| {
        let f = 1.0 + cfg.speed_jitter * rng.gen_range(-1.0..=1.0);
        (p.v_des * f).min(p.v_max)
    };
    let (v_a, v_b, theta) = match kind {
        EncounterMix::HeadOn => (jitter(rng), jitter(rng), PI + 0.8 * delta * rng.gen_range(-1.0..=1.0)),
        EncounterMix::Crossing => (jitter(rng), jitter(rng), rng.gen_range(delta + 0.2..PI - delta - 0.2)),
        EncounterMix::Overtake => {
            let v_a = jitter(rng);
            (v_a, v_a * rng.gen_range(0.5..0.8), rng.gen_range(-0.35..0.35))
        }
        EncounterMix::Random => unreachable!(),
    };
    let phi_a = rng.gen_range(-PI..PI);
    let phi_b = Angle::new(phi_a + theta);
    let phi_a = Angle::new(phi_a);
    let x = Vec2::new(rng.gen_range(-1e4..1e4), rng.gen_range(-1e4..1e4));
    let t_a = rng.gen_range(60.0..3000.0);
    let t_b = t_a + cfg.arrival_window * rng.gen_range(-1.0..=1.0);
    if t_b <= 0.0 {
        return None;
    }
    let a0 = x - phi_a.unit() * (v_a * t_a);
    let b0 = x - phi_b.unit() * (v_b * t_b);
    let sep = a0.distance(b0);
    if sep < cfg.separation.0 || sep > cfg.separation.1 {
        return None;
    }
    let (g0, g1) = cfg.goal_beyond;
    let ga = x + phi_a.unit() * rng.gen_range(g0..=g1);
    let gb = x + phi_b.unit() * rng.gen_range(g0..=g1);
    let vessel = |name: &str, v: f64, start: Vec2, phi: Angle, goal: Vec2| IsmVessel {
        name: name.into(),
        params: p.with_desired_speed(v),
        initial: VesselState {
            x: start.x,
            y: start.y,
            phi,
            v,
        },
        goals: vec![goal],
    };
    let mut vessels = vec![vessel("a", v_a, a0, phi_a, ga), vessel("b", v_b, b0, phi_b, gb)];
    // Either vessel may end up first, so role and list position are independent.
    if kind != EncounterMix::HeadOn && rng.gen_bool(0.5) {
        vessels.swap(0, 1);
        vessels[0].name = "a".into();
        vessels[1].name = "b".into();
    }
    let longest = vessels
        .iter()
        .map(|v| v.initial.position().distance(v.goals[0]) / v.initial.v)
        .fold(0.0, f64::max);
    let s = Scenario {
        dt: cfg.dt,
        max_steps: ((3.0 * longest + 600.0) / cfg.dt).ceil() as usize,
        seed: cfg.seed ^ (index as u64).rotate_left(32),
        vessels,
        obstacles: vec![],
        collision_margin: 0.0,
    };
    s.validate().ok().map(|_| s)
}
