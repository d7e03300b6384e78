//! Offline rule-compliance monitor and tracking statistics.
//!
//! Give-way rules (R3 crossing, R4 head-on, R5 overtaking) are checked as
//! response obligations: once the encounter predicate has held for the
//! reaction time, the vessel must within `t_maneuver` either clear the
//! predicate or turn noticeably in the required direction. The stand-on rule
//! (R6) requires course and speed to stay put while `keep` holds, once it has
//! held for the reaction time.

use serde::{Deserialize, Serialize};

use crate::predicates::{self, Participant, PredicateParams};
use crate::simulator::{Sample, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    R3,
    R4,
    R5,
    R6,
}

impl Rule {
    pub const ALL: [Rule; 4] = [Rule::R3, Rule::R4, Rule::R5, Rule::R6];

    fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::R3 => "R3",
            Rule::R4 => "R4",
            Rule::R5 => "R5",
            Rule::R6 => "R6",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleParams {
    pub t_maneuver: f64,
    pub t_react: f64,
    /// Minimum starboard course change for the crossing and head-on rules.
    pub delta_turn: f64,
    /// Minimum course change, either side, when overtaking.
    pub delta_overtake: f64,
    /// Largest course change a stand-on vessel may make.
    pub course_keep: f64,
    /// Largest relative speed change a stand-on vessel may make.
    pub speed_keep: f64,
    pub predicates: PredicateParams,
}

impl Default for RuleParams {
    fn default() -> Self {
        RuleParams {
            t_maneuver: 90.0,
            t_react: 30.0,
            delta_turn: 0.15,
            delta_overtake: 0.261,
            course_keep: 0.05,
            speed_keep: 0.05,
            predicates: PredicateParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub episodes: usize,
    pub violations: usize,
}

impl RuleOutcome {
    pub fn compliant(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCompliance {
    /// Track index of the monitored vessel.
    pub vessel: usize,
    pub other: usize,
    pub rules: [RuleOutcome; 4],
}

/// Pooled mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunningStats {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, o: &RunningStats) {
        self.count += o.count;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn std(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let m = self.mean();
        (self.sum_sq / self.count as f64 - m * m).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackingStats {
    /// `‖p − p^d_0‖` per step.
    pub deviation: RunningStats,
    pub accel: RunningStats,
    pub omega: RunningStats,
}

impl TrackingStats {
    pub fn merge(&mut self, o: &TrackingStats) {
        self.deviation.merge(&o.deviation);
        self.accel.merge(&o.accel);
        self.omega.merge(&o.omega);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub pairs: Vec<PairCompliance>,
    pub tracking: TrackingStats,
}

impl ComplianceReport {
    pub fn outcome(&self, rule: Rule) -> RuleOutcome {
        self.pairs.iter().fold(RuleOutcome::default(), |acc, p| {
            let r = p.rules[rule.index()];
            RuleOutcome {
                episodes: acc.episodes + r.episodes,
                violations: acc.violations + r.violations,
            }
        })
    }

    pub fn compliant(&self, rule: Rule) -> bool {
        self.outcome(rule).compliant()
    }

    pub fn conjunction(&self) -> bool {
        Rule::ALL.iter().all(|r| self.compliant(*r))
    }
}

/// Per-step deviation and input magnitudes of the controlled vessels.
pub fn tracking_stats(traj: &Trajectory) -> TrackingStats {
    let mut s = TrackingStats::default();
    for track in traj.tracks.iter().filter(|t| !t.is_obstacle) {
        for sample in &track.samples {
            if let Some(r) = sample.reference {
                s.deviation.push(r.distance(sample.state.position()));
                s.accel.push(sample.input.a.abs());
                s.omega.push(sample.input.omega.abs());
            }
        }
    }
    s
}

/// Samples of a track indexed by step; `None` where the vessel was absent.
fn by_step<'a>(samples: &'a [Sample], dt: f64, steps: usize) -> Vec<Option<&'a Sample>> {
    let mut out = vec![None; steps];
    for s in samples {
        let k = (s.t / dt).round();
        if k >= 0.0 && (k as usize) < steps {
            out[k as usize] = Some(s);
        }
    }
    out
}

/// Checks every controlled vessel against every other vessel.
pub fn check_rules(traj: &Trajectory, params: &RuleParams) -> ComplianceReport {
    let dt = traj.dt;
    let steps = traj
        .tracks
        .iter()
        .flat_map(|t| t.samples.last())
        .map(|s| (s.t / dt).round() as usize + 1)
        .max()
        .unwrap_or(0);
    let aligned: Vec<Vec<Option<&Sample>>> = traj.tracks.iter().map(|t| by_step(&t.samples, dt, steps)).collect();
    let mut pairs = Vec::new();
    for (l, track) in traj.tracks.iter().enumerate() {
        if track.is_obstacle {
            continue;
        }
        for (m, other) in traj.tracks.iter().enumerate() {
            if m == l {
                continue;
            }
            let series: Vec<Option<(Participant, Participant)>> = (0..steps)
                .map(|k| {
                    let a = aligned[l][k]?;
                    let b = aligned[m][k]?;
                    Some((
                        Participant::new(a.state, &track.params),
                        Participant::new(b.state, &other.params),
                    ))
                })
                .collect();
            pairs.push(PairCompliance {
                vessel: l,
                other: m,
                rules: check_pair(&series, dt, params),
            });
        }
    }
    ComplianceReport {
        pairs,
        tracking: tracking_stats(traj),
    }
}

fn check_pair(series: &[Option<(Participant, Participant)>], dt: f64, params: &RuleParams) -> [RuleOutcome; 4] {
    let p = &params.predicates;
    let flags: Vec<Option<predicates::EncounterFlags>> = series
        .iter()
        .map(|s| s.map(|(l, m)| predicates::flags(&l, &m, p)))
        .collect();
    let holds = |get: fn(&predicates::EncounterFlags) -> bool| -> Vec<bool> {
        flags.iter().map(|f| f.as_ref().is_some_and(get)).collect()
    };
    let heading = |k: usize| series[k].map(|(l, _)| l.state.phi);
    let n_react = (params.t_react / dt).round() as usize;
    let n_maneuver = (params.t_maneuver / dt).round() as usize;

    let give_way = |active: Vec<bool>, turned: &dyn Fn(f64) -> bool| -> RuleOutcome {
        let mut out = RuleOutcome::default();
        for (start, end) in episodes(&active) {
            if end - start <= n_react {
                continue;
            }
            out.episodes += 1;
            let Some(phi0) = heading(start) else { continue };
            let deadline = start + n_react + n_maneuver;
            let cleared = end <= deadline;
            let turn = (start..=deadline.min(series.len() - 1))
                .filter_map(heading)
                .any(|phi| turned(phi.diff(phi0)));
            // A run that stops before the deadline cannot be judged late.
            let truncated = deadline >= series.len() || series[deadline].is_none();
            if !(cleared || turn || truncated) {
                out.violations += 1;
            }
        }
        out
    };
    let starboard = |d: f64| -d >= params.delta_turn;
    let either = |d: f64| d.abs() >= params.delta_overtake;
    let r3 = give_way(holds(|f| f.crossing), &starboard);
    let r4 = give_way(holds(|f| f.head_on), &starboard);
    let r5 = give_way(holds(|f| f.overtake), &either);

    // Standing on binds once `keep` has persisted for the reaction time, like
    // the give-way obligations; course and speed are then frozen at their
    // values at that moment.
    let mut r6 = RuleOutcome::default();
    for (start, end) in episodes(&holds(|f| f.keep && !f.head_on && !f.crossing && !f.overtake)) {
        let engaged = start + n_react;
        if end <= engaged {
            continue;
        }
        r6.episodes += 1;
        let Some((l0, _)) = series[engaged] else { continue };
        let kept = (engaged..end).filter_map(|k| series[k]).all(|(l, _)| {
            l.state.phi.diff(l0.state.phi).abs() <= params.course_keep
                && (l.state.v - l0.state.v).abs() <= params.speed_keep * l0.state.v.max(1e-9)
        });
        if !kept {
            r6.violations += 1;
        }
    }
    [r3, r4, r5, r6]
}

/// Maximal runs of `true` as half-open step ranges.
fn episodes(active: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (k, &a) in active.iter().enumerate() {
        match (a, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push((s, k));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, active.len()));
    }
    out
}
