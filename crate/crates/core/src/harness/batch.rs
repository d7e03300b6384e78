//! Parallel batch evaluation with per-run records and an aggregate summary.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compliance::{check_rules, Rule, RuleParams, RunningStats, TrackingStats};
use crate::error::{Error, Result};
use crate::harness::generator::{certificate, into_mixed};
use crate::predicates::EncounterKind;
use crate::simulator::{run, RunResult, Scenario, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficMode {
    IsmOnly,
    /// The vessel that may lawfully keep its course (the stand-on vessel, or
    /// the second one in a head-on encounter) replays a straight line without
    /// reacting.
    Mixed,
    /// The second vessel replays a straight line whatever its role, so the
    /// ISM vessel is often the stand-on vessel facing a non-yielding one.
    MixedSecond,
}

impl TrafficMode {
    pub fn prepare(self, s: &Scenario) -> Scenario {
        if s.vessels.len() < 2 {
            return s.clone();
        }
        match self {
            TrafficMode::IsmOnly => s.clone(),
            TrafficMode::Mixed => {
                let roles = certificate(s).roles;
                let index = if roles[0] == EncounterKind::StandOn { 0 } else { 1 };
                into_mixed(s, index)
            }
            TrafficMode::MixedSecond => into_mixed(s, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub goal_reached: bool,
    pub collision: bool,
    pub steps: usize,
    /// Compliance with R3, R4, R5 and R6.
    pub rules: [bool; 4],
    pub conjunction: bool,
    pub tracking: TrackingStats,
    pub wall_seconds: f64,
}

impl RunRecord {
    fn failed(id: usize, e: &Error, wall: f64) -> Self {
        RunRecord {
            id,
            error: Some(e.to_string()),
            goal_reached: false,
            collision: false,
            steps: 0,
            rules: [false; 4],
            conjunction: false,
            tracking: TrackingStats::default(),
            wall_seconds: wall,
        }
    }

    pub fn evaluate(id: usize, traj: &Trajectory, result: &RunResult, rules: &RuleParams, wall: f64) -> Self {
        let report = check_rules(traj, rules);
        RunRecord {
            id,
            error: None,
            goal_reached: result.all_goals_reached(),
            collision: result.collision,
            steps: result.steps,
            rules: Rule::ALL.map(|r| report.compliant(r)),
            conjunction: report.conjunction(),
            tracking: report.tracking,
            wall_seconds: wall,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub runs: usize,
    pub failed: usize,
    pub goal_rate: f64,
    pub collision_rate: f64,
    pub rule_rates: [f64; 4],
    pub conjunction_rate: f64,
    pub tracking: TrackingStats,
}

impl BatchSummary {
    /// Rates are taken over the runs that completed; an empty batch yields
    /// zero rates.
    pub fn from_records(records: &[RunRecord]) -> Self {
        let ok: Vec<&RunRecord> = records.iter().filter(|r| r.error.is_none()).collect();
        let n = ok.len();
        let rate = |f: &dyn Fn(&RunRecord) -> bool| {
            if n == 0 {
                0.0
            } else {
                ok.iter().filter(|r| f(r)).count() as f64 / n as f64
            }
        };
        let mut tracking = TrackingStats::default();
        for r in &ok {
            tracking.merge(&r.tracking);
        }
        BatchSummary {
            runs: records.len(),
            failed: records.len() - n,
            goal_rate: rate(&|r| r.goal_reached),
            collision_rate: rate(&|r| r.collision),
            rule_rates: [0, 1, 2, 3].map(|i| rate(&|r: &RunRecord| r.rules[i])),
            conjunction_rate: rate(&|r| r.conjunction),
            tracking,
        }
    }

    pub fn to_table(&self) -> String {
        let stat = |s: &RunningStats| format!("{:.3} ± {:.3}", s.mean(), s.std());
        let mut out = String::new();
        let mut row = |k: &str, v: String| {
            let _ = writeln!(out, "{k:<20} {v}");
        };
        row("runs", self.runs.to_string());
        row("failed", self.failed.to_string());
        row("goal reached", format!("{:.3}", self.goal_rate));
        row("collisions", format!("{:.3}", self.collision_rate));
        for (rule, rate) in Rule::ALL.iter().zip(self.rule_rates) {
            row(rule.as_str(), format!("{rate:.3}"));
        }
        row("all rules", format!("{:.3}", self.conjunction_rate));
        row("deviation [m]", stat(&self.tracking.deviation));
        row("|a| [m/s²]", stat(&self.tracking.accel));
        row("|ω| [rad/s]", stat(&self.tracking.omega));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub records: Vec<RunRecord>,
    pub summary: BatchSummary,
}

impl BatchReport {
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut lines = String::new();
        for r in &self.records {
            lines.push_str(&r.to_line());
            lines.push('\n');
        }
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
        };
        write("runs.jsonl", lines)?;
        write("summary.json", serde_json::to_string_pretty(&self.summary)?)?;
        write("summary.txt", self.summary.to_table())
    }
}

/// Simulates every scenario on a pool of `jobs` workers (all cores when
/// `None`) and maps each outcome through `f`. Results keep scenario order.
pub fn map_scenarios<T, F>(scenarios: &[Scenario], mode: TrafficMode, jobs: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, Result<(Trajectory, RunResult)>, f64) -> T + Sync,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        scenarios
            .par_iter()
            .enumerate()
            .map(|(id, s)| {
                let start = Instant::now();
                let outcome = run(&mode.prepare(s));
                if let Err(e) = &outcome {
                    log::warn!("scenario {id} failed: {e}");
                }
                f(id, outcome, start.elapsed().as_secs_f64())
            })
            .collect()
    }))
}

pub fn batch_run(scenarios: &[Scenario], mode: TrafficMode, rules: &RuleParams, jobs: Option<usize>) -> Result<BatchReport> {
    let records = map_scenarios(scenarios, mode, jobs, |id, outcome, wall| match outcome {
        Ok((traj, result)) => RunRecord::evaluate(id, &traj, &result, rules, wall),
        Err(e) => RunRecord::failed(id, &e, wall),
    })?;
    Ok(BatchReport {
        summary: BatchSummary::from_records(&records),
        records,
    })
}
