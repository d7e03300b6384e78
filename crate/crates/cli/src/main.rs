use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ism_core::compliance::{check_rules, ComplianceReport, Rule, RuleParams};
use ism_core::dynamics::VesselParams;
use ism_core::harness::batch::{batch_run, RunRecord, TrafficMode};
use ism_core::harness::export::{export_trajectory, import_trajectory};
use ism_core::harness::generator::{generate_critical, EncounterMix, GeneratorConfig};
use ism_core::harness::{profile, scenario_file};
use ism_core::simulator::run;

/// Rule-reactive vessel traffic simulator.
#[derive(Debug, Parser)]
#[command(name = "ism", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and export its trajectory and compliance report.
    Simulate {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        rules: RuleArgs,
    },
    /// Write critical two-vessel scenarios.
    Generate {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "random")]
        mix: EncounterMix,
        #[arg(long = "type", default_value = "type1")]
        vessel_type: String,
        #[arg(long, default_value = "scenarios")]
        out: PathBuf,
    },
    /// Run every scenario in a directory and aggregate the results.
    Batch {
        #[arg(long)]
        scenarios: PathBuf,
        /// Replace the stand-on vessel by a non-reactive straight-line obstacle.
        #[arg(long)]
        mixed: bool,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = "batch")]
        out: PathBuf,
        #[command(flatten)]
        rules: RuleArgs,
    },
    /// Compliance report for a recorded trajectory.
    Check {
        trajectory: PathBuf,
        /// Vessel type assumed for every track.
        #[arg(long = "type", default_value = "type1")]
        vessel_type: String,
        #[command(flatten)]
        rules: RuleArgs,
    },
    /// Per-step runtime for 1..K vessels.
    Profile {
        #[arg(long, default_value_t = 6)]
        vessels: usize,
        #[arg(long, default_value_t = 300)]
        steps: usize,
        #[arg(long = "type", default_value = "type1")]
        vessel_type: String,
    },
}

#[derive(Debug, Args)]
struct RuleArgs {
    /// Time a give-way vessel has to show its maneuver, seconds.
    #[arg(long, default_value_t = 90.0)]
    t_maneuver: f64,
    /// Minimum starboard course change, radians.
    #[arg(long, default_value_t = 0.15)]
    delta_turn: f64,
}

impl RuleArgs {
    fn params(&self) -> anyhow::Result<RuleParams> {
        if !(self.t_maneuver > 0.0 && self.delta_turn > 0.0) {
            return Err(ism_core::Error::Config("t_maneuver and delta_turn must be positive".into()).into());
        }
        Ok(RuleParams {
            t_maneuver: self.t_maneuver,
            delta_turn: self.delta_turn,
            ..RuleParams::default()
        })
    }
}

fn print_report(report: &ComplianceReport) {
    for rule in Rule::ALL {
        let o = report.outcome(rule);
        println!(
            "{:<4} {:<9} episodes {:>3}  violations {:>3}",
            rule.as_str(),
            if o.compliant() { "compliant" } else { "violated" },
            o.episodes,
            o.violations
        );
    }
    println!("all rules {}", if report.conjunction() { "compliant" } else { "violated" });
    let t = &report.tracking;
    println!("deviation [m] {:.3} ± {:.3}", t.deviation.mean(), t.deviation.std());
}

fn scenario_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| ism_core::Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn execute(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Simulate { scenario, out, rules } => {
            let rules = rules.params()?;
            let s = scenario_file::load(&scenario)?;
            let (traj, result) = run(&s)?;
            export_trajectory(&traj, &out)?;
            let report = check_rules(&traj, &rules);
            let record = RunRecord::evaluate(0, &traj, &result, &rules, 0.0);
            let path = out.join("report.jsonl");
            std::fs::write(&path, record.to_line() + "\n").map_err(|e| ism_core::Error::io(&path, e))?;
            println!(
                "steps {}  goals reached {}  collision {}",
                result.steps,
                result.all_goals_reached(),
                result.collision
            );
            print_report(&report);
        }
        Command::Generate {
            count,
            seed,
            mix,
            vessel_type,
            out,
        } => {
            let params = VesselParams::preset(&vessel_type)?;
            let scenarios = generate_critical(&GeneratorConfig::new(count, seed, mix, params))?;
            std::fs::create_dir_all(&out).map_err(|e| ism_core::Error::io(&out, e))?;
            for (i, s) in scenarios.iter().enumerate() {
                scenario_file::save(s, out.join(format!("scenario_{i:05}.json")))?;
            }
            println!("wrote {} scenarios to {}", scenarios.len(), out.display());
        }
        Command::Batch {
            scenarios,
            mixed,
            jobs,
            out,
            rules,
        } => {
            let rules = rules.params()?;
            let files = scenario_files(&scenarios)?;
            let loaded = files
                .iter()
                .map(|f| scenario_file::load(f).with_context(|| format!("loading {}", f.display())))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let mode = if mixed { TrafficMode::Mixed } else { TrafficMode::IsmOnly };
            let report = batch_run(&loaded, mode, &rules, jobs)?;
            report.write(&out)?;
            print!("{}", report.summary.to_table());
        }
        Command::Check {
            trajectory,
            vessel_type,
            rules,
        } => {
            let rules = rules.params()?;
            let params = VesselParams::preset(&vessel_type)?;
            let traj = import_trajectory(&trajectory, &params)?;
            print_report(&check_rules(&traj, &rules));
        }
        Command::Profile {
            vessels,
            steps,
            vessel_type,
        } => {
            let params = VesselParams::preset(&vessel_type)?;
            if vessels == 0 {
                bail!(ism_core::Error::Config("--vessels must be at least 1".into()));
            }
            print!("{}", profile::profile(vessels, steps, &params)?.to_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e
                .chain()
                .filter_map(|c| c.downcast_ref::<ism_core::Error>())
                .any(|c| c.is_validation());
            log::debug!("{e:?}");
            ExitCode::from(if validation { 1 } else { 2 })
        }
    }
}
