//! Delimiter-separated trajectory export and import.
//!
//! Numbers are written in shortest round-trip form, so importing an export
//! reproduces every state bit for bit.

use std::collections::HashMap;
use std::path::Path;

use crate::dynamics::{ControlInput, VesselParams, VesselState};
use crate::error::{Error, Result};
use crate::geometry::{Angle, Vec2};
use crate::predicates::EncounterKind;
use crate::simulator::{Sample, Termination, Track, Trajectory};
use crate::waypoint::WaypointKind;

pub const TRAJECTORY_HEADER: [&str; 13] = [
    "t_s",
    "vessel",
    "x_m",
    "y_m",
    "phi_rad",
    "v_mps",
    "a_mps2",
    "omega_radps",
    "encounter",
    "wp_x_m",
    "wp_y_m",
    "ref_x_m",
    "ref_y_m",
];

pub const WAYPOINT_HEADER: [&str; 7] = ["t_s", "vessel", "index", "kind", "goal", "x_m", "y_m"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one row per vessel and sample, ordered by time then vessel.
pub fn write_trajectory<W: std::io::Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    let mut rows: Vec<(f64, usize, &Sample)> = traj
        .tracks
        .iter()
        .enumerate()
        .flat_map(|(i, t)| t.samples.iter().map(move |s| (s.t, i, s)))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (_, i, s) in rows {
        w.write_record([
            s.t.to_string(),
            traj.tracks[i].name.clone(),
            s.state.x.to_string(),
            s.state.y.to_string(),
            s.state.phi.rad().to_string(),
            s.state.v.to_string(),
            s.input.a.to_string(),
            s.input.omega.to_string(),
            s.encounter.as_str().to_string(),
            opt(s.next_waypoint.map(|p| p.x)),
            opt(s.next_waypoint.map(|p| p.y)),
            opt(s.reference.map(|p| p.x)),
            opt(s.reference.map(|p| p.y)),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<trajectory>", e))
}

/// Writes every recorded waypoint plan, one row per waypoint.
pub fn write_waypoints<W: std::io::Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(WAYPOINT_HEADER)?;
    for plan in &traj.plans {
        for (k, wp) in plan.waypoints.iter().enumerate() {
            w.write_record([
                plan.t.to_string(),
                traj.tracks[plan.vessel].name.clone(),
                k.to_string(),
                match wp.kind {
                    WaypointKind::Normal => "normal".to_string(),
                    WaypointKind::Guiding => "guiding".to_string(),
                },
                wp.goal.map(|g| g.to_string()).unwrap_or_default(),
                wp.position.x.to_string(),
                wp.position.y.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<waypoints>", e))
}

/// Writes `trajectory.csv` and `waypoints.csv` into `dir`.
pub fn export_trajectory(traj: &Trajectory, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| {
        let path = dir.join(name);
        std::fs::File::create(&path).map_err(|e| Error::io(&path, e))
    };
    write_trajectory(traj, create("trajectory.csv")?)?;
    write_waypoints(traj, create("waypoints.csv")?)
}

fn column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers.iter().position(|h| names.contains(&h.trim()))
}

/// Reads timed `t, x, y, heading, speed` rows, optionally with a vessel
/// column and the remaining export columns. Every vessel gets `params`.
pub fn read_trajectory<R: std::io::Read>(input: R, params: &VesselParams) -> Result<Trajectory> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers()?.clone();
    let need = |names: &[&str]| {
        column(&headers, names).ok_or_else(|| Error::Validation(format!("missing column {}", names[0])))
    };
    let ct = need(&["t_s", "t", "time"])?;
    let cx = need(&["x_m", "x"])?;
    let cy = need(&["y_m", "y"])?;
    let cphi = need(&["phi_rad", "phi", "heading"])?;
    let cv = need(&["v_mps", "v", "speed"])?;
    let cid = column(&headers, &["vessel", "id"]);
    let ca = column(&headers, &["a_mps2", "a"]);
    let cw = column(&headers, &["omega_radps", "omega"]);
    let cenc = column(&headers, &["encounter"]);
    let cwp = column(&headers, &["wp_x_m"]).zip(column(&headers, &["wp_y_m"]));
    let cref = column(&headers, &["ref_x_m"]).zip(column(&headers, &["ref_y_m"]));

    let mut order: Vec<String> = Vec::new();
    let mut tracks: HashMap<String, Vec<Sample>> = HashMap::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            let field = rec.get(c).unwrap_or("");
            field
                .parse::<f64>()
                .map_err(|_| Error::Validation(format!("row {}: bad number {field:?}", line + 2)))
        };
        let opt_num = |c: Option<usize>| -> Result<Option<f64>> {
            match c.and_then(|c| rec.get(c)) {
                None | Some("") => Ok(None),
                Some(_) => num(c.unwrap()).map(Some),
            }
        };
        let opt_point = |c: Option<(usize, usize)>| -> Result<Option<Vec2>> {
            match c {
                Some((a, b)) => Ok(opt_num(Some(a))?.zip(opt_num(Some(b))?).map(|(x, y)| Vec2::new(x, y))),
                None => Ok(None),
            }
        };
        let id = cid.and_then(|c| rec.get(c)).unwrap_or("0").to_string();
        let sample = Sample {
            t: num(ct)?,
            state: VesselState {
                x: num(cx)?,
                y: num(cy)?,
                phi: Angle::new(num(cphi)?),
                v: num(cv)?,
            },
            input: ControlInput::new(opt_num(ca)?.unwrap_or(0.0), opt_num(cw)?.unwrap_or(0.0)),
            encounter: match cenc.and_then(|c| rec.get(c)) {
                None | Some("") => EncounterKind::None,
                Some(s) => s.parse()?,
            },
            next_waypoint: opt_point(cwp)?,
            reference: opt_point(cref)?,
        };
        if !sample.t.is_finite() || !sample.state.is_finite() {
            return Err(Error::Validation(format!("row {}: non-finite value", line + 2)));
        }
        if !tracks.contains_key(&id) {
            order.push(id.clone());
        }
        tracks.entry(id).or_default().push(sample);
    }
    if order.is_empty() {
        return Err(Error::Validation("trajectory file has no rows".into()));
    }
    for samples in tracks.values_mut() {
        samples.sort_by(|a, b| a.t.total_cmp(&b.t));
    }
    let dt = tracks[&order[0]]
        .windows(2)
        .map(|w| w[1].t - w[0].t)
        .find(|d| *d > 0.0)
        .unwrap_or(1.0);
    Ok(Trajectory {
        dt,
        tracks: order
            .into_iter()
            .map(|name| Track {
                samples: tracks.remove(&name).unwrap_or_default(),
                name,
                is_obstacle: false,
                params: params.clone(),
                termination: Termination::Replay,
            })
            .collect(),
        plans: vec![],
    })
}

pub fn import_trajectory(path: impl AsRef<Path>, params: &VesselParams) -> Result<Trajectory> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trajectory(file, params)
}
