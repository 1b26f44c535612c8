#![allow(dead_code)]

use attreach::contraction::{Certificate, IntervalMatrix, SearchRegion};
use attreach::metrics::{MetricPair, SpdMatrix, State};
use attreach::reach::ReachStep;
use attreach::so3::{Mat3, Rotation, Vec3};
use attreach::{Interval, IntervalVec3};
use serde::Deserialize;
use std::path::Path;
use std::process::{Command, Output};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_attreach")
}

pub fn run_cli(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("tool invocation completes")
}

pub fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("tool exits normally")
}

pub fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Mirror of the reach.json schema, parsed independently of the tool's
/// own reader so round-trip tests do not share its code path.
#[derive(Deserialize)]
pub struct RawDocument {
    pub metadata: RawMetadata,
    pub records: Vec<RawRecord>,
}

#[derive(Deserialize)]
pub struct RawMetadata {
    pub config_sha256: String,
    pub tool_version: String,
    pub created_unix_s: u64,
}

#[derive(Deserialize)]
pub struct RawRecord {
    pub t: f64,
    #[serde(rename = "R_center")]
    pub r_center: [f64; 9],
    pub omega_center: [f64; 3],
    #[serde(rename = "Q")]
    pub q: [f64; 9],
    #[serde(rename = "P")]
    pub p: [f64; 9],
    pub r: f64,
    pub c: f64,
}

#[derive(Deserialize)]
pub struct RawBound3 {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

#[derive(Deserialize)]
pub struct RawBound9 {
    pub lo: [f64; 9],
    pub hi: [f64; 9],
}

#[derive(Deserialize)]
pub struct RawRegion {
    pub step: usize,
    pub omega_box: RawBound3,
    pub a_interval: RawBound9,
    pub b_interval: RawBound9,
}

pub fn read_document(dir: &Path) -> RawDocument {
    let bytes = std::fs::read(dir.join("reach.json")).expect("reach.json readable");
    serde_json::from_slice(&bytes).expect("reach.json parses")
}

pub fn read_regions(dir: &Path) -> Vec<RawRegion> {
    let bytes = std::fs::read(dir.join("regions.json")).expect("regions.json readable");
    serde_json::from_slice(&bytes).expect("regions.json parses")
}

pub fn step_from_record(rec: &RawRecord) -> ReachStep {
    ReachStep {
        t: rec.t,
        center: State::new(
            Rotation::from_matrix(Mat3::from_row_slice(&rec.r_center))
                .expect("stored center lies on the group"),
            Vec3::from_column_slice(&rec.omega_center),
        ),
        metric: MetricPair::new(
            SpdMatrix::new(Mat3::from_row_slice(&rec.q)).expect("stored Q is SPD"),
            SpdMatrix::new(Mat3::from_row_slice(&rec.p)).expect("stored P is SPD"),
        ),
        radius: rec.r,
        c: rec.c,
    }
}

pub fn region_from_record(reg: &RawRegion) -> SearchRegion {
    SearchRegion::new(
        IntervalVec3::new(
            Interval::new(reg.omega_box.lo[0], reg.omega_box.hi[0]),
            Interval::new(reg.omega_box.lo[1], reg.omega_box.hi[1]),
            Interval::new(reg.omega_box.lo[2], reg.omega_box.hi[2]),
        ),
        IntervalMatrix::new(
            Mat3::from_row_slice(&reg.a_interval.lo),
            Mat3::from_row_slice(&reg.a_interval.hi),
        ),
        IntervalMatrix::new(
            Mat3::from_row_slice(&reg.b_interval.lo),
            Mat3::from_row_slice(&reg.b_interval.hi),
        ),
    )
}

/// Certificate governing the step from record i-1 to record i.
pub fn certificates(doc: &RawDocument, regions: &[RawRegion]) -> Vec<Certificate> {
    assert_eq!(regions.len() + 1, doc.records.len());
    (1..doc.records.len())
        .map(|i| Certificate {
            metric: step_from_record(&doc.records[i]).metric,
            c: doc.records[i].c,
            region: region_from_record(&regions[i - 1]),
        })
        .collect()
}

/// Zeroes the only run-dependent field so reruns compare byte-identical.
pub fn strip_timestamp(text: &str) -> String {
    let key = "\"created_unix_s\":";
    let Some(pos) = text.find(key) else {
        return text.to_string();
    };
    let start = pos + key.len();
    let end = text[start..]
        .find(|ch: char| !ch.is_ascii_digit())
        .map_or(text.len(), |off| start + off);
    format!("{}0{}", &text[..start], &text[end..])
}

pub fn small_config() -> String {
    r#"{
  "inertia": [-2.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -3.0],
  "control_law": "paper_sec6",
  "initial": {
    "R0": [0.0, 0.0, 0.0],
    "omega0": [0.65, 0.54, 0.61],
    "r_rot": 0.1,
    "r_omega": 0.1
  },
  "horizon": 0.4,
  "steps": 4,
  "montecarlo": { "n": 50 },
  "ball_export": { "n_samples": 16 }
}
"#
    .to_string()
}

pub fn stabilized_velocity_config(horizon: f64, steps: usize, mc: usize) -> String {
    format!(
        r#"{{
  "inertia": [-2.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -3.0],
  "control_law": "paper_sec6",
  "initial": {{
    "R0": [0.0, 0.0, 0.0],
    "omega0": [0.65, 0.54, 0.61],
    "r_rot": 0.1,
    "r_omega": 0.1
  }},
  "horizon": {horizon},
  "steps": {steps},
  "line_search": {{ "c_min": 0.0, "c_max": 1.0, "n_steps": 3 }},
  "montecarlo": {{ "n": {mc} }},
  "ball_export": {{ "n_samples": 100 }}
}}
"#
    )
}

pub fn write_file(path: &Path, contents: &str) {
    std::fs::write(path, contents).expect("test file writable");
}
