//! Result-file formats: JSON for structured reach data and verification
//! reports, CSV for point data. Floats are written with 17 significant
//! digits throughout, which round-trips every f64 exactly, and files are
//! written atomically (temp file in the target directory, then rename).

use attreach::contraction::{IntervalMatrix, SearchRegion};
use attreach::dynamics::Trajectory;
use attreach::metrics::{MetricPair, SpdMatrix, State};
use attreach::reach::{ReachResult, ReachStep, StepAudit, VerifyReport};
use attreach::so3::{Mat3, Rotation, Vec3};
use attreach::{Interval, IntervalVec3};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Provenance block of reach.json. The timestamp is confined here so the
/// data sections of two runs with one config compare byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub config_sha256: String,
    pub tool_version: String,
    pub created_unix_s: u64,
}

/// One step of the over-approximation, matrices row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReachRecord {
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

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReachDocument {
    pub metadata: Metadata,
    pub records: Vec<ReachRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VecInterval {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatInterval {
    pub lo: [f64; 9],
    pub hi: [f64; 9],
}

/// The search region certificate i was synthesized on (the step from
/// record i to record i+1).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionRecord {
    pub step: usize,
    pub omega_box: VecInterval,
    pub a_interval: MatInterval,
    pub b_interval: MatInterval,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepAuditRecord {
    pub t: f64,
    pub violations: usize,
    pub worst_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyDocument {
    pub samples: usize,
    pub violations: usize,
    pub worst_margin: f64,
    pub shooting_failures: usize,
    pub per_step: Vec<StepAuditRecord>,
}

fn row_major(m: &Mat3) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[3 * r + c] = m[(r, c)];
        }
    }
    out
}

fn vec3_array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub fn document_from_result(result: &ReachResult, metadata: Metadata) -> ReachDocument {
    let records = result
        .steps
        .iter()
        .map(|s| ReachRecord {
            t: s.t,
            r_center: row_major(s.center.r.matrix()),
            omega_center: vec3_array(&s.center.omega),
            q: row_major(s.metric.q.matrix()),
            p: row_major(s.metric.p.matrix()),
            r: s.radius,
            c: s.c,
        })
        .collect();
    ReachDocument { metadata, records }
}

pub fn regions_from_result(result: &ReachResult) -> Vec<RegionRecord> {
    result
        .regions
        .iter()
        .enumerate()
        .map(|(i, reg)| RegionRecord {
            step: i,
            omega_box: VecInterval {
                lo: [reg.omega_box.x.lo, reg.omega_box.y.lo, reg.omega_box.z.lo],
                hi: [reg.omega_box.x.hi, reg.omega_box.y.hi, reg.omega_box.z.hi],
            },
            a_interval: MatInterval {
                lo: row_major(reg.a_interval.lower()),
                hi: row_major(reg.a_interval.upper()),
            },
            b_interval: MatInterval {
                lo: row_major(reg.b_interval.lower()),
                hi: row_major(reg.b_interval.upper()),
            },
        })
        .collect()
}

pub fn verify_document(report: &VerifyReport) -> VerifyDocument {
    VerifyDocument {
        samples: report.samples,
        violations: report.violations,
        worst_margin: report.worst_margin,
        shooting_failures: report.shooting_failures,
        per_step: report
            .per_step
            .iter()
            .map(|a: &StepAudit| StepAuditRecord {
                t: a.t,
                violations: a.violations,
                worst_margin: a.worst_margin,
            })
            .collect(),
    }
}

/// Rebuilds the in-memory result, re-validating every module-level
/// invariant (rotations on the group, metrics SPD, ordered intervals,
/// strictly increasing times).
pub fn result_from_documents(
    doc: &ReachDocument,
    regions: &[RegionRecord],
) -> Result<ReachResult, String> {
    if doc.records.is_empty() {
        return Err("reach.json holds no records".into());
    }
    if regions.len() + 1 != doc.records.len() {
        return Err(format!(
            "regions.json holds {} regions for {} records (want records - 1)",
            regions.len(),
            doc.records.len()
        ));
    }
    let mut steps = Vec::with_capacity(doc.records.len());
    for (i, rec) in doc.records.iter().enumerate() {
        if i > 0 && rec.t <= doc.records[i - 1].t {
            return Err(format!("record times not strictly increasing at index {i}"));
        }
        if !rec.r.is_finite() || rec.r < 0.0 {
            return Err(format!("record {i} has invalid radius {}", rec.r));
        }
        if !rec.c.is_finite() {
            return Err(format!("record {i} has non-finite rate"));
        }
        let rot = Rotation::from_matrix(Mat3::from_row_slice(&rec.r_center))
            .map_err(|e| format!("record {i} R_center rejected: {e}"))?;
        let q = SpdMatrix::new(Mat3::from_row_slice(&rec.q))
            .map_err(|e| format!("record {i} Q rejected: {e}"))?;
        let p = SpdMatrix::new(Mat3::from_row_slice(&rec.p))
            .map_err(|e| format!("record {i} P rejected: {e}"))?;
        steps.push(ReachStep {
            t: rec.t,
            center: State::new(rot, Vec3::from_column_slice(&rec.omega_center)),
            metric: MetricPair::new(q, p),
            radius: rec.r,
            c: rec.c,
        });
    }

    let mut region_list = Vec::with_capacity(regions.len());
    for (i, reg) in regions.iter().enumerate() {
        if reg.step != i {
            return Err(format!("region {i} is labeled step {}", reg.step));
        }
        let ordered3 = reg.omega_box.lo.iter().zip(&reg.omega_box.hi).all(|(l, h)| l <= h);
        let ordered9 = |m: &MatInterval| m.lo.iter().zip(&m.hi).all(|(l, h)| l <= h);
        if !ordered3 || !ordered9(&reg.a_interval) || !ordered9(&reg.b_interval) {
            return Err(format!("region {i} has interval bounds out of order"));
        }
        region_list.push(SearchRegion::new(
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
        ));
    }

    let nominal = Trajectory {
        times: steps.iter().map(|s| s.t).collect(),
        states: steps.iter().map(|s| s.center).collect(),
    };
    Ok(ReachResult {
        steps,
        nominal,
        regions: region_list,
    })
}

pub fn nominal_csv(nominal: &Trajectory) -> String {
    let mut out = String::from("t,r11,r12,r13,r21,r22,r23,r31,r32,r33,wx,wy,wz\n");
    for (t, s) in nominal.times.iter().zip(&nominal.states) {
        out.push_str(&format!("{t:.16e}"));
        for v in row_major(s.r.matrix()) {
            out.push_str(&format!(",{v:.16e}"));
        }
        for v in vec3_array(&s.omega) {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

pub fn ball_csv(points: &[attreach::charts::ChartPoint]) -> String {
    let mut out = String::from("chart,x,y,z\n");
    for p in points {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e}\n",
            p.chart, p.r.x, p.r.y, p.r.z
        ));
    }
    out
}

struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value
        .serialize(&mut ser)
        .expect("serialization of result documents is infallible");
    out.push(b'\n');
    out
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
