//! Command-line front end for the attitude-reachability pipeline.
//!
//! Three subcommands: `run` executes the certified propagation from a JSON
//! config and writes reach.json, regions.json, nominal.csv, a copy of the
//! config, and per-step chart-coordinate ball exports; `ball` maps a single
//! rotation metric ball to chart coordinates as CSV; `verify` replays a
//! results directory against a Monte-Carlo containment audit.
//!
//! Exit codes: 0 success, 2 no feasible contraction rate (partial results
//! still written), 3 invalid or unreadable input, 4 ball straddles chart
//! domains, 5 verification found containment violations, 1 anything else.
//! `ATTREACH_THREADS` caps worker parallelism.

mod config;
mod records;

use attreach::charts::{
    ball_boundary, ball_interior_samples, chart_coverage, chart_map, ChartError,
};
use attreach::metrics::SpdMatrix;
use attreach::reach::{conreach, monte_carlo_verify, ReachError, ReachResult};
use attreach::so3::Rotation;
use clap::{Parser, Subcommand};
use config::{mat3_row_major, rotation_from_reals, RunConfig};
use records::{Metadata, ReachDocument, RegionRecord};
use sha2::{Digest, Sha256};
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_INTERNAL: u8 = 1;
const EXIT_NO_RATE: u8 = 2;
const EXIT_BAD_INPUT: u8 = 3;
const EXIT_STRADDLE: u8 = 4;
const EXIT_VIOLATIONS: u8 = 5;

/// Slack on the provable-straddle test. Strictly below the chart-domain
/// guard angle sqrt(1e-9), so a firing test implies a point of the ball
/// truly leaves the selected chart.
const STRADDLE_BAND: f64 = 3e-5;

#[derive(Parser)]
#[command(name = "attreach", version, about = "Contraction-based reachable sets for rigid-body attitude dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the reachability pipeline from a config file.
    Run {
        /// Path to the JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if absent).
        #[arg(long)]
        out: PathBuf,
    },
    /// Export one rotation metric ball in chart coordinates as CSV.
    Ball {
        /// Metric matrix Q: 9 comma-separated reals, row-major.
        #[arg(long)]
        q: String,
        /// Ball center: 3 comma-separated reals (axis-angle) or 9 (row-major matrix).
        #[arg(long)]
        center: String,
        /// Geodesic radius of the ball.
        #[arg(long)]
        radius: f64,
        /// Boundary direction count; the interior gets the same count again.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo audit of a results directory written by `run`.
    Verify {
        /// Results directory holding reach.json, regions.json, config.json.
        #[arg(long)]
        results: PathBuf,
        /// Sample count; defaults to the montecarlo.n of the stored config.
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(EXIT_BAD_INPUT),
            };
        }
    };
    configure_threads();
    let code = match cli.command {
        Command::Run { config, out } => cmd_run(&config, &out),
        Command::Ball {
            q,
            center,
            radius,
            samples,
            out,
        } => cmd_ball(&q, &center, radius, samples, &out),
        Command::Verify { results, samples } => cmd_verify(&results, samples),
    };
    ExitCode::from(code)
}

fn configure_threads() {
    let Ok(raw) = std::env::var("ATTREACH_THREADS") else {
        return;
    };
    match raw.parse::<usize>() {
        Ok(n) if n >= 1 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("warning: cannot apply ATTREACH_THREADS={n}: {e}");
            }
        }
        _ => eprintln!("warning: ignoring non-positive ATTREACH_THREADS value {raw:?}"),
    }
}

fn fail(msg: impl std::fmt::Display, code: u8) -> u8 {
    eprintln!("error: {msg}");
    code
}

fn cmd_run(config_path: &Path, out_dir: &Path) -> u8 {
    let (cfg, raw) = match RunConfig::load(config_path) {
        Ok(v) => v,
        Err(e) => return fail(e, EXIT_BAD_INPUT),
    };
    let reach_cfg = match cfg.reach_config() {
        Ok(v) => v,
        Err(e) => return fail(e, EXIT_BAD_INPUT),
    };
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        return fail(format!("cannot create {}: {e}", out_dir.display()), EXIT_BAD_INPUT);
    }

    let metadata = Metadata {
        config_sha256: hex_sha256(&raw),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix_s: unix_now(),
    };

    let (result, code) = match conreach(&reach_cfg) {
        Ok(result) => (result, 0),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                ReachError::NoFeasibleRate { .. } => EXIT_NO_RATE,
                _ => EXIT_INTERNAL,
            };
            (e.partial().clone(), code)
        }
    };

    if let Err(e) = write_run_outputs(out_dir, &result, metadata, &raw) {
        return fail(e, EXIT_INTERNAL);
    }
    if code == 0 {
        if let Err(e) = write_ball_exports(out_dir, &result, cfg.ball_export.n_samples) {
            return fail(e, EXIT_INTERNAL);
        }
        println!(
            "wrote {} records over [0, {}] to {}",
            result.steps.len(),
            reach_cfg.horizon,
            out_dir.display()
        );
    } else {
        eprintln!(
            "partial results ({} of {} records) written to {}",
            result.steps.len(),
            reach_cfg.steps + 1,
            out_dir.display()
        );
    }
    code
}

fn write_run_outputs(
    out_dir: &Path,
    result: &ReachResult,
    metadata: Metadata,
    raw_config: &[u8],
) -> Result<(), String> {
    let doc = records::document_from_result(result, metadata);
    let regions: Vec<RegionRecord> = records::regions_from_result(result);
    let io = |name: &str, e: std::io::Error| format!("cannot write {name}: {e}");
    records::write_atomic(&out_dir.join("reach.json"), &records::to_json_bytes(&doc))
        .map_err(|e| io("reach.json", e))?;
    records::write_atomic(
        &out_dir.join("regions.json"),
        &records::to_json_bytes(&regions),
    )
    .map_err(|e| io("regions.json", e))?;
    records::write_atomic(
        &out_dir.join("nominal.csv"),
        records::nominal_csv(&result.nominal).as_bytes(),
    )
    .map_err(|e| io("nominal.csv", e))?;
    records::write_atomic(&out_dir.join("config.json"), raw_config)
        .map_err(|e| io("config.json", e))?;
    Ok(())
}

/// Chart-coordinate export of every step's rotation ball. Steps whose ball
/// cannot be exported (radius at or beyond pi/2, or straddling charts) are
/// skipped with a warning; the run itself already succeeded.
fn write_ball_exports(out_dir: &Path, result: &ReachResult, n: usize) -> Result<(), String> {
    let dir = out_dir.join("balls");
    std::fs::create_dir_all(&dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    for (i, step) in result.steps.iter().enumerate() {
        if step.radius >= FRAC_PI_2 {
            eprintln!(
                "warning: step {i} ball radius {:.3} exceeds the exportable range, skipping",
                step.radius
            );
            continue;
        }
        let points = ball_boundary(&step.metric.q, &step.center.r, step.radius, n)
            .and_then(|mut pts| {
                let interior =
                    ball_interior_samples(&step.metric.q, &step.center.r, step.radius, n)?;
                pts.extend(interior);
                Ok(pts)
            });
        match points {
            Ok(pts) => {
                let path = dir.join(format!("step_{i:03}.csv"));
                records::write_atomic(&path, records::ball_csv(&pts).as_bytes())
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            Err(e) => eprintln!("warning: step {i} ball export failed ({e}), skipping"),
        }
    }
    Ok(())
}

fn cmd_ball(q_str: &str, center_str: &str, radius: f64, samples: usize, out: &Path) -> u8 {
    let q_vals = match parse_reals(q_str) {
        Ok(v) if v.len() == 9 => v,
        Ok(v) => return fail(format!("--q must hold 9 reals, got {}", v.len()), EXIT_BAD_INPUT),
        Err(e) => return fail(format!("--q: {e}"), EXIT_BAD_INPUT),
    };
    let q_arr: [f64; 9] = q_vals.try_into().expect("length checked");
    let q = match SpdMatrix::new(mat3_row_major(&q_arr)) {
        Ok(q) => q,
        Err(e) => return fail(format!("--q: {e}"), EXIT_BAD_INPUT),
    };
    let center_vals = match parse_reals(center_str) {
        Ok(v) => v,
        Err(e) => return fail(format!("--center: {e}"), EXIT_BAD_INPUT),
    };
    let center = match rotation_from_reals(&center_vals) {
        Ok(r) => r,
        Err(e) => return fail(format!("--center {e}"), EXIT_BAD_INPUT),
    };
    if !radius.is_finite() || radius <= 0.0 {
        return fail("--radius must be a positive real", EXIT_BAD_INPUT);
    }

    if let Some(angle) = provable_straddle(&q, &center, radius) {
        return fail(
            format!(
                "ball reaches chart angle {angle:.6} (limit pi = {PI:.6}); \
                 it straddles chart domains and has no single-chart image"
            ),
            EXIT_STRADDLE,
        );
    }
    if radius >= FRAC_PI_2 {
        return fail(
            format!("--radius {radius} is at or beyond pi/2, outside the shooting-based export range"),
            EXIT_BAD_INPUT,
        );
    }

    let points = ball_boundary(&q, &center, radius, samples).and_then(|mut pts| {
        pts.extend(ball_interior_samples(&q, &center, radius, samples)?);
        Ok(pts)
    });
    let points = match points {
        Ok(pts) => pts,
        Err(e @ ChartError::BallStraddlesCharts { .. }) => return fail(e, EXIT_STRADDLE),
        Err(e) => return fail(e, EXIT_INTERNAL),
    };
    match records::write_atomic(out, records::ball_csv(&points).as_bytes()) {
        Ok(()) => {
            println!("wrote {} points to {}", points.len(), out.display());
            0
        }
        Err(e) => fail(format!("cannot write {}: {e}", out.display()), EXIT_INTERNAL),
    }
}

/// Angle from the selected chart's origin that the ball provably attains,
/// when that angle already leaves the chart domain. The metric ball of
/// radius r contains the bi-invariant ball of radius r / sqrt(lmax(Q)),
/// and extending the center's minimal geodesic attains every angle up to
/// that bound (capped at pi).
fn provable_straddle(q: &SpdMatrix, center: &Rotation, radius: f64) -> Option<f64> {
    let chart = chart_coverage(center)[0];
    let psi = chart_map(&chart, center)
        .expect("a covering chart admits its own center")
        .norm();
    let angle = (psi + radius / q.max_eigenvalue().sqrt()).min(PI);
    (angle >= PI - STRADDLE_BAND).then_some(angle)
}

fn cmd_verify(results_dir: &Path, samples: Option<usize>) -> u8 {
    let (cfg, _) = match RunConfig::load(&results_dir.join("config.json")) {
        Ok(v) => v,
        Err(e) => return fail(e, EXIT_BAD_INPUT),
    };
    let reach_cfg = match cfg.reach_config() {
        Ok(v) => v,
        Err(e) => return fail(e, EXIT_BAD_INPUT),
    };
    let doc: ReachDocument = match read_json(&results_dir.join("reach.json")) {
        Ok(v) => v,
        Err(e) => return fail(e, EXIT_BAD_INPUT),
    };
    let regions: Vec<RegionRecord> = match read_json(&results_dir.join("regions.json")) {
        Ok(v) => v,
        Err(e) => return fail(e, EXIT_BAD_INPUT),
    };
    let result = match records::result_from_documents(&doc, &regions) {
        Ok(v) => v,
        Err(e) => return fail(e, EXIT_BAD_INPUT),
    };

    let n = samples.unwrap_or(cfg.montecarlo.n);
    let report = monte_carlo_verify(&reach_cfg, &result, n);
    let out = records::verify_document(&report);
    if let Err(e) = records::write_atomic(
        &results_dir.join("verify.json"),
        &records::to_json_bytes(&out),
    ) {
        return fail(format!("cannot write verify.json: {e}"), EXIT_INTERNAL);
    }
    println!(
        "audited {} samples: {} violations, {} shooting failures, worst margin {:e}",
        report.samples, report.violations, report.shooting_failures, report.worst_margin
    );
    if report.violations == 0 {
        0
    } else {
        EXIT_VIOLATIONS
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let bytes =
        std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_slice(&bytes).map_err(|e| format!("{} is invalid: {e}", path.display()))
}

fn parse_reals(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|tok| {
            let tok = tok.trim();
            tok.parse::<f64>()
                .map_err(|_| format!("{tok:?} is not a real number"))
        })
        .collect()
}

fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
