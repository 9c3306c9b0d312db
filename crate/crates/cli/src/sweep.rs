//! One pipeline run per value of a single parameter.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use sbdimer_core::{ModelParams, OpticalParams};

use crate::cache::Session;
use crate::config::{RunConfig, SweepAxis};
use crate::error::{CliError, InStage, Result, Stage};
use crate::pipeline::{band_rows, run_tasks, Manifest, Task};

pub const SUMMARY_NAME: &str = "sweep_summary.csv";

#[derive(Debug)]
pub struct SweepRun {
    pub value: f64,
    pub dir: PathBuf,
    pub outcome: Result<Manifest>,
}

#[derive(Debug)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub runs: Vec<SweepRun>,
    pub summary: PathBuf,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }
}

/// Subdirectory name of one sweep point, e.g. `eps_minus_5` or `mu_ratio_inf`.
pub fn point_dir_name(axis: SweepAxis, value: f64) -> String {
    format!("{axis}_{value}")
}

/// `μ₂/μ₁ = ratio`; an infinite ratio selects `(0, ±1)`.
pub fn optical_for_ratio(ratio: f64) -> sbdimer_core::Result<OpticalParams> {
    if ratio.is_infinite() {
        OpticalParams::new(0.0, ratio.signum())
    } else {
        OpticalParams::new(1.0, ratio)
    }
}

/// The configuration of one sweep point.
pub fn point_config(base: &RunConfig, axis: SweepAxis, value: f64) -> Result<RunConfig> {
    let mut cfg = base.clone();
    cfg.sweep = None;
    cfg.output_dir = base.output_dir.join(point_dir_name(axis, value));
    let m = &base.model;
    let with = |p: f64, r: f64, em: f64| -> Result<ModelParams> {
        ModelParams::new(p, r, em)
            .and_then(|x| x.with_eps_plus(m.eps_plus()))
            .map_err(|e| CliError::invalid(axis.name(), e.to_string()))
    };
    match axis {
        SweepAxis::P => cfg.model = with(value, m.r(), m.eps_minus())?,
        SweepAxis::R => cfg.model = with(m.p(), value, m.eps_minus())?,
        SweepAxis::EpsMinus => cfg.model = with(m.p(), m.r(), value)?,
        SweepAxis::MuRatio => {
            cfg.optical = vec![optical_for_ratio(value).map_err(|e| CliError::invalid("mu_ratio", e.to_string()))?]
        }
    }
    Ok(cfg)
}

/// Runs `tasks` for every sweep value; failures are recorded per value and
/// the sweep continues. Writes a summary of band aggregates.
pub fn sweep(session: &mut Session, base: &RunConfig, tasks: &[Task]) -> Result<SweepReport> {
    let spec = base
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::invalid("sweep_axis", "no sweep configured"))?;
    let mut runs = Vec::new();
    let mut lines = vec![
        "axis,value,dir,status,optical,band,lines,total,mean_energy,manifest_sha256".to_string(),
    ];
    for &value in &spec.values {
        let dir = base.output_dir.join(point_dir_name(spec.axis, value));
        let name = point_dir_name(spec.axis, value);
        let outcome = point_config(base, spec.axis, value).and_then(|cfg| {
            let manifest = run_tasks(session, &cfg, tasks)?;
            let es = session.eigensystem(&cfg.model, &cfg.basis)?;
            Ok((manifest, band_rows(&cfg, &es)))
        });
        match &outcome {
            Ok((manifest, rows)) => {
                for (tag, band, _, s) in rows {
                    lines.push(format!(
                        "{},{value},{name},ok,{tag},{band},{},{:e},{:e},{}",
                        spec.axis, s.lines, s.total, s.mean_energy, manifest.sha256
                    ));
                }
            }
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], ";");
                lines.push(format!("{},{value},{name},failed: {msg},,,,,,", spec.axis));
            }
        }
        runs.push(SweepRun {
            value,
            dir,
            outcome: outcome.map(|(m, _)| m),
        });
    }
    fs::create_dir_all(&base.output_dir).in_stage(Stage::Sweep)?;
    let summary = base.output_dir.join(SUMMARY_NAME);
    let mut f = fs::File::create(&summary).in_stage(Stage::Sweep)?;
    for l in &lines {
        writeln!(f, "{l}").in_stage(Stage::Sweep)?;
    }
    Ok(SweepReport {
        axis: spec.axis,
        runs,
        summary,
    })
}
