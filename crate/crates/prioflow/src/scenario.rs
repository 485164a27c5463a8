//! Scenario files: a topology, RSE documents, a seed, and a timeline of
//! timed actions, runnable into a deterministic report. Validation happens
//! before any simulation: unsorted timelines, unknown references, and
//! malformed parameters are rejected with their location.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{ScenarioOp, SimConfig, Simulation};
use crate::orchestrator::DrainPolicy;
use crate::report::RunReport;
use crate::rse::{load_rse, Rse};
use crate::topology::{load_topology, Topology};
use crate::transfer::{synthesize_files, FileSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Submit {
        request_id: String,
        bytes: u64,
        src: String,
        dst: String,
        priority: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file_count: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        files: Option<Vec<FileSpec>>,
    },
    UpdatePriority {
        request_id: String,
        priority: u32,
    },
    Demote {
        request_id: String,
    },
    FtsDone {
        request_id: String,
    },
    ChangeStrategy {
        request_id: String,
    },
}

impl Action {
    fn request_id(&self) -> &str {
        match self {
            Action::Submit { request_id, .. }
            | Action::UpdatePriority { request_id, .. }
            | Action::Demote { request_id }
            | Action::FtsDone { request_id }
            | Action::ChangeStrategy { request_id } => request_id,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub t: f64,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaultSpec {
    pub t: f64,
    pub dataflow: String,
    pub job_index: usize,
}

/// Optional per-scenario overrides of the engine defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_active_jobs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_retries: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drain_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drain_floor_gbps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drain_window_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    /// Path to the topology document, relative to the scenario file.
    pub topology: String,
    /// Paths to RSE documents, relative to the scenario file.
    pub rses: Vec<String>,
    pub seed: u64,
    pub run_until: f64,
    #[serde(default)]
    pub timeline: Vec<TimelineEntry>,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
    #[serde(default)]
    pub checkpoints: Vec<f64>,
    /// Set when the scenario deliberately produces transfer failures.
    #[serde(default)]
    pub expect_failures: bool,
    #[serde(default)]
    pub config: ConfigOverrides,
}

impl Scenario {
    pub fn sim_config(&self) -> SimConfig {
        let defaults = SimConfig::default();
        let drain_defaults = DrainPolicy::default();
        SimConfig {
            batch_size: self.config.batch_size.unwrap_or(defaults.batch_size),
            max_active_jobs: self
                .config
                .max_active_jobs
                .unwrap_or(defaults.max_active_jobs),
            max_retries: self.config.max_retries.unwrap_or(defaults.max_retries),
            drain: DrainPolicy {
                drain_fraction: self
                    .config
                    .drain_fraction
                    .unwrap_or(drain_defaults.drain_fraction),
                drain_floor_gbps: self
                    .config
                    .drain_floor_gbps
                    .unwrap_or(drain_defaults.drain_floor_gbps),
                drain_window_s: self
                    .config
                    .drain_window_s
                    .unwrap_or(drain_defaults.drain_window_s),
            },
        }
    }

    /// Static validation: sorted timeline, consistent references, sane
    /// parameters. Runs before any simulation state exists.
    pub fn validate(&self) -> Result<()> {
        if !self.run_until.is_finite() || self.run_until < 0.0 {
            return Err(Error::Scenario("run_until must be non-negative".into()));
        }
        let mut submitted: BTreeSet<&str> = BTreeSet::new();
        let mut last_t = 0.0f64;
        for (idx, entry) in self.timeline.iter().enumerate() {
            if !entry.t.is_finite() || entry.t < 0.0 {
                return Err(Error::Scenario(format!(
                    "timeline[{idx}]: bad time {}",
                    entry.t
                )));
            }
            if entry.t < last_t {
                return Err(Error::Scenario(format!(
                    "timeline[{idx}]: times must be sorted ({} after {last_t})",
                    entry.t
                )));
            }
            last_t = entry.t;
            if entry.t > self.run_until {
                return Err(Error::Scenario(format!(
                    "timeline[{idx}]: t={} beyond run_until={}",
                    entry.t, self.run_until
                )));
            }
            match &entry.action {
                Action::Submit {
                    request_id,
                    bytes,
                    file_count,
                    files,
                    priority,
                    ..
                } => {
                    if !submitted.insert(request_id) {
                        return Err(Error::Scenario(format!(
                            "timeline[{idx}]: duplicate submit for {request_id}"
                        )));
                    }
                    if *bytes == 0 {
                        return Err(Error::Scenario(format!(
                            "timeline[{idx}]: bytes must be positive"
                        )));
                    }
                    if !(1..=100).contains(priority) {
                        return Err(Error::Scenario(format!(
                            "timeline[{idx}]: priority {priority} outside [1, 100]"
                        )));
                    }
                    if let Some(explicit) = files {
                        let total: u64 = explicit.iter().map(|f| f.size).sum();
                        if total != *bytes {
                            return Err(Error::Scenario(format!(
                                "timeline[{idx}]: files sum to {total}, bytes says {bytes}"
                            )));
                        }
                        if file_count.is_some() {
                            return Err(Error::Scenario(format!(
                                "timeline[{idx}]: give file_count or files, not both"
                            )));
                        }
                    } else if let Some(count) = file_count {
                        if *count == 0 || count > bytes {
                            return Err(Error::Scenario(format!(
                                "timeline[{idx}]: file_count {count} invalid for {bytes} bytes"
                            )));
                        }
                    }
                }
                other => {
                    let id = other.request_id();
                    if !submitted.contains(id) {
                        return Err(Error::Scenario(format!(
                            "timeline[{idx}]: references {id} before any submit"
                        )));
                    }
                }
            }
        }
        for (idx, fault) in self.faults.iter().enumerate() {
            if !fault.t.is_finite() || fault.t < 0.0 || fault.t > self.run_until {
                return Err(Error::Scenario(format!("faults[{idx}]: bad time")));
            }
            if !submitted.contains(fault.dataflow.as_str()) {
                return Err(Error::Scenario(format!(
                    "faults[{idx}]: unknown dataflow {}",
                    fault.dataflow
                )));
            }
        }
        for (idx, t) in self.checkpoints.iter().enumerate() {
            if !t.is_finite() || *t < 0.0 || *t > self.run_until {
                return Err(Error::Scenario(format!("checkpoints[{idx}]: bad time")));
            }
        }
        Ok(())
    }
}

/// A scenario with its referenced documents resolved into memory.
#[derive(Debug, Clone)]
pub struct ScenarioBundle {
    pub topology: Topology,
    pub rses: Vec<Rse>,
    pub scenario: Scenario,
}

/// Load a scenario file and every document it references (paths resolve
/// relative to the scenario file's directory).
pub fn load_bundle(path: &Path) -> Result<ScenarioBundle> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let scenario: Scenario =
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let topo_path = base.join(&scenario.topology);
    let topo_text = fs::read_to_string(&topo_path)
        .map_err(|e| Error::io(topo_path.display().to_string(), e))?;
    let topology = load_topology(&topo_text)?;
    let mut rses = Vec::new();
    for rse_ref in &scenario.rses {
        let rse_path = base.join(rse_ref);
        let rse_text = fs::read_to_string(&rse_path)
            .map_err(|e| Error::io(rse_path.display().to_string(), e))?;
        rses.push(load_rse(&rse_text, &topology)?);
    }
    Ok(ScenarioBundle {
        topology,
        rses,
        scenario,
    })
}

fn op_for(entry: &TimelineEntry) -> Result<ScenarioOp> {
    Ok(match &entry.action {
        Action::Submit {
            request_id,
            bytes,
            src,
            dst,
            priority,
            file_count,
            files,
        } => {
            let files = match files {
                Some(explicit) => explicit.clone(),
                None => synthesize_files(request_id, *bytes, file_count.unwrap_or(1))?,
            };
            ScenarioOp::Submit {
                request: crate::dmm::DataflowRequest {
                    request_id: request_id.clone(),
                    bytes: *bytes,
                    src_site: src.clone(),
                    dst_site: dst.clone(),
                    priority: *priority,
                },
                files,
            }
        }
        Action::UpdatePriority {
            request_id,
            priority,
        } => ScenarioOp::UpdatePriority {
            request_id: request_id.clone(),
            priority: *priority,
        },
        Action::Demote { request_id } => ScenarioOp::Demote {
            request_id: request_id.clone(),
        },
        Action::FtsDone { request_id } => ScenarioOp::FtsDone {
            request_id: request_id.clone(),
        },
        Action::ChangeStrategy { request_id } => ScenarioOp::ChangeStrategy {
            request_id: request_id.clone(),
        },
    })
}

/// Run a resolved bundle to `run_until` and produce the report.
pub fn run_bundle(bundle: &ScenarioBundle) -> Result<RunReport> {
    bundle.scenario.validate()?;
    let mut sim = Simulation::new(
        bundle.topology.clone(),
        bundle.rses.clone(),
        bundle.scenario.sim_config(),
        bundle.scenario.seed,
    )?;
    for entry in &bundle.scenario.timeline {
        sim.schedule_op(entry.t, op_for(entry)?)?;
    }
    for fault in &bundle.scenario.faults {
        sim.schedule_op(
            fault.t,
            ScenarioOp::Fault {
                dataflow_id: fault.dataflow.clone(),
                job_index: fault.job_index,
            },
        )?;
    }
    for t in &bundle.scenario.checkpoints {
        sim.schedule_checkpoint(*t)?;
    }
    sim.run_until(bundle.scenario.run_until)?;
    sim.into_report(bundle.scenario.run_until)
}
