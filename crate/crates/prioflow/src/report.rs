//! Run reporting: piecewise-constant rate and link-utilization series,
//! completion times, failure surfacing, invariant-audit results, and the
//! deterministic event log. Two output artifacts: a structured JSON report
//! and a `time,service_id,rate_gbps` CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::orchestrator::AllocationMap;
use crate::topology::{Topology, Violation};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub t: f64,
    pub service: String,
    pub rate_gbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkRow {
    pub t: f64,
    pub link: String,
    pub priority_gbps: f64,
    pub best_effort_gbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRow {
    pub dataflow: String,
    pub t: f64,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ServiceSummary {
    pub request_id: String,
    pub state: String,
    pub best_effort: bool,
    pub final_rate_gbps: f64,
    pub bytes_moved: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditSummary {
    pub cap_reserve_ok: bool,
    pub subnet_unique_ok: bool,
    pub rules_consistent_ok: bool,
    pub conservation_ok: bool,
    pub violations: Vec<String>,
}

impl AuditSummary {
    pub fn all_ok(&self) -> bool {
        self.cap_reserve_ok
            && self.subnet_unique_ok
            && self.rules_consistent_ok
            && self.conservation_ok
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub run_until: f64,
    pub dispatched_events: u64,
    pub services: BTreeMap<String, ServiceSummary>,
    pub rate_series: Vec<RateRow>,
    pub link_series: Vec<LinkRow>,
    pub completions: Vec<CompletionRow>,
    pub failed_jobs: Vec<crate::transfer::FailedJob>,
    pub action_errors: Vec<String>,
    pub audits: AuditSummary,
    pub site_configs: BTreeMap<String, String>,
    pub event_log: Vec<String>,
    pub event_log_hash: String,
}

impl RunReport {
    pub fn completion_time(&self, dataflow: &str) -> Option<f64> {
        self.completions
            .iter()
            .find(|c| c.dataflow == dataflow)
            .map(|c| c.t)
    }

    /// A run "passes" when every audit holds and, unless the scenario
    /// declares failures as expected, no job failed.
    pub fn passes(&self, expect_failures: bool) -> bool {
        self.audits.all_ok() && (expect_failures || self.failed_jobs.is_empty())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Rate series as CSV with a fixed header; an empty run yields just the
    /// header line.
    pub fn rates_csv(&self) -> String {
        let mut out = String::from("time,service_id,rate_gbps\n");
        for row in &self.rate_series {
            writeln!(out, "{},{},{}", row.t, row.service, row.rate_gbps).unwrap();
        }
        out
    }

    pub fn links_csv(&self) -> String {
        let mut out = String::from("time,link,priority_gbps,best_effort_gbps\n");
        for row in &self.link_series {
            writeln!(
                out,
                "{},{},{},{}",
                row.t, row.link, row.priority_gbps, row.best_effort_gbps
            )
            .unwrap();
        }
        out
    }
}

/// Write the report artifacts into a directory (created if missing):
/// `report.json`, `rates.csv`, `links.csv`, and one `site_<name>.cfg` per
/// site. Output is stable-ordered and byte-deterministic for equal state.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<()> {
    let write = |name: &str, contents: &str| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(path.display().to_string(), e))
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    write("report.json", &report.to_json())?;
    write("rates.csv", &report.rates_csv())?;
    write("links.csv", &report.links_csv())?;
    for (site, config) in &report.site_configs {
        write(&format!("site_{site}.cfg"), config)?;
    }
    Ok(())
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in bytes {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Collects series rows, the event log, and audit findings during a run.
#[derive(Debug, Default)]
pub struct Recorder {
    event_log: Vec<String>,
    rate_rows: Vec<RateRow>,
    link_rows: Vec<LinkRow>,
    completions: Vec<CompletionRow>,
    action_errors: Vec<String>,
    violations: Vec<String>,
    cap_reserve_ok: bool,
    subnet_unique_ok: bool,
    rules_consistent_ok: bool,
    last_rates: BTreeMap<String, f64>,
    last_links: BTreeMap<String, (f64, f64)>,
}

impl Recorder {
    pub fn new() -> Self {
        Recorder {
            cap_reserve_ok: true,
            subnet_unique_ok: true,
            rules_consistent_ok: true,
            ..Default::default()
        }
    }

    pub fn log(&mut self, t: f64, message: impl AsRef<str>) {
        self.event_log.push(format!("t={} {}", t, message.as_ref()));
    }

    pub fn action_error(&mut self, t: f64, error: &Error) {
        let line = format!("t={t} action-error {error}");
        self.event_log.push(line.clone());
        self.action_errors.push(line);
    }

    pub fn record_completion(&mut self, dataflow: &str, t: f64, bytes: u64) {
        self.completions.push(CompletionRow {
            dataflow: dataflow.to_string(),
            t,
            bytes,
        });
    }

    /// Record per-service rates, emitting a row only when a value changed.
    /// Services that disappeared get a final zero row.
    pub fn record_rates(&mut self, t: f64, allocation: &AllocationMap) {
        for (service, rate) in &allocation.rates {
            let changed = self
                .last_rates
                .get(service)
                .map_or(true, |last| (last - rate).abs() > 0.0);
            if changed {
                self.rate_rows.push(RateRow {
                    t,
                    service: service.clone(),
                    rate_gbps: *rate,
                });
                self.last_rates.insert(service.clone(), *rate);
            }
        }
        let gone: Vec<String> = self
            .last_rates
            .keys()
            .filter(|s| !allocation.rates.contains_key(*s))
            .cloned()
            .collect();
        for service in gone {
            self.last_rates.remove(&service);
            self.rate_rows.push(RateRow {
                t,
                service,
                rate_gbps: 0.0,
            });
        }
    }

    pub fn record_links(&mut self, t: f64, allocation: &AllocationMap, topo: &Topology) {
        for (directed, usage) in &allocation.links {
            if topo.link(&directed.key()).is_none() {
                continue;
            }
            let key = directed.to_string();
            let value = (usage.priority_gbps, usage.best_effort_gbps);
            let changed = self.last_links.get(&key).map_or(true, |last| *last != value);
            if changed {
                self.link_rows.push(LinkRow {
                    t,
                    link: key.clone(),
                    priority_gbps: value.0,
                    best_effort_gbps: value.1,
                });
                self.last_links.insert(key, value);
            }
        }
    }

    pub fn record_violations(&mut self, t: f64, kind: AuditKind, violations: &[Violation]) {
        if violations.is_empty() {
            return;
        }
        match kind {
            AuditKind::CapReserve => self.cap_reserve_ok = false,
            AuditKind::SubnetUnique => self.subnet_unique_ok = false,
            AuditKind::RulesConsistent => self.rules_consistent_ok = false,
        }
        for violation in violations {
            self.violations
                .push(format!("t={t} {kind:?}: {violation}"));
        }
    }

    pub fn has_violations(&self) -> bool {
        !self.violations.is_empty()
    }

    /// Assemble the final report. Conservation findings come in here because
    /// they are only checkable once the run has ended.
    #[allow(clippy::too_many_arguments)]
    pub fn into_report(
        mut self,
        seed: u64,
        run_until: f64,
        dispatched_events: u64,
        services: BTreeMap<String, ServiceSummary>,
        failed_jobs: Vec<crate::transfer::FailedJob>,
        conservation_violations: Vec<String>,
        site_configs: BTreeMap<String, String>,
    ) -> RunReport {
        let conservation_ok = conservation_violations.is_empty();
        self.violations.extend(conservation_violations);
        let log_bytes = self.event_log.join("\n");
        RunReport {
            seed,
            run_until,
            dispatched_events,
            services,
            rate_series: self.rate_rows,
            link_series: self.link_rows,
            completions: self.completions,
            failed_jobs,
            action_errors: self.action_errors,
            audits: AuditSummary {
                cap_reserve_ok: self.cap_reserve_ok,
                subnet_unique_ok: self.subnet_unique_ok,
                rules_consistent_ok: self.rules_consistent_ok,
                conservation_ok,
                violations: self.violations,
            },
            site_configs,
            event_log: self.event_log,
            event_log_hash: format!("{:016x}", fnv1a64(log_bytes.as_bytes())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum AuditKind {
    CapReserve,
    SubnetUnique,
    RulesConsistent,
}
