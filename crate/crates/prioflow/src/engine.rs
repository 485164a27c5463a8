//! The simulation engine: wires the DMM, orchestrator, site resource
//! manager, and transfer engine onto the event kernel and exposes the
//! Rucio-facing operations.
//!
//! Every operation settles transfer progress up to the current virtual
//! time under the rates in force, applies its mutation, then runs a global
//! recomputation: rates refresh, steering rules update in place, job
//! completions reschedule, and the cap/reserve/uniqueness audits run. Rates
//! are piecewise-constant between these points, so byte accounting is
//! exact.

use std::collections::BTreeMap;

use log::debug;
use serde::Serialize;

use crate::dmm::{
    validate_priority, DataflowRequest, Dmm, ServiceResponse, ServiceState,
};
use crate::orchestrator::{DrainPolicy, FlowSpec, Orchestrator};
use crate::report::{AuditKind, Recorder, RunReport, ServiceSummary};
use crate::rse::{resolve_pfn_via_director, Preference, Rse};
use crate::sim::{Event, EventId, Kernel};
use crate::site_rm::{SiteRm, DSCP_PRIORITY};
use crate::topology::{validate_topology, find_path, Topology, Violation};
use crate::transfer::{FileSpec, TransferEngine};
use crate::units::gbps_to_bytes_per_sec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimConfig {
    pub batch_size: usize,
    pub max_active_jobs: usize,
    pub max_retries: u32,
    pub drain: DrainPolicy,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            batch_size: 50,
            max_active_jobs: 8,
            max_retries: 3,
            drain: DrainPolicy::default(),
        }
    }
}

/// Kernel event payloads.
#[derive(Debug, Clone)]
pub enum EventKind {
    /// Forced recompute checkpoint (also used for report sampling points).
    RateRecompute,
    /// Hand the next planned batch of a dataflow to its current service.
    BatchSubmit { dataflow_id: String },
    /// The earliest in-flight job just reached its size.
    JobComplete,
    /// A draining path hit its window with work still in flight.
    DrainTimeout { service_id: String },
    /// A timeline entry or fault injection.
    ScenarioAction { index: usize },
}

impl EventKind {
    fn describe(&self) -> String {
        match self {
            EventKind::RateRecompute => "rate-recompute".into(),
            EventKind::BatchSubmit { dataflow_id } => format!("batch-submit {dataflow_id}"),
            EventKind::JobComplete => "job-complete".into(),
            EventKind::DrainTimeout { service_id } => format!("drain-timeout {service_id}"),
            EventKind::ScenarioAction { index } => format!("scenario-action #{index}"),
        }
    }
}

/// A scheduled operation against the running system.
#[derive(Debug, Clone)]
pub enum ScenarioOp {
    Submit {
        request: DataflowRequest,
        files: Vec<FileSpec>,
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
    Fault {
        dataflow_id: String,
        job_index: usize,
    },
}

/// Read-only lifecycle snapshot for one service.
#[derive(Debug, Clone, Serialize)]
pub struct StatusSnapshot {
    pub service_id: String,
    pub request_id: String,
    pub state: String,
    pub best_effort: bool,
    pub rate_gbps: f64,
    pub bytes_moved: f64,
    pub total_bytes: u64,
    pub src_subnet: String,
    pub dst_subnet: String,
    pub drain_deadline: Option<f64>,
}

pub struct Simulation {
    topo: Topology,
    rse_by_site: BTreeMap<String, Rse>,
    config: SimConfig,
    seed: u64,
    dmm: Dmm,
    orch: Orchestrator,
    site_rm: SiteRm,
    transfers: TransferEngine,
    kernel: Kernel<EventKind>,
    recorder: Recorder,
    ops: Vec<ScenarioOp>,
    completion_event: Option<EventId>,
    drain_events: BTreeMap<String, EventId>,
}

impl Simulation {
    pub fn new(topo: Topology, rses: Vec<Rse>, config: SimConfig, seed: u64) -> Result<Self> {
        let rse_sites: Vec<&str> = rses.iter().map(|r| r.site.as_str()).collect();
        let violations = validate_topology(&topo, &rse_sites);
        if let Some(first) = violations.first() {
            return Err(Error::Scenario(format!("invalid topology: {first}")));
        }
        let mut rse_by_site = BTreeMap::new();
        for rse in &rses {
            if rse_by_site.insert(rse.site.clone(), rse.clone()).is_some() {
                return Err(Error::Scenario(format!(
                    "site {} has more than one RSE",
                    rse.site
                )));
            }
        }
        let site_rm = SiteRm::new(topo.sites.iter().map(|s| s.name.clone()));
        Ok(Simulation {
            dmm: Dmm::new(rses.iter()),
            topo,
            rse_by_site,
            site_rm,
            transfers: TransferEngine::new(
                config.batch_size,
                config.max_active_jobs,
                config.max_retries,
            ),
            config,
            seed,
            orch: Orchestrator::new(),
            kernel: Kernel::new(),
            recorder: Recorder::new(),
            ops: Vec::new(),
            completion_event: None,
            drain_events: BTreeMap::new(),
        })
    }

    pub fn now(&self) -> f64 {
        self.kernel.now()
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn dmm(&self) -> &Dmm {
        &self.dmm
    }

    pub fn orchestrator(&self) -> &Orchestrator {
        &self.orch
    }

    pub fn site_rm(&self) -> &SiteRm {
        &self.site_rm
    }

    pub fn transfers(&self) -> &TransferEngine {
        &self.transfers
    }

    pub fn current_service_id(&self, request_id: &str) -> Result<String> {
        self.dmm
            .current_service_id(request_id)
            .map(String::from)
            .ok_or_else(|| Error::UnknownService(format!("request {request_id}")))
    }

    fn service_rates_bytes(&self) -> BTreeMap<String, f64> {
        self.orch
            .allocation()
            .rates
            .iter()
            .map(|(id, gbps)| (id.clone(), gbps_to_bytes_per_sec(*gbps)))
            .collect()
    }

    fn settle_now(&mut self) {
        let rates = self.service_rates_bytes();
        self.transfers.settle(self.kernel.now(), &rates);
    }

    fn dscp_for(&self, service_id: &str) -> u8 {
        match self.orch.service(service_id) {
            Ok(svc) if svc.flow.weight > 0 => DSCP_PRIORITY,
            _ => 0,
        }
    }

    /// Global recomputation after any mutation: refresh rates and rules,
    /// reap completions, finish drains that emptied, reschedule the next
    /// completion event, audit, and record series rows.
    fn after_change(&mut self) -> Result<()> {
        loop {
            self.orch.recompute(&self.topo)?;
            let refresh: Vec<(String, f64)> = self
                .orch
                .services()
                .map(|svc| (svc.service_id.clone(), svc.guaranteed_rate))
                .collect();
            for (service_id, rate) in refresh {
                let dscp = self.dscp_for(&service_id);
                self.site_rm.refresh_service_rate(&service_id, rate, dscp);
            }

            let now = self.kernel.now();
            let outcome = self.transfers.reap(now);
            for (dataflow_id, batch_id) in &outcome.completed_batches {
                self.recorder
                    .log(now, format!("batch-complete {dataflow_id} {batch_id}"));
                if self.transfers.dataflow(dataflow_id)?.planned_remaining() > 0 {
                    self.kernel.schedule(
                        now,
                        EventKind::BatchSubmit {
                            dataflow_id: dataflow_id.clone(),
                        },
                    )?;
                }
            }
            for dataflow_id in &outcome.completed_dataflows {
                let bytes = self.transfers.dataflow(dataflow_id)?.total_bytes();
                self.recorder.record_completion(dataflow_id, now, bytes);
                self.recorder
                    .log(now, format!("dataflow-complete {dataflow_id} bytes={bytes}"));
            }

            // A draining path with nothing left in flight is done: the old
            // termination point gets disassembled right away.
            let drained: Vec<String> = self
                .dmm
                .services()
                .filter(|svc| {
                    svc.state == ServiceState::Draining
                        && self.transfers.service_drained(&svc.service_id)
                })
                .map(|svc| svc.service_id.clone())
                .collect();
            if drained.is_empty() {
                break;
            }
            for service_id in drained {
                self.teardown_service(&service_id, "drain-complete")?;
            }
        }

        if let Some(event) = self.completion_event.take() {
            self.kernel.cancel(event);
        }
        let rates = self.service_rates_bytes();
        if let Some(dt) = self.transfers.next_completion_dt(&rates) {
            let at = self.kernel.now() + dt;
            self.completion_event = Some(self.kernel.schedule(at, EventKind::JobComplete)?);
        }

        let now = self.kernel.now();
        let cap_reserve = self.orch.audit(&self.topo);
        self.recorder
            .record_violations(now, AuditKind::CapReserve, &cap_reserve);
        let subnet = self.dmm.subnet_audit();
        self.recorder
            .record_violations(now, AuditKind::SubnetUnique, &subnet);
        let rules = self.rules_audit();
        self.recorder
            .record_violations(now, AuditKind::RulesConsistent, &rules);
        self.recorder.record_rates(now, self.orch.allocation());
        self.recorder
            .record_links(now, self.orch.allocation(), &self.topo);
        Ok(())
    }

    /// Every installed steering rule must belong to a live (ACTIVE or
    /// DRAINING) provisioned service.
    fn rules_audit(&self) -> Vec<Violation> {
        self.site_rm
            .installed_service_ids()
            .into_iter()
            .filter(|id| self.orch.service(id).is_err())
            .map(|id| Violation {
                element: format!("service {id}"),
                message: "steering rules outlive the service".into(),
            })
            .collect()
    }

    /// Submit a dataflow request: negotiate directors at both ends,
    /// provision the WAN service, install site rules, and start the first
    /// batch. Atomic on failure: no pool or registry change survives an
    /// error.
    pub fn submit_request(
        &mut self,
        request: DataflowRequest,
        files: Vec<FileSpec>,
    ) -> Result<ServiceResponse> {
        self.settle_now();
        request.validate()?;
        if self.dmm.current_service_id(&request.request_id).is_some() {
            return Err(Error::InvalidRequest(format!(
                "request {} already submitted",
                request.request_id
            )));
        }
        let src_rse = self
            .rse_by_site
            .get(&request.src_site)
            .ok_or_else(|| Error::UnknownSite(request.src_site.clone()))?;
        let dst_rse = self
            .rse_by_site
            .get(&request.dst_site)
            .ok_or_else(|| Error::UnknownSite(request.dst_site.clone()))?;
        // Transfers are third-party copies; fail before touching any pool.
        src_rse.endpoint_for(Preference::ThirdPartyTransfer)?;
        dst_rse.endpoint_for(Preference::ThirdPartyTransfer)?;
        let path = find_path(&self.topo, &request.src_site, &request.dst_site)?;
        let src_rse_name = src_rse.name.clone();
        let dst_rse_name = dst_rse.name.clone();

        let service_id = self.dmm.mint_service_id();
        let (src_dir, dst_dir) = {
            let src_rse = &self.rse_by_site[&request.src_site];
            let dst_rse = &self.rse_by_site[&request.dst_site];
            self.dmm.negotiate(&service_id, src_rse, dst_rse)?
        };
        self.dmm.register_instance(
            &service_id,
            request.clone(),
            &src_rse_name,
            &dst_rse_name,
            src_dir.clone(),
            dst_dir.clone(),
            None,
        )?;
        let flow = FlowSpec {
            flow_id: service_id.clone(),
            path,
            weight: request.priority,
            demand: None,
        };
        if let Err(err) = self.orch.provision(&self.topo, flow) {
            self.dmm.abort_instance(&service_id)?;
            return Err(err);
        }
        if let Err(err) = self.transfers.create_dataflow(
            &request.request_id,
            files,
            &src_rse_name,
            &dst_rse_name,
            &service_id,
            request.bytes,
        ) {
            self.orch.teardown(&self.topo, &service_id)?;
            self.dmm.abort_instance(&service_id)?;
            return Err(err);
        }
        self.dmm.transition(&service_id, ServiceState::Provisioned)?;
        self.dmm.transition(&service_id, ServiceState::Active)?;
        self.dmm.bind_request(&request.request_id, &service_id);
        let rate = self.orch.rate_of(&service_id);
        self.site_rm.install_service_rules(
            &service_id,
            [
                (&request.src_site, src_dir.ipv6_subnet),
                (&request.dst_site, dst_dir.ipv6_subnet),
            ],
            rate,
            DSCP_PRIORITY,
        )?;
        let now = self.kernel.now();
        self.kernel.schedule(
            now,
            EventKind::BatchSubmit {
                dataflow_id: request.request_id.clone(),
            },
        )?;
        self.recorder.log(
            now,
            format!(
                "submit {service_id} request={} {}->{} priority={} rate={rate}",
                request.request_id, request.src_site, request.dst_site, request.priority
            ),
        );
        self.after_change()?;
        Ok(ServiceResponse {
            service_id: service_id.clone(),
            src_subnet: src_dir.ipv6_subnet,
            dst_subnet: dst_dir.ipv6_subnet,
            src_endpoint_host: src_dir.endpoint_host,
            dst_endpoint_host: dst_dir.endpoint_host,
            guaranteed_rate_gbps: self.orch.rate_of(&service_id),
        })
    }

    /// Adjust a service's relative priority. Subnets stay put; every
    /// affected service's rate recomputes at the current virtual time.
    pub fn update_priority(&mut self, service_id: &str, priority: u32) -> Result<f64> {
        self.settle_now();
        validate_priority(priority)?;
        let state = self.dmm.service(service_id)?.state;
        if state != ServiceState::Active {
            return Err(Error::IllegalState {
                service: service_id.to_string(),
                state: state.as_str().to_string(),
                op: "update_priority".into(),
            });
        }
        self.orch.set_weight(&self.topo, service_id, priority)?;
        self.dmm.set_priority(service_id, priority)?;
        let now = self.kernel.now();
        self.recorder
            .log(now, format!("update-priority {service_id} priority={priority}"));
        self.after_change()?;
        Ok(self.orch.rate_of(service_id))
    }

    /// Drop a service to best effort: guaranteed rate goes to zero and its
    /// traffic shares the unmanaged residual. Reversible via
    /// [`Simulation::update_priority`].
    pub fn demote_to_best_effort(&mut self, service_id: &str) -> Result<f64> {
        self.settle_now();
        let state = self.dmm.service(service_id)?.state;
        if state != ServiceState::Active {
            return Err(Error::IllegalState {
                service: service_id.to_string(),
                state: state.as_str().to_string(),
                op: "demote_to_best_effort".into(),
            });
        }
        self.orch.set_weight(&self.topo, service_id, 0)?;
        self.dmm.set_best_effort(service_id)?;
        let now = self.kernel.now();
        self.recorder.log(now, format!("demote {service_id}"));
        self.after_change()?;
        Ok(self.orch.rate_of(service_id))
    }

    /// FTS is done with this termination point: tear the path down, release
    /// both subnets, and retire the instance.
    pub fn mark_fts_done(&mut self, service_id: &str) -> Result<()> {
        self.settle_now();
        let state = self.dmm.service(service_id)?.state;
        if !matches!(state, ServiceState::Active | ServiceState::Draining) {
            return Err(Error::IllegalState {
                service: service_id.to_string(),
                state: state.as_str().to_string(),
                op: "mark_fts_done".into(),
            });
        }
        self.teardown_service(service_id, "fts-done")?;
        self.after_change()
    }

    /// Replace the path behind a request: the current instance drains at
    /// reduced bandwidth while a successor instance with freshly negotiated
    /// subnets carries all future batches.
    pub fn change_strategy(&mut self, service_id: &str) -> Result<ServiceResponse> {
        self.settle_now();
        let old = self.dmm.service(service_id)?.clone();
        if old.state != ServiceState::Active {
            return Err(Error::IllegalState {
                service: service_id.to_string(),
                state: old.state.as_str().to_string(),
                op: "change_strategy".into(),
            });
        }
        let successor_id = self.dmm.mint_service_id();
        let (src_dir, dst_dir) = {
            let src_rse = &self.rse_by_site[&old.request.src_site];
            let dst_rse = &self.rse_by_site[&old.request.dst_site];
            self.dmm.negotiate(&successor_id, src_rse, dst_rse)?
        };
        self.dmm.register_instance(
            &successor_id,
            old.request.clone(),
            &old.src_rse,
            &old.dst_rse,
            src_dir.clone(),
            dst_dir.clone(),
            Some(old.service_id.clone()),
        )?;
        let path = find_path(&self.topo, &old.request.src_site, &old.request.dst_site)?;
        let weight = if old.best_effort { 0 } else { old.priority };
        let flow = FlowSpec {
            flow_id: successor_id.clone(),
            path,
            weight,
            demand: None,
        };
        let drain_rate =
            match self
                .orch
                .change_strategy(&self.topo, service_id, flow, &self.config.drain)
            {
                Ok(rate) => rate,
                Err(err) => {
                    self.dmm.abort_instance(&successor_id)?;
                    return Err(err);
                }
            };
        self.dmm.transition(&successor_id, ServiceState::Provisioned)?;
        self.dmm.transition(&successor_id, ServiceState::Active)?;
        if old.best_effort {
            self.dmm.set_best_effort(&successor_id)?;
        } else {
            self.dmm.set_priority(&successor_id, old.priority)?;
        }
        self.dmm.transition(service_id, ServiceState::Draining)?;
        let deadline = self.kernel.now() + self.config.drain.drain_window_s;
        self.dmm.set_drain_deadline(service_id, deadline)?;
        self.dmm.set_successor(service_id, &successor_id)?;
        self.dmm.bind_request(&old.request.request_id, &successor_id);
        self.transfers
            .rebind(&old.request.request_id, &successor_id)?;
        self.site_rm.install_service_rules(
            &successor_id,
            [
                (&old.request.src_site, src_dir.ipv6_subnet),
                (&old.request.dst_site, dst_dir.ipv6_subnet),
            ],
            self.orch.rate_of(&successor_id),
            if weight > 0 { DSCP_PRIORITY } else { 0 },
        )?;
        let timeout = self
            .kernel
            .schedule(deadline, EventKind::DrainTimeout {
                service_id: service_id.to_string(),
            })?;
        self.drain_events.insert(service_id.to_string(), timeout);
        let now = self.kernel.now();
        self.recorder.log(
            now,
            format!(
                "change-strategy {service_id} -> {successor_id} drain_rate={drain_rate} deadline={deadline}"
            ),
        );
        self.after_change()?;
        Ok(ServiceResponse {
            service_id: successor_id.clone(),
            src_subnet: src_dir.ipv6_subnet,
            dst_subnet: dst_dir.ipv6_subnet,
            src_endpoint_host: src_dir.endpoint_host,
            dst_endpoint_host: dst_dir.endpoint_host,
            guaranteed_rate_gbps: self.orch.rate_of(&successor_id),
        })
    }

    /// Lifecycle snapshot plus transfer progress for one service instance.
    pub fn query_status(&mut self, service_id: &str) -> Result<StatusSnapshot> {
        self.settle_now();
        let svc = self.dmm.service(service_id)?;
        let status = self.transfers.dataflow_status(&svc.request.request_id)?;
        Ok(StatusSnapshot {
            service_id: svc.service_id.clone(),
            request_id: svc.request.request_id.clone(),
            state: svc.state.as_str().to_string(),
            best_effort: svc.best_effort,
            rate_gbps: self.orch.rate_of(service_id),
            bytes_moved: status.bytes_moved,
            total_bytes: status.total_bytes,
            src_subnet: svc.src_director.ipv6_subnet.to_string(),
            dst_subnet: svc.dst_director.ipv6_subnet.to_string(),
            drain_deadline: svc.drain_deadline,
        })
    }

    /// Current per-link utilization snapshot for the API layer.
    pub fn link_snapshot(&self) -> Vec<LinkSnapshot> {
        let allocation = self.orch.allocation();
        allocation
            .links
            .iter()
            .filter_map(|(directed, usage)| {
                let link = self.topo.link(&directed.key())?;
                Some(LinkSnapshot {
                    link: directed.to_string(),
                    capacity_gbps: link.capacity_gbps,
                    manageable_gbps: link.manageable_capacity(),
                    priority_gbps: usage.priority_gbps,
                    best_effort_gbps: usage.best_effort_gbps,
                })
            })
            .collect()
    }

    fn teardown_service(&mut self, service_id: &str, reason: &str) -> Result<usize> {
        let stranded = self.transfers.fail_in_flight(service_id, self.kernel.now());
        self.orch.teardown(&self.topo, service_id)?;
        self.site_rm.remove_service_rules(service_id)?;
        self.dmm.release_directors(service_id)?;
        self.dmm.transition(service_id, ServiceState::Released)?;
        if let Some(event) = self.drain_events.remove(service_id) {
            self.kernel.cancel(event);
        }
        let now = self.kernel.now();
        self.recorder.log(
            now,
            format!("teardown {service_id} reason={reason} stranded={stranded}"),
        );
        debug!("teardown {service_id} at {now}: reason={reason}, {stranded} jobs stranded");
        Ok(stranded)
    }

    fn handle_batch_submit(&mut self, dataflow_id: &str) -> Result<()> {
        self.settle_now();
        let service_id = self.transfers.dataflow(dataflow_id)?.service_id.clone();
        let state = self.dmm.service(&service_id)?.state;
        let now = self.kernel.now();
        if !matches!(state, ServiceState::Active | ServiceState::Draining) {
            // Rucio must not submit to a dead service; the batch stays
            // unsubmitted and the gap shows up in the final report.
            self.recorder.log(
                now,
                format!(
                    "batch-submit-rejected {dataflow_id} service={service_id} state={}",
                    state.as_str()
                ),
            );
            return Ok(());
        }
        if let Some(pfns) = self.resolve_batch_pfns(dataflow_id, &service_id)? {
            let batch_id =
                self.transfers
                    .submit_next_batch(dataflow_id, &service_id, pfns, now)?;
            self.recorder.log(
                now,
                format!("batch-submitted {dataflow_id} {batch_id} service={service_id}"),
            );
        }
        self.after_change()
    }

    fn resolve_batch_pfns(
        &self,
        dataflow_id: &str,
        service_id: &str,
    ) -> Result<Option<Vec<(String, String)>>> {
        let Some(files) = self.transfers.next_batch_files(dataflow_id)? else {
            return Ok(None);
        };
        let svc = self.dmm.service(service_id)?;
        let src_rse = &self.rse_by_site[&svc.request.src_site];
        let dst_rse = &self.rse_by_site[&svc.request.dst_site];
        let pairs = files
            .iter()
            .map(|file| {
                let src = resolve_pfn_via_director(
                    src_rse,
                    &svc.src_director,
                    &file.lfn,
                    Preference::ThirdPartyTransfer,
                )?;
                let dst = resolve_pfn_via_director(
                    dst_rse,
                    &svc.dst_director,
                    &file.lfn,
                    Preference::ThirdPartyTransfer,
                )?;
                Ok((src, dst))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(pairs))
    }

    fn handle_drain_timeout(&mut self, service_id: &str) -> Result<()> {
        self.settle_now();
        self.drain_events.remove(service_id);
        let state = self.dmm.service(service_id)?.state;
        if state == ServiceState::Draining {
            self.teardown_service(service_id, "drain-timeout")?;
        }
        self.after_change()
    }

    fn handle_fault(&mut self, dataflow_id: &str, job_index: usize) -> Result<()> {
        self.settle_now();
        let state = self
            .transfers
            .fail_job(dataflow_id, job_index, self.kernel.now())?;
        let now = self.kernel.now();
        self.recorder.log(
            now,
            format!("fault {dataflow_id} job={job_index} -> {}", state.as_str()),
        );
        self.after_change()
    }

    /// Queue an operation for execution at virtual time `t`.
    pub fn schedule_op(&mut self, t: f64, op: ScenarioOp) -> Result<()> {
        let index = self.ops.len();
        self.ops.push(op);
        self.kernel
            .schedule(t, EventKind::ScenarioAction { index })?;
        Ok(())
    }

    /// Queue a forced recompute/sampling point at virtual time `t`.
    pub fn schedule_checkpoint(&mut self, t: f64) -> Result<()> {
        self.kernel.schedule(t, EventKind::RateRecompute)?;
        Ok(())
    }

    fn execute_op(&mut self, index: usize) -> Result<()> {
        let op = self.ops[index].clone();
        let outcome = match op {
            ScenarioOp::Submit { request, files } => {
                self.submit_request(request, files).map(|_| ())
            }
            ScenarioOp::UpdatePriority {
                request_id,
                priority,
            } => self
                .current_service_id(&request_id)
                .and_then(|svc| self.update_priority(&svc, priority))
                .map(|_| ()),
            ScenarioOp::Demote { request_id } => self
                .current_service_id(&request_id)
                .and_then(|svc| self.demote_to_best_effort(&svc))
                .map(|_| ()),
            ScenarioOp::FtsDone { request_id } => self
                .current_service_id(&request_id)
                .and_then(|svc| self.mark_fts_done(&svc)),
            ScenarioOp::ChangeStrategy { request_id } => self
                .current_service_id(&request_id)
                .and_then(|svc| self.change_strategy(&svc))
                .map(|_| ()),
            ScenarioOp::Fault {
                dataflow_id,
                job_index,
            } => self.handle_fault(&dataflow_id, job_index),
        };
        if let Err(err) = outcome {
            let now = self.kernel.now();
            self.recorder.action_error(now, &err);
        }
        Ok(())
    }

    fn dispatch(&mut self, event: Event<EventKind>) -> Result<()> {
        self.recorder.log(
            event.fire_at,
            format!("seq={} {}", event.seq, event.payload.describe()),
        );
        match event.payload {
            EventKind::RateRecompute => {
                self.settle_now();
                self.after_change()
            }
            EventKind::BatchSubmit { dataflow_id } => self.handle_batch_submit(&dataflow_id),
            EventKind::JobComplete => {
                self.completion_event = None;
                self.settle_now();
                self.after_change()
            }
            EventKind::DrainTimeout { service_id } => self.handle_drain_timeout(&service_id),
            EventKind::ScenarioAction { index } => self.execute_op(index),
        }
    }

    /// Dispatch everything due up to `t_end`, then settle the clock there.
    pub fn run_until(&mut self, t_end: f64) -> Result<u64> {
        let mut dispatched = 0;
        while let Some(event) = self.kernel.pop_due(t_end) {
            self.dispatch(event)?;
            dispatched += 1;
        }
        self.kernel.advance_to(t_end)?;
        self.settle_now();
        self.after_change()?;
        Ok(dispatched)
    }

    /// Consume the simulation into its final report.
    pub fn into_report(self, run_until: f64) -> Result<RunReport> {
        // Conservation is only checkable at the end: a finished dataflow
        // must have moved exactly the bytes it was created with.
        let mut conservation = Vec::new();
        for df in self.transfers.dataflows() {
            if df.is_done() && df.bytes_moved() != df.total_bytes() as f64 {
                conservation.push(format!(
                    "dataflow {} moved {} of {} bytes",
                    df.dataflow_id,
                    df.bytes_moved(),
                    df.total_bytes()
                ));
            }
        }
        let mut site_configs = BTreeMap::new();
        for site in self.topo.sites.iter().map(|s| s.name.clone()) {
            let rendered = self.site_rm.render_site_config(&site)?;
            site_configs.insert(site, rendered);
        }
        let mut services = BTreeMap::new();
        for svc in self.dmm.services() {
            services.insert(
                svc.service_id.clone(),
                ServiceSummary {
                    request_id: svc.request.request_id.clone(),
                    state: svc.state.as_str().to_string(),
                    best_effort: svc.best_effort,
                    final_rate_gbps: self.orch.rate_of(&svc.service_id),
                    bytes_moved: self.transfers.bytes_moved_for_service(&svc.service_id),
                },
            );
        }
        let failed = self.transfers.failed_jobs().to_vec();
        let dispatched = self.kernel.dispatched();
        Ok(self.recorder.into_report(
            self.seed,
            run_until,
            dispatched,
            services,
            failed,
            conservation,
            site_configs,
        ))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LinkSnapshot {
    pub link: String,
    pub capacity_gbps: f64,
    pub manageable_gbps: f64,
    pub priority_gbps: f64,
    pub best_effort_gbps: f64,
}
