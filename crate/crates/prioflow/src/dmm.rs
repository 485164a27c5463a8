//! The Data Movement Manager: accepts dataflow requests, negotiates
//! director subnets with the RSEs at both ends, and tracks each service
//! instance through its lifecycle.
//!
//! Lifecycle edges are closed: REQUESTED -> NEGOTIATED -> PROVISIONED ->
//! ACTIVE -> (DRAINING ->)? RELEASED, plus any state -> FAILED. A strategy
//! change retires the current instance into DRAINING and hands the dataflow
//! to a freshly negotiated successor instance, mirroring how the old
//! termination point is kept alive only until FTS is done with it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ipv6::Ipv6Prefix;
use crate::rse::{Director, Rse, SubnetPool};
use crate::{Error, Result};

pub const MIN_PRIORITY: u32 = 1;
pub const MAX_PRIORITY: u32 = 100;

/// What Rucio sends: amount, endpoints, and a relative priority weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataflowRequest {
    pub request_id: String,
    pub bytes: u64,
    pub src_site: String,
    pub dst_site: String,
    pub priority: u32,
}

impl DataflowRequest {
    pub fn validate(&self) -> Result<()> {
        if self.request_id.is_empty() {
            return Err(Error::InvalidRequest("empty request_id".into()));
        }
        if self.bytes == 0 {
            return Err(Error::InvalidRequest("bytes must be positive".into()));
        }
        if self.src_site == self.dst_site {
            return Err(Error::InvalidRequest(format!(
                "src and dst must differ (both {})",
                self.src_site
            )));
        }
        validate_priority(self.priority)?;
        Ok(())
    }
}

pub fn validate_priority(priority: u32) -> Result<()> {
    if !(MIN_PRIORITY..=MAX_PRIORITY).contains(&priority) {
        return Err(Error::InvalidRequest(format!(
            "priority {priority} outside [{MIN_PRIORITY}, {MAX_PRIORITY}]"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ServiceState {
    Requested,
    Negotiated,
    Provisioned,
    Active,
    Draining,
    Released,
    Failed,
}

impl ServiceState {
    pub fn as_str(&self) -> &'static str {
        match self {
            ServiceState::Requested => "REQUESTED",
            ServiceState::Negotiated => "NEGOTIATED",
            ServiceState::Provisioned => "PROVISIONED",
            ServiceState::Active => "ACTIVE",
            ServiceState::Draining => "DRAINING",
            ServiceState::Released => "RELEASED",
            ServiceState::Failed => "FAILED",
        }
    }
}

/// The declared transition relation; anything else is a bug.
pub fn transition_is_legal(from: ServiceState, to: ServiceState) -> bool {
    use ServiceState::*;
    matches!(
        (from, to),
        (Requested, Negotiated)
            | (Negotiated, Provisioned)
            | (Provisioned, Active)
            | (Active, Draining)
            | (Active, Released)
            | (Draining, Released)
            | (_, Failed)
    )
}

/// DMM-side record binding a request to allocated subnets and a
/// provisioned WAN service.
#[derive(Debug, Clone, Serialize)]
pub struct ServiceInstance {
    pub service_id: String,
    pub request: DataflowRequest,
    pub state: ServiceState,
    pub src_rse: String,
    pub dst_rse: String,
    pub src_director: Director,
    pub dst_director: Director,
    /// Live weight; starts at the request priority, may be updated.
    pub priority: u32,
    pub best_effort: bool,
    pub drain_deadline: Option<f64>,
    pub predecessor: Option<String>,
    pub successor: Option<String>,
}

/// The subnet half of a service response, as reported back to Rucio.
#[derive(Debug, Clone, Serialize)]
pub struct ServiceResponse {
    pub service_id: String,
    pub src_subnet: Ipv6Prefix,
    pub dst_subnet: Ipv6Prefix,
    pub src_endpoint_host: String,
    pub dst_endpoint_host: String,
    pub guaranteed_rate_gbps: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransitionRecord {
    pub from: ServiceState,
    pub to: ServiceState,
}

#[derive(Debug, Default)]
pub struct Dmm {
    services: BTreeMap<String, ServiceInstance>,
    pools: BTreeMap<String, SubnetPool>,
    current_by_request: BTreeMap<String, String>,
    transitions: Vec<(String, TransitionRecord)>,
    next_id: u64,
}

impl Dmm {
    pub fn new<'a>(rses: impl IntoIterator<Item = &'a Rse>) -> Self {
        let pools = rses
            .into_iter()
            .map(|rse| (rse.name.clone(), SubnetPool::new(rse)))
            .collect();
        Dmm {
            services: BTreeMap::new(),
            pools,
            current_by_request: BTreeMap::new(),
            transitions: Vec::new(),
            next_id: 1,
        }
    }

    pub fn mint_service_id(&mut self) -> String {
        let id = format!("svc-{}", self.next_id);
        self.next_id += 1;
        id
    }

    pub fn pool(&self, rse: &str) -> Option<&SubnetPool> {
        self.pools.get(rse)
    }

    pub fn pools(&self) -> impl Iterator<Item = &SubnetPool> {
        self.pools.values()
    }

    pub fn service(&self, service_id: &str) -> Result<&ServiceInstance> {
        self.services
            .get(service_id)
            .ok_or_else(|| Error::UnknownService(service_id.to_string()))
    }

    pub fn services(&self) -> impl Iterator<Item = &ServiceInstance> {
        self.services.values()
    }

    /// The instance currently serving a request (follows successions).
    pub fn current_service_id(&self, request_id: &str) -> Option<&str> {
        self.current_by_request.get(request_id).map(String::as_str)
    }

    pub fn transitions(&self) -> &[(String, TransitionRecord)] {
        &self.transitions
    }

    /// Move a service along a declared lifecycle edge.
    pub fn transition(&mut self, service_id: &str, to: ServiceState) -> Result<()> {
        let svc = self
            .services
            .get_mut(service_id)
            .ok_or_else(|| Error::UnknownService(service_id.to_string()))?;
        let from = svc.state;
        if !transition_is_legal(from, to) {
            return Err(Error::IllegalState {
                service: service_id.to_string(),
                state: from.as_str().to_string(),
                op: format!("transition to {}", to.as_str()),
            });
        }
        svc.state = to;
        self.transitions
            .push((service_id.to_string(), TransitionRecord { from, to }));
        Ok(())
    }

    /// Allocate one director at each end atomically: if the destination
    /// pool is exhausted the source allocation rolls back and neither pool
    /// changes.
    pub fn negotiate(
        &mut self,
        service_id: &str,
        src_rse: &Rse,
        dst_rse: &Rse,
    ) -> Result<(Director, Director)> {
        let src_pool = self
            .pools
            .get_mut(&src_rse.name)
            .ok_or_else(|| Error::UnknownSite(src_rse.site.clone()))?;
        let src_id = src_pool.allocate(service_id)?;
        let dst_result = self
            .pools
            .get_mut(&dst_rse.name)
            .ok_or_else(|| Error::UnknownSite(dst_rse.site.clone()))
            .and_then(|pool| pool.allocate(service_id));
        let dst_id = match dst_result {
            Ok(id) => id,
            Err(err) => {
                self.pools
                    .get_mut(&src_rse.name)
                    .expect("pool existed above")
                    .release(service_id)
                    .expect("allocation just made");
                return Err(err);
            }
        };
        let src_dir = src_rse.director(&src_id).expect("pool ids come from rse").clone();
        let dst_dir = dst_rse.director(&dst_id).expect("pool ids come from rse").clone();
        Ok((src_dir, dst_dir))
    }

    /// Register a freshly negotiated instance in REQUESTED state and walk
    /// it to NEGOTIATED.
    #[allow(clippy::too_many_arguments)]
    pub fn register_instance(
        &mut self,
        service_id: &str,
        request: DataflowRequest,
        src_rse: &str,
        dst_rse: &str,
        src_director: Director,
        dst_director: Director,
        predecessor: Option<String>,
    ) -> Result<()> {
        let priority = request.priority;
        self.services.insert(
            service_id.to_string(),
            ServiceInstance {
                service_id: service_id.to_string(),
                request,
                state: ServiceState::Requested,
                src_rse: src_rse.to_string(),
                dst_rse: dst_rse.to_string(),
                src_director,
                dst_director,
                priority,
                best_effort: false,
                drain_deadline: None,
                predecessor,
                successor: None,
            },
        );
        self.transition(service_id, ServiceState::Negotiated)
    }

    /// Drop an instance that failed mid-setup, returning its directors.
    pub fn abort_instance(&mut self, service_id: &str) -> Result<()> {
        self.release_directors(service_id)?;
        self.services.remove(service_id);
        Ok(())
    }

    /// Return both directors to their pools.
    pub fn release_directors(&mut self, service_id: &str) -> Result<()> {
        let (src_rse, dst_rse) = {
            let svc = self.service(service_id)?;
            (svc.src_rse.clone(), svc.dst_rse.clone())
        };
        for rse in [src_rse, dst_rse] {
            self.pools
                .get_mut(&rse)
                .expect("pools cover all registered rses")
                .release(service_id)?;
        }
        Ok(())
    }

    pub fn bind_request(&mut self, request_id: &str, service_id: &str) {
        self.current_by_request
            .insert(request_id.to_string(), service_id.to_string());
    }

    pub fn set_priority(&mut self, service_id: &str, priority: u32) -> Result<()> {
        let svc = self
            .services
            .get_mut(service_id)
            .ok_or_else(|| Error::UnknownService(service_id.to_string()))?;
        svc.priority = priority;
        svc.best_effort = false;
        Ok(())
    }

    pub fn set_best_effort(&mut self, service_id: &str) -> Result<()> {
        let svc = self
            .services
            .get_mut(service_id)
            .ok_or_else(|| Error::UnknownService(service_id.to_string()))?;
        svc.best_effort = true;
        Ok(())
    }

    pub fn set_drain_deadline(&mut self, service_id: &str, deadline: f64) -> Result<()> {
        let svc = self
            .services
            .get_mut(service_id)
            .ok_or_else(|| Error::UnknownService(service_id.to_string()))?;
        svc.drain_deadline = Some(deadline);
        Ok(())
    }

    pub fn set_successor(&mut self, service_id: &str, successor: &str) -> Result<()> {
        let svc = self
            .services
            .get_mut(service_id)
            .ok_or_else(|| Error::UnknownService(service_id.to_string()))?;
        svc.successor = Some(successor.to_string());
        Ok(())
    }

    /// Subnet-uniqueness sweep: no two live services may hold the same
    /// director within one RSE. The pool structure makes this impossible by
    /// construction; the sweep guards against regressions.
    pub fn subnet_audit(&self) -> Vec<crate::topology::Violation> {
        let mut violations = Vec::new();
        for pool in self.pools.values() {
            let mut seen = BTreeMap::new();
            for (service, director) in pool.allocations() {
                if let Some(prior) = seen.insert(director.clone(), service.clone()) {
                    violations.push(crate::topology::Violation {
                        element: format!("rse {}", pool.rse_name()),
                        message: format!(
                            "director {director} allocated to both {prior} and {service}"
                        ),
                    });
                }
            }
        }
        violations
    }
}
