//! The network-orchestration engine: computes end-to-end guaranteed rates
//! for priority flows under each link's manageable-capacity cap, leaves the
//! remainder to best-effort traffic, and manages provision / drain /
//! teardown of services.
//!
//! Allocation is weighted max-min fairness by progressive filling: all
//! active flows rise proportionally to their weights until a link or a
//! demand cap binds, the affected flows freeze, and filling continues for
//! the rest. Best-effort flows (weight 0) are filled in a second phase over
//! the per-link residual `capacity - priority_total`, so unused manageable
//! capacity is not wasted. Arithmetic is f64 with a fixed 1e-9 Gbps
//! tolerance.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::topology::{DirectedLink, Path, Topology};
use crate::{Error, Result};

/// Comparison slack for rates in Gbps (1e-9 Gbps = 1 bit/s).
pub const RATE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct FlowSpec {
    pub flow_id: String,
    pub path: Path,
    /// Positive weights take part in the priority phase; 0 is best-effort.
    pub weight: u32,
    /// Optional rate cap in Gbps; absent means unbounded.
    pub demand: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProvisionState {
    Active,
    Draining,
}

impl ProvisionState {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProvisionState::Active => "ACTIVE",
            ProvisionState::Draining => "DRAINING",
        }
    }
}

/// An end-to-end service held by the orchestrator.
#[derive(Debug, Clone, Serialize)]
pub struct ProvisionedService {
    pub service_id: String,
    pub flow: FlowSpec,
    pub state: ProvisionState,
    /// Current allocated rate in Gbps (for best-effort flows, the phase-2
    /// share).
    pub guaranteed_rate: f64,
    /// Cap applied while draining; at most the last ACTIVE rate.
    pub drain_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct LinkUsage {
    pub priority_gbps: f64,
    pub best_effort_gbps: f64,
}

/// Result of a global recomputation.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AllocationMap {
    pub rates: BTreeMap<String, f64>,
    pub links: BTreeMap<DirectedLink, LinkUsage>,
}

impl AllocationMap {
    pub fn rate_of(&self, flow_id: &str) -> f64 {
        self.rates.get(flow_id).copied().unwrap_or(0.0)
    }
}

/// Drain behavior knobs; values configurable per run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DrainPolicy {
    pub drain_fraction: f64,
    pub drain_floor_gbps: f64,
    pub drain_window_s: f64,
}

impl Default for DrainPolicy {
    fn default() -> Self {
        DrainPolicy {
            drain_fraction: 0.1,
            drain_floor_gbps: 1.0,
            drain_window_s: 600.0,
        }
    }
}

impl DrainPolicy {
    /// `max(floor, fraction * previous)`, clamped so a drain never exceeds
    /// the rate the service actually had.
    pub fn drain_rate_for(&self, previous_rate: f64) -> f64 {
        (self.drain_fraction * previous_rate)
            .max(self.drain_floor_gbps)
            .min(previous_rate)
    }
}

fn directed_capacities(topo: &Topology, manageable: bool) -> BTreeMap<DirectedLink, f64> {
    let mut caps = BTreeMap::new();
    for link in &topo.links {
        let cap = if manageable {
            link.manageable_capacity()
        } else {
            link.capacity_gbps
        };
        caps.insert(
            DirectedLink {
                from: link.a.clone(),
                to: link.b.clone(),
            },
            cap,
        );
        caps.insert(
            DirectedLink {
                from: link.b.clone(),
                to: link.a.clone(),
            },
            cap,
        );
    }
    caps
}

fn check_paths(topo: &Topology, flows: &[&FlowSpec]) -> Result<()> {
    for flow in flows {
        if flow.path.hop_count() == 0 {
            return Err(Error::InvalidRequest(format!(
                "flow {} has an empty path",
                flow.flow_id
            )));
        }
        for hop in flow.path.hops() {
            if topo.link(&hop.key()).is_none() {
                return Err(Error::InvalidRequest(format!(
                    "flow {} crosses unknown link {}",
                    flow.flow_id, hop
                )));
            }
        }
    }
    Ok(())
}

/// Progressive filling over one set of flows against per-directed-link
/// capacities. `weight_of` maps a flow to its filling weight (already
/// normalized: best-effort callers pass 1 for everyone).
fn progressive_fill(
    flows: &[&FlowSpec],
    capacities: &BTreeMap<DirectedLink, f64>,
    weight_of: impl Fn(&FlowSpec) -> f64,
) -> BTreeMap<String, f64> {
    let mut rates: BTreeMap<String, f64> = BTreeMap::new();
    let mut remaining = capacities.clone();
    let mut active: Vec<usize> = (0..flows.len()).collect();
    for flow in flows {
        rates.insert(flow.flow_id.clone(), 0.0);
    }

    while !active.is_empty() {
        // Weight pressure per link from the still-active flows.
        let mut link_weights: BTreeMap<&DirectedLink, f64> = BTreeMap::new();
        for &idx in &active {
            for hop in flows[idx].path.hops() {
                let (key, _) = remaining
                    .get_key_value(&hop)
                    .expect("path checked against topology");
                *link_weights.entry(key).or_insert(0.0) += weight_of(flows[idx]);
            }
        }

        // Smallest headroom per unit of fill level across link and demand
        // constraints decides how far this round can go.
        let mut delta = f64::INFINITY;
        for (link, weight_sum) in &link_weights {
            let slack = remaining[*link].max(0.0);
            delta = delta.min(slack / weight_sum);
        }
        for &idx in &active {
            if let Some(demand) = flows[idx].demand {
                let w = weight_of(flows[idx]);
                let slack = (demand - rates[&flows[idx].flow_id]).max(0.0);
                delta = delta.min(slack / w);
            }
        }
        debug_assert!(delta.is_finite(), "every flow crosses a capped link");

        let mut consumed: BTreeMap<DirectedLink, f64> = BTreeMap::new();
        for &idx in &active {
            let w = weight_of(flows[idx]);
            *rates.get_mut(&flows[idx].flow_id).unwrap() += w * delta;
            for hop in flows[idx].path.hops() {
                *consumed.entry(hop).or_insert(0.0) += w * delta;
            }
        }
        for (link, used) in consumed {
            *remaining.get_mut(&link).unwrap() -= used;
        }

        // Freeze flows on saturated links or at their demand caps.
        let before = active.len();
        active.retain(|&idx| {
            let flow = flows[idx];
            if let Some(demand) = flow.demand {
                if rates[&flow.flow_id] >= demand - RATE_EPS {
                    return false;
                }
            }
            !flow
                .path
                .hops()
                .any(|hop| remaining[&hop] <= RATE_EPS)
        });
        if active.len() == before {
            // Only possible through float noise at a boundary; force the
            // tightest flow out to guarantee termination.
            debug_assert!(false, "progressive filling made no progress");
            active.pop();
        }
    }
    rates
}

/// Two-phase allocation over an explicit flow set. Phase 1: weighted
/// max-min over priority flows against manageable capacity. Phase 2:
/// unweighted max-min over best-effort flows against the per-link residual.
pub fn compute_allocations(topo: &Topology, flows: &[FlowSpec]) -> Result<AllocationMap> {
    let all: Vec<&FlowSpec> = flows.iter().collect();
    check_paths(topo, &all)?;

    let priority: Vec<&FlowSpec> = flows.iter().filter(|f| f.weight > 0).collect();
    let best_effort: Vec<&FlowSpec> = flows.iter().filter(|f| f.weight == 0).collect();

    let manageable = directed_capacities(topo, true);
    let priority_rates = progressive_fill(&priority, &manageable, |f| f.weight as f64);

    let mut usage: BTreeMap<DirectedLink, LinkUsage> = directed_capacities(topo, false)
        .keys()
        .map(|k| (k.clone(), LinkUsage::default()))
        .collect();
    for flow in &priority {
        let rate = priority_rates[&flow.flow_id];
        for hop in flow.path.hops() {
            usage.get_mut(&hop).unwrap().priority_gbps += rate;
        }
    }

    // Residual left for unmanaged/best-effort traffic on each direction.
    let full = directed_capacities(topo, false);
    let residual: BTreeMap<DirectedLink, f64> = full
        .iter()
        .map(|(k, cap)| (k.clone(), (cap - usage[k].priority_gbps).max(0.0)))
        .collect();
    let best_effort_rates = progressive_fill(&best_effort, &residual, |_| 1.0);
    for flow in &best_effort {
        let rate = best_effort_rates[&flow.flow_id];
        for hop in flow.path.hops() {
            usage.get_mut(&hop).unwrap().best_effort_gbps += rate;
        }
    }

    let mut rates = priority_rates;
    rates.extend(best_effort_rates);
    Ok(AllocationMap {
        rates,
        links: usage,
    })
}

/// Registry of provisioned services plus the current allocation snapshot.
#[derive(Debug, Default)]
pub struct Orchestrator {
    services: BTreeMap<String, ProvisionedService>,
    allocation: AllocationMap,
}

impl Orchestrator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn allocation(&self) -> &AllocationMap {
        &self.allocation
    }

    pub fn services(&self) -> impl Iterator<Item = &ProvisionedService> {
        self.services.values()
    }

    pub fn service(&self, service_id: &str) -> Result<&ProvisionedService> {
        self.services
            .get(service_id)
            .ok_or_else(|| Error::UnknownService(service_id.to_string()))
    }

    pub fn rate_of(&self, service_id: &str) -> f64 {
        self.allocation.rate_of(service_id)
    }

    /// Flow set as the allocator sees it: draining services participate at
    /// weight 1 with their drain rate as a fixed demand, staying inside the
    /// manageable pool.
    fn flow_set(&self) -> Vec<FlowSpec> {
        self.services
            .values()
            .map(|svc| match svc.state {
                ProvisionState::Active => svc.flow.clone(),
                ProvisionState::Draining => FlowSpec {
                    flow_id: svc.flow.flow_id.clone(),
                    path: svc.flow.path.clone(),
                    weight: 1,
                    demand: svc.drain_rate,
                },
            })
            .collect()
    }

    /// Global recomputation; every service's rate may change.
    pub fn recompute(&mut self, topo: &Topology) -> Result<&AllocationMap> {
        let flows = self.flow_set();
        self.allocation = compute_allocations(topo, &flows)?;
        for svc in self.services.values_mut() {
            svc.guaranteed_rate = self.allocation.rate_of(&svc.service_id);
        }
        Ok(&self.allocation)
    }

    /// Provision a new service and recompute all rates.
    pub fn provision(&mut self, topo: &Topology, flow: FlowSpec) -> Result<&AllocationMap> {
        if self.services.contains_key(&flow.flow_id) {
            return Err(Error::DuplicateService(flow.flow_id));
        }
        check_paths(topo, &[&flow])?;
        let service_id = flow.flow_id.clone();
        self.services.insert(
            service_id,
            ProvisionedService {
                service_id: flow.flow_id.clone(),
                flow,
                state: ProvisionState::Active,
                guaranteed_rate: 0.0,
                drain_rate: None,
            },
        );
        self.recompute(topo)
    }

    /// Change a service's weight (0 demotes to best effort) and recompute.
    pub fn set_weight(&mut self, topo: &Topology, service_id: &str, weight: u32) -> Result<f64> {
        let svc = self
            .services
            .get_mut(service_id)
            .ok_or_else(|| Error::UnknownService(service_id.to_string()))?;
        if svc.state != ProvisionState::Active {
            return Err(Error::IllegalState {
                service: service_id.to_string(),
                state: svc.state.as_str().to_string(),
                op: "set_weight".to_string(),
            });
        }
        svc.flow.weight = weight;
        self.recompute(topo)?;
        Ok(self.rate_of(service_id))
    }

    /// Put `old_id` into DRAINING at the policy's reduced rate and bring up
    /// `new_flow` as a fresh ACTIVE service. The caller schedules the drain
    /// timeout at `now + policy.drain_window_s`.
    pub fn change_strategy(
        &mut self,
        topo: &Topology,
        old_id: &str,
        new_flow: FlowSpec,
        policy: &DrainPolicy,
    ) -> Result<f64> {
        if self.services.contains_key(&new_flow.flow_id) {
            return Err(Error::DuplicateService(new_flow.flow_id));
        }
        let old = self
            .services
            .get_mut(old_id)
            .ok_or_else(|| Error::UnknownService(old_id.to_string()))?;
        if old.state != ProvisionState::Active {
            return Err(Error::IllegalState {
                service: old_id.to_string(),
                state: old.state.as_str().to_string(),
                op: "change_strategy".to_string(),
            });
        }
        let drain_rate = policy.drain_rate_for(old.guaranteed_rate);
        old.state = ProvisionState::Draining;
        old.drain_rate = Some(drain_rate);

        check_paths(topo, &[&new_flow])?;
        self.services.insert(
            new_flow.flow_id.clone(),
            ProvisionedService {
                service_id: new_flow.flow_id.clone(),
                flow: new_flow,
                state: ProvisionState::Active,
                guaranteed_rate: 0.0,
                drain_rate: None,
            },
        );
        self.recompute(topo)?;
        Ok(drain_rate)
    }

    /// Remove a service (ACTIVE or DRAINING) and redistribute its bandwidth.
    pub fn teardown(&mut self, topo: &Topology, service_id: &str) -> Result<&AllocationMap> {
        if self.services.remove(service_id).is_none() {
            return Err(Error::UnknownService(service_id.to_string()));
        }
        self.recompute(topo)
    }

    /// Cap and reserve audit against the current allocation. Empty iff on
    /// every directed link the priority total stays within manageable
    /// capacity, which also keeps the best-effort residual at or above
    /// `(1 - fraction) * capacity`.
    pub fn audit(&self, topo: &Topology) -> Vec<crate::topology::Violation> {
        audit_allocation(topo, &self.allocation)
    }
}

/// Standalone cap/reserve audit usable on any allocation snapshot.
pub fn audit_allocation(
    topo: &Topology,
    allocation: &AllocationMap,
) -> Vec<crate::topology::Violation> {
    let mut violations = Vec::new();
    for (directed, usage) in &allocation.links {
        let link = match topo.link(&directed.key()) {
            Some(l) => l,
            None => continue,
        };
        let manageable = link.manageable_capacity();
        if usage.priority_gbps > manageable + RATE_EPS {
            violations.push(crate::topology::Violation {
                element: format!("link {directed}"),
                message: format!(
                    "priority total {:.9} exceeds manageable {:.9}",
                    usage.priority_gbps, manageable
                ),
            });
        }
        let residual = link.capacity_gbps - usage.priority_gbps;
        let reserve = (1.0 - link.manageable_fraction) * link.capacity_gbps;
        if residual + RATE_EPS < reserve {
            violations.push(crate::topology::Violation {
                element: format!("link {directed}"),
                message: format!("best-effort residual {residual:.9} below reserve {reserve:.9}"),
            });
        }
        if usage.priority_gbps + usage.best_effort_gbps > link.capacity_gbps + RATE_EPS {
            violations.push(crate::topology::Violation {
                element: format!("link {directed}"),
                message: "total usage exceeds capacity".to_string(),
            });
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Link, Site, SiteRole, Topology};

    fn line_topo(caps: &[(&str, &str, f64, f64)]) -> Topology {
        let mut names = Vec::new();
        for (a, b, _, _) in caps {
            for n in [a, b] {
                if !names.contains(&n.to_string()) {
                    names.push(n.to_string());
                }
            }
        }
        Topology {
            sites: names
                .into_iter()
                .map(|name| Site {
                    name,
                    role: SiteRole::Transit,
                })
                .collect(),
            links: caps
                .iter()
                .map(|(a, b, cap, frac)| Link {
                    a: a.to_string(),
                    b: b.to_string(),
                    capacity_gbps: *cap,
                    manageable_fraction: *frac,
                })
                .collect(),
        }
    }

    fn flow(id: &str, sites: &[&str], weight: u32, demand: Option<f64>) -> FlowSpec {
        FlowSpec {
            flow_id: id.to_string(),
            path: Path {
                sites: sites.iter().map(|s| s.to_string()).collect(),
            },
            weight,
            demand,
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    }

    #[test]
    fn single_priority_flow_gets_manageable_cap() {
        let topo = line_topo(&[("CERN", "FNAL", 1000.0, 0.8)]);
        let alloc =
            compute_allocations(&topo, &[flow("f1", &["CERN", "FNAL"], 1, None)]).unwrap();
        assert!(close(alloc.rate_of("f1"), 800.0));
        let usage = &alloc.links[&DirectedLink {
            from: "CERN".into(),
            to: "FNAL".into(),
        }];
        assert!(close(usage.priority_gbps, 800.0));
        // The reserved 20% stays free for unmanaged traffic.
        assert!(close(1000.0 - usage.priority_gbps, 200.0));
    }

    #[test]
    fn weighted_fill_with_demand_cap() {
        // One link with 80 manageable; weights 1, 1, 2; the middle flow is
        // capped at 10. Filling stalls flow 2 at level 10 per weight unit,
        // leaving 70 for weights 1 + 2.
        let topo = line_topo(&[("A", "B", 100.0, 0.8)]);
        let flows = [
            flow("f1", &["A", "B"], 1, None),
            flow("f2", &["A", "B"], 1, Some(10.0)),
            flow("f3", &["A", "B"], 2, None),
        ];
        let alloc = compute_allocations(&topo, &flows).unwrap();
        assert!(close(alloc.rate_of("f1"), 70.0 / 3.0), "{}", alloc.rate_of("f1"));
        assert!(close(alloc.rate_of("f2"), 10.0));
        assert!(close(alloc.rate_of("f3"), 140.0 / 3.0));
    }

    #[test]
    fn bottleneck_on_second_link_freezes_both() {
        // f1 crosses A-B (80 manageable) and B-C (40); f2 crosses B-C only.
        // B-C saturates at 20 + 20 and neither flow can grow further.
        let topo = line_topo(&[("A", "B", 100.0, 0.8), ("B", "C", 50.0, 0.8)]);
        let flows = [
            flow("f1", &["A", "B", "C"], 1, None),
            flow("f2", &["B", "C"], 1, None),
        ];
        let alloc = compute_allocations(&topo, &flows).unwrap();
        assert!(close(alloc.rate_of("f1"), 20.0));
        assert!(close(alloc.rate_of("f2"), 20.0));
    }

    #[test]
    fn opposite_directions_do_not_share_capacity() {
        let topo = line_topo(&[("A", "B", 100.0, 0.8)]);
        let flows = [
            flow("east", &["A", "B"], 1, None),
            flow("west", &["B", "A"], 1, None),
        ];
        let alloc = compute_allocations(&topo, &flows).unwrap();
        assert!(close(alloc.rate_of("east"), 80.0));
        assert!(close(alloc.rate_of("west"), 80.0));
    }

    #[test]
    fn best_effort_is_phase_separated_and_work_conserving() {
        let topo = line_topo(&[("A", "B", 1000.0, 0.8)]);
        let with_priority = [
            flow("p1", &["A", "B"], 1, None),
            flow("be", &["A", "B"], 0, None),
        ];
        let alloc = compute_allocations(&topo, &with_priority).unwrap();
        // Priority rates identical to a run without the best-effort flow.
        let alone = compute_allocations(&topo, &with_priority[..1]).unwrap();
        assert!(close(alloc.rate_of("p1"), alone.rate_of("p1")));
        assert!(close(alloc.rate_of("be"), 200.0));

        // A lone best-effort flow takes the whole link (work conserving).
        let only_be = [flow("be", &["A", "B"], 0, None)];
        let alloc = compute_allocations(&topo, &only_be).unwrap();
        assert!(close(alloc.rate_of("be"), 1000.0));
    }

    #[test]
    fn invalid_path_is_rejected() {
        let topo = line_topo(&[("A", "B", 100.0, 0.8)]);
        let bad = [flow("f", &["A", "X"], 1, None)];
        assert!(matches!(
            compute_allocations(&topo, &bad),
            Err(Error::InvalidRequest(_))
        ));
    }

    #[test]
    fn provision_splits_equally_and_teardown_restores() {
        let topo = line_topo(&[("CERN", "FNAL", 1000.0, 0.8)]);
        let mut orch = Orchestrator::new();
        orch.provision(&topo, flow("svc-1", &["CERN", "FNAL"], 1, None))
            .unwrap();
        assert!(close(orch.rate_of("svc-1"), 800.0));
        orch.provision(&topo, flow("svc-2", &["CERN", "FNAL"], 1, None))
            .unwrap();
        assert!(close(orch.rate_of("svc-1"), 400.0));
        assert!(close(orch.rate_of("svc-2"), 400.0));
        orch.teardown(&topo, "svc-1").unwrap();
        assert!(close(orch.rate_of("svc-2"), 800.0));
        assert!(matches!(
            orch.teardown(&topo, "svc-1"),
            Err(Error::UnknownService(_))
        ));
    }

    #[test]
    fn weight_change_reweights_shares() {
        let topo = line_topo(&[("A", "B", 1000.0, 0.8)]);
        let mut orch = Orchestrator::new();
        orch.provision(&topo, flow("s1", &["A", "B"], 1, None)).unwrap();
        orch.provision(&topo, flow("s2", &["A", "B"], 1, None)).unwrap();
        let new_rate = orch.set_weight(&topo, "s1", 3).unwrap();
        assert!(close(new_rate, 600.0));
        assert!(close(orch.rate_of("s2"), 200.0));
    }

    #[test]
    fn drain_rate_formula() {
        let policy = DrainPolicy::default();
        assert_eq!(policy.drain_rate_for(50.0), 5.0);
        assert_eq!(policy.drain_rate_for(5.0), 1.0, "floor binds");
        // Never drains above what the service actually had.
        assert_eq!(policy.drain_rate_for(0.5), 0.5);
    }

    #[test]
    fn change_strategy_drains_old_and_activates_new() {
        let topo = line_topo(&[("A", "B", 1000.0, 0.8)]);
        let mut orch = Orchestrator::new();
        orch.provision(&topo, flow("old", &["A", "B"], 1, None)).unwrap();
        let drain = orch
            .change_strategy(
                &topo,
                "old",
                flow("new", &["A", "B"], 1, None),
                &DrainPolicy::default(),
            )
            .unwrap();
        assert!(close(drain, 80.0), "10% of 800");
        let old = orch.service("old").unwrap();
        assert_eq!(old.state, ProvisionState::Draining);
        assert!(old.drain_rate.unwrap() <= 800.0);
        assert!(close(orch.rate_of("old"), 80.0), "drain demand is met");
        assert!(close(orch.rate_of("new"), 720.0), "rest goes to the new path");

        // A second change on the draining service is illegal.
        let err = orch
            .change_strategy(
                &topo,
                "old",
                flow("new2", &["A", "B"], 1, None),
                &DrainPolicy::default(),
            )
            .unwrap_err();
        assert!(matches!(err, Error::IllegalState { .. }));
    }

    #[test]
    fn audit_passes_on_computed_allocations() {
        let topo = line_topo(&[("A", "B", 100.0, 0.8), ("B", "C", 40.0, 0.5)]);
        let mut orch = Orchestrator::new();
        orch.provision(&topo, flow("s1", &["A", "B", "C"], 2, None)).unwrap();
        orch.provision(&topo, flow("s2", &["A", "B"], 1, None)).unwrap();
        orch.provision(&topo, flow("s3", &["A", "B", "C"], 0, None)).unwrap();
        assert!(orch.audit(&topo).is_empty());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_instance() -> impl Strategy<Value = (Topology, Vec<FlowSpec>)> {
            let sites = 2usize..=5;
            sites.prop_flat_map(|n| {
                let caps = proptest::collection::vec((10.0f64..500.0, 0.5f64..1.0), n - 1);
                let flows = proptest::collection::vec(
                    (0usize..(n - 1), 1u32..=10, proptest::option::of(1.0f64..200.0)),
                    1..=6,
                );
                (caps, flows).prop_map(move |(caps, flowspecs)| {
                    // Chain topology S0-S1-...-Sn; flow i runs from its start
                    // site to the chain end, so flows overlap on suffix links.
                    let names: Vec<String> = (0..n).map(|i| format!("S{i}")).collect();
                    let topo = Topology {
                        sites: names
                            .iter()
                            .map(|name| Site {
                                name: name.clone(),
                                role: SiteRole::Transit,
                            })
                            .collect(),
                        links: caps
                            .iter()
                            .enumerate()
                            .map(|(i, (cap, frac))| Link {
                                a: names[i].clone(),
                                b: names[i + 1].clone(),
                                capacity_gbps: *cap,
                                manageable_fraction: *frac,
                            })
                            .collect(),
                    };
                    let flows = flowspecs
                        .into_iter()
                        .enumerate()
                        .map(|(i, (start, weight, demand))| FlowSpec {
                            flow_id: format!("f{i}"),
                            path: Path {
                                sites: names[start..].to_vec(),
                            },
                            weight,
                            demand,
                        })
                        .collect();
                    (topo, flows)
                })
            })
        }

        proptest! {
            #[test]
            fn cap_and_reserve_hold((topo, flows) in arb_instance()) {
                let alloc = compute_allocations(&topo, &flows).unwrap();
                prop_assert!(audit_allocation(&topo, &alloc).is_empty());
            }

            #[test]
            fn weight_increase_never_hurts((topo, flows) in arb_instance(), pick in any::<proptest::sample::Index>()) {
                let alloc = compute_allocations(&topo, &flows).unwrap();
                let idx = pick.index(flows.len());
                let mut bumped = flows.clone();
                bumped[idx].weight += 1;
                let after = compute_allocations(&topo, &bumped).unwrap();
                let id = &flows[idx].flow_id;
                prop_assert!(
                    after.rate_of(id) >= alloc.rate_of(id) - 1e-9,
                    "rate dropped from {} to {}",
                    alloc.rate_of(id),
                    after.rate_of(id)
                );
            }
        }
    }
}
