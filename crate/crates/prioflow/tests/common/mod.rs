//! Shared test support: an independent brute-force allocation oracle and a
//! small two-site system builder.
#![allow(dead_code)]

use std::collections::BTreeMap;

use prioflow::orchestrator::FlowSpec;
use prioflow::rse::{Director, Endpoint, Preference, Protocol, Rse};
use prioflow::topology::{DirectedLink, Link, Site, SiteRole, Topology};

/// Brute-force progressive filling, written independently of the
/// implementation: every round rescans all constraints from scratch,
/// advances every unfrozen flow by the smallest uniform fill step, and
/// freezes flows on exhausted links or met demands. Demands are handled as
/// virtual single-flow links.
fn oracle_fill(
    flows: &[(String, Vec<DirectedLink>, f64, Option<f64>)],
    capacities: &BTreeMap<DirectedLink, f64>,
) -> BTreeMap<String, f64> {
    let mut rates: BTreeMap<String, f64> = flows
        .iter()
        .map(|(id, _, _, _)| (id.clone(), 0.0))
        .collect();
    let mut frozen: Vec<bool> = vec![false; flows.len()];

    loop {
        if frozen.iter().all(|f| *f) {
            break;
        }
        // Slack per link given everything allocated so far.
        let mut slack: BTreeMap<&DirectedLink, f64> = capacities
            .iter()
            .map(|(link, cap)| (link, *cap))
            .collect();
        for (id, hops, _, _) in flows {
            for hop in hops {
                *slack.get_mut(hop).expect("hop in capacity map") -= rates[id];
            }
        }
        // Pressure per link from unfrozen flows.
        let mut pressure: BTreeMap<&DirectedLink, f64> = BTreeMap::new();
        for (idx, (_, hops, weight, _)) in flows.iter().enumerate() {
            if frozen[idx] {
                continue;
            }
            for hop in hops {
                *pressure.entry(hop).or_insert(0.0) += weight;
            }
        }
        let mut step = f64::INFINITY;
        for (link, weight_sum) in &pressure {
            step = step.min(slack[*link].max(0.0) / weight_sum);
        }
        for (idx, (id, _, weight, demand)) in flows.iter().enumerate() {
            if frozen[idx] {
                continue;
            }
            if let Some(demand) = demand {
                step = step.min((demand - rates[id]).max(0.0) / weight);
            }
        }
        if !step.is_finite() {
            break;
        }
        for (idx, (id, _, weight, _)) in flows.iter().enumerate() {
            if !frozen[idx] {
                *rates.get_mut(id).unwrap() += weight * step;
            }
        }
        // Freeze pass, again from scratch.
        let mut slack_after: BTreeMap<&DirectedLink, f64> = capacities
            .iter()
            .map(|(link, cap)| (link, *cap))
            .collect();
        for (id, hops, _, _) in flows {
            for hop in hops {
                *slack_after.get_mut(hop).unwrap() -= rates[id];
            }
        }
        let mut any_frozen = false;
        for (idx, (id, hops, _, demand)) in flows.iter().enumerate() {
            if frozen[idx] {
                continue;
            }
            let at_demand = demand.is_some_and(|d| rates[id] >= d - 1e-9);
            let at_link = hops.iter().any(|hop| slack_after[hop] <= 1e-9);
            if at_demand || at_link {
                frozen[idx] = true;
                any_frozen = true;
            }
        }
        if !any_frozen {
            break;
        }
    }
    rates
}

fn directed_caps(topo: &Topology, manageable: bool) -> BTreeMap<DirectedLink, f64> {
    let mut caps = BTreeMap::new();
    for link in &topo.links {
        let cap = if manageable {
            link.capacity_gbps * link.manageable_fraction
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

/// Oracle for the full two-phase allocation: weighted max-min over
/// priority flows against manageable capacity, then unweighted max-min of
/// the best-effort flows over the per-link residual.
pub fn oracle_allocations(topo: &Topology, flows: &[FlowSpec]) -> BTreeMap<String, f64> {
    let hops_of = |flow: &FlowSpec| -> Vec<DirectedLink> { flow.path.hops().collect() };

    let priority: Vec<(String, Vec<DirectedLink>, f64, Option<f64>)> = flows
        .iter()
        .filter(|f| f.weight > 0)
        .map(|f| (f.flow_id.clone(), hops_of(f), f.weight as f64, f.demand))
        .collect();
    let mut rates = oracle_fill(&priority, &directed_caps(topo, true));

    let mut residual = directed_caps(topo, false);
    for (id, hops, _, _) in &priority {
        for hop in hops {
            let slot = residual.get_mut(hop).unwrap();
            *slot = (*slot - rates[id]).max(0.0);
        }
    }
    let best_effort: Vec<(String, Vec<DirectedLink>, f64, Option<f64>)> = flows
        .iter()
        .filter(|f| f.weight == 0)
        .map(|f| (f.flow_id.clone(), hops_of(f), 1.0, f.demand))
        .collect();
    rates.extend(oracle_fill(&best_effort, &residual));
    rates
}

/// Two sites connected by one link, one RSE per site with `directors`
/// directors each.
pub fn two_site_system(capacity: f64, fraction: f64, directors: usize) -> (Topology, Vec<Rse>) {
    let topo = Topology {
        sites: vec![
            Site {
                name: "CERN".into(),
                role: SiteRole::SourceSite,
            },
            Site {
                name: "FNAL".into(),
                role: SiteRole::DestinationSite,
            },
        ],
        links: vec![Link {
            a: "CERN".into(),
            b: "FNAL".into(),
            capacity_gbps: capacity,
            manageable_fraction: fraction,
        }],
    };
    let rse = |name: &str, site: &str, base: u32| Rse {
        name: name.into(),
        site: site.into(),
        endpoints: vec![Endpoint {
            protocol: Protocol::Webdavs,
            host: format!("redirector.{}", site.to_lowercase()),
            port: None,
            namespace_prefix: "/cms".into(),
            preferences: vec![Preference::ThirdPartyTransfer, Preference::Write],
        }],
        directors: (1..=directors)
            .map(|i| Director {
                id: format!("d{i}"),
                ipv6_subnet: format!("2001:db8:{base}:{i}::/64").parse().unwrap(),
                endpoint_host: format!("d{i}.{}", site.to_lowercase()),
            })
            .collect(),
        server_count: 10,
    };
    let rses = vec![rse("RSE_CERN", "CERN", 1), rse("RSE_FNAL", "FNAL", 2)];
    (topo, rses)
}
