//! Site Resource Manager: the per-site steering state binding an IPv6
//! subnet to a WAN service. Three rule kinds per site and service (an edge
//! router policy route, a DTN traffic-control entry, and a DTN packet
//! mark), plus a one-time top-of-rack queue configuration per site.
//!
//! Rate changes refresh rules in place; rule identity never changes over a
//! service's lifetime, so refreshes cannot disturb data movement.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::ipv6::Ipv6Prefix;
use crate::{Error, Result};

/// Expedited-forwarding code point for priority flows; best effort is 0.
pub const DSCP_PRIORITY: u8 = 46;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleScope {
    DtnPacketMark,
    DtnTrafficControl,
    EdgeRouterPolicyRoute,
}

impl RuleScope {
    pub const ALL: [RuleScope; 3] = [
        RuleScope::DtnPacketMark,
        RuleScope::DtnTrafficControl,
        RuleScope::EdgeRouterPolicyRoute,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RuleScope::DtnPacketMark => "dtn-packet-mark",
            RuleScope::DtnTrafficControl => "dtn-traffic-control",
            RuleScope::EdgeRouterPolicyRoute => "edge-router-policy-route",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteeringRule {
    pub site: String,
    pub subnet: Ipv6Prefix,
    pub wan_service_id: String,
    pub scope: RuleScope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DtnQosEntry {
    pub subnet: Ipv6Prefix,
    pub rate_limit_gbps: f64,
    pub dscp_mark: u8,
}

/// One-time top-of-rack queue map: DSCP class to egress queue priority.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TorQueueConfig {
    pub site: String,
    pub queues: BTreeMap<u8, u8>,
}

#[derive(Debug, Clone, Serialize)]
struct InstalledService {
    subnet: Ipv6Prefix,
    qos: DtnQosEntry,
}

#[derive(Debug, Default)]
struct SiteState {
    tor: Option<TorQueueConfig>,
    services: BTreeMap<String, InstalledService>,
}

/// Steering state for every site in the topology.
#[derive(Debug, Default)]
pub struct SiteRm {
    sites: BTreeMap<String, SiteState>,
}

impl SiteRm {
    pub fn new(site_names: impl IntoIterator<Item = String>) -> Self {
        SiteRm {
            sites: site_names
                .into_iter()
                .map(|name| (name, SiteState::default()))
                .collect(),
        }
    }

    fn site_mut(&mut self, site: &str) -> Result<&mut SiteState> {
        self.sites
            .get_mut(site)
            .ok_or_else(|| Error::UnknownSite(site.to_string()))
    }

    /// Install the three per-site rules at both ends of a service. The ToR
    /// queue map goes in once per site the first time any service lands
    /// there. Re-installing an already-installed service is rejected.
    pub fn install_service_rules(
        &mut self,
        service_id: &str,
        ends: [(&str, Ipv6Prefix); 2],
        rate_gbps: f64,
        dscp: u8,
    ) -> Result<()> {
        for (site, _) in ends {
            let state = self.site_mut(site)?;
            if state.services.contains_key(service_id) {
                return Err(Error::DuplicateInstall(service_id.to_string()));
            }
        }
        for (site, subnet) in ends {
            let state = self.site_mut(site)?;
            if state.tor.is_none() {
                state.tor = Some(TorQueueConfig {
                    site: site.to_string(),
                    queues: [(DSCP_PRIORITY, 7), (0, 1)].into_iter().collect(),
                });
            }
            state.services.insert(
                service_id.to_string(),
                InstalledService {
                    subnet,
                    qos: DtnQosEntry {
                        subnet,
                        rate_limit_gbps: rate_gbps,
                        dscp_mark: dscp,
                    },
                },
            );
        }
        Ok(())
    }

    /// Explicit ToR write; a second write for the same site is rejected.
    pub fn install_tor_config(&mut self, site: &str, queues: BTreeMap<u8, u8>) -> Result<()> {
        let state = self.site_mut(site)?;
        if state.tor.is_some() {
            return Err(Error::DuplicateInstall(format!("tor-queues at {site}")));
        }
        state.tor = Some(TorQueueConfig {
            site: site.to_string(),
            queues,
        });
        Ok(())
    }

    /// Update the rate (and marking class) on a live service's rules without
    /// touching rule identity. Unknown services are ignored so a global
    /// refresh can sweep every allocation entry.
    pub fn refresh_service_rate(&mut self, service_id: &str, rate_gbps: f64, dscp: u8) {
        for state in self.sites.values_mut() {
            if let Some(installed) = state.services.get_mut(service_id) {
                installed.qos.rate_limit_gbps = rate_gbps;
                installed.qos.dscp_mark = dscp;
            }
        }
    }

    /// Drop every rule the service holds, at both sites. The one-time ToR
    /// config stays. Returns the number of rules removed.
    pub fn remove_service_rules(&mut self, service_id: &str) -> Result<usize> {
        let mut removed = 0;
        for state in self.sites.values_mut() {
            if state.services.remove(service_id).is_some() {
                removed += RuleScope::ALL.len();
            }
        }
        if removed == 0 {
            return Err(Error::UnknownService(service_id.to_string()));
        }
        Ok(removed)
    }

    /// Steering rules currently installed at a site, sorted by
    /// (scope, subnet).
    pub fn rules_at(&self, site: &str) -> Result<Vec<(SteeringRule, DtnQosEntry)>> {
        let state = self
            .sites
            .get(site)
            .ok_or_else(|| Error::UnknownSite(site.to_string()))?;
        let mut rules = Vec::new();
        for (service_id, installed) in &state.services {
            for scope in RuleScope::ALL {
                rules.push((
                    SteeringRule {
                        site: site.to_string(),
                        subnet: installed.subnet,
                        wan_service_id: service_id.clone(),
                        scope,
                    },
                    installed.qos,
                ));
            }
        }
        rules.sort_by(|(a, _), (b, _)| (a.scope, a.subnet).cmp(&(b.scope, b.subnet)));
        Ok(rules)
    }

    pub fn active_rule_count(&self, site: &str) -> Result<usize> {
        Ok(self.rules_at(site)?.len())
    }

    /// Service ids with rules installed anywhere (for consistency sweeps).
    pub fn installed_service_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sites
            .values()
            .flat_map(|s| s.services.keys().cloned())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn tor_config(&self, site: &str) -> Option<&TorQueueConfig> {
        self.sites.get(site).and_then(|s| s.tor.as_ref())
    }

    /// Deterministic textual rendering of all rules at a site: one rule per
    /// line, sorted by (scope, subnet).
    pub fn render_site_config(&self, site: &str) -> Result<String> {
        let state = self
            .sites
            .get(site)
            .ok_or_else(|| Error::UnknownSite(site.to_string()))?;
        let mut out = String::new();
        writeln!(out, "# site {site}").unwrap();
        if let Some(tor) = &state.tor {
            for (dscp, queue) in &tor.queues {
                writeln!(out, "# tor-queue dscp={dscp} queue={queue}").unwrap();
            }
        }
        for (rule, qos) in self.rules_at(site)? {
            writeln!(
                out,
                "{} subnet={} service={} rate_gbps={} dscp={}",
                rule.scope.as_str(),
                rule.subnet,
                rule.wan_service_id,
                qos.rate_limit_gbps,
                qos.dscp_mark
            )
            .unwrap();
        }
        Ok(out)
    }

    pub fn site_names(&self) -> impl Iterator<Item = &str> {
        self.sites.keys().map(String::as_str)
    }
}
