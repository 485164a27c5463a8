//! Rucio Storage Elements: protocol endpoints with namespaces and access
//! preferences, LFN to PFN translation, and the pool of XRootD directors
//! where each director owns one IPv6 subnet.
//!
//! Directors are preconfigured; binding a service to a subnet is just
//! moving a director between the free and allocated sides of the pool.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ipv6::Ipv6Prefix;
use crate::topology::Topology;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Gsiftp,
    Webdavs,
    Root,
}

impl Protocol {
    pub fn default_port(&self) -> u16 {
        match self {
            Protocol::Gsiftp => 2811,
            Protocol::Webdavs => 2880,
            Protocol::Root => 1094,
        }
    }

    pub fn scheme(&self) -> &'static str {
        match self {
            Protocol::Gsiftp => "gsiftp",
            Protocol::Webdavs => "webdavs",
            Protocol::Root => "root",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preference {
    Read,
    Write,
    ThirdPartyTransfer,
}

impl Preference {
    pub fn as_str(&self) -> &'static str {
        match self {
            Preference::Read => "read",
            Preference::Write => "write",
            Preference::ThirdPartyTransfer => "third-party-transfer",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Endpoint {
    pub protocol: Protocol,
    pub host: String,
    #[serde(default)]
    pub port: Option<u16>,
    pub namespace_prefix: String,
    pub preferences: Vec<Preference>,
}

impl Endpoint {
    pub fn port(&self) -> u16 {
        self.port.unwrap_or_else(|| self.protocol.default_port())
    }
}

/// An XRootD director: the cluster entry point owning one IPv6 subnet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Director {
    pub id: String,
    pub ipv6_subnet: Ipv6Prefix,
    pub endpoint_host: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rse {
    pub name: String,
    pub site: String,
    pub endpoints: Vec<Endpoint>,
    pub directors: Vec<Director>,
    pub server_count: u32,
}

impl Rse {
    /// First endpoint (declaration order) listing `preference`.
    pub fn endpoint_for(&self, preference: Preference) -> Result<&Endpoint> {
        self.endpoints
            .iter()
            .find(|e| e.preferences.contains(&preference))
            .ok_or_else(|| Error::NoEndpointForPreference {
                rse: self.name.clone(),
                preference: preference.as_str().to_string(),
            })
    }

    pub fn director(&self, id: &str) -> Option<&Director> {
        self.directors.iter().find(|d| d.id == id)
    }
}

/// Parse and validate an RSE document against a topology.
pub fn load_rse(doc: &str, topo: &Topology) -> Result<Rse> {
    let rse: Rse = serde_json::from_str(doc).map_err(|e| Error::json("rse document", e))?;
    validate_rse(&rse, topo)?;
    Ok(rse)
}

fn validate_rse(rse: &Rse, topo: &Topology) -> Result<()> {
    let ctx = format!("rse {}", rse.name);
    if !topo.has_site(&rse.site) {
        return Err(Error::UnknownSite(rse.site.clone()));
    }
    if rse.endpoints.is_empty() {
        return Err(Error::schema(&ctx, "at least one endpoint required"));
    }
    if rse.directors.is_empty() {
        return Err(Error::schema(&ctx, "at least one director required"));
    }
    if rse.server_count == 0 {
        return Err(Error::schema(&ctx, "server_count must be positive"));
    }
    for endpoint in &rse.endpoints {
        if endpoint.namespace_prefix.is_empty() {
            return Err(Error::schema(&ctx, "empty namespace_prefix"));
        }
        if endpoint.preferences.is_empty() {
            return Err(Error::schema(
                &ctx,
                format!("endpoint {} lists no preferences", endpoint.host),
            ));
        }
        if endpoint.port() == 0 {
            return Err(Error::schema(&ctx, "port must be in [1, 65535]"));
        }
    }
    // Endpoints serving the same protocol must not overlap in namespace.
    for (i, a) in rse.endpoints.iter().enumerate() {
        for b in rse.endpoints.iter().skip(i + 1) {
            if a.protocol == b.protocol
                && (a.namespace_prefix.starts_with(&b.namespace_prefix)
                    || b.namespace_prefix.starts_with(&a.namespace_prefix))
            {
                return Err(Error::schema(
                    &ctx,
                    format!(
                        "overlapping {} namespaces {} and {}",
                        a.protocol.scheme(),
                        a.namespace_prefix,
                        b.namespace_prefix
                    ),
                ));
            }
        }
    }
    let mut ids = BTreeSet::new();
    for director in &rse.directors {
        if !ids.insert(director.id.as_str()) {
            return Err(Error::schema(
                &ctx,
                format!("duplicate director id {}", director.id),
            ));
        }
    }
    for (i, a) in rse.directors.iter().enumerate() {
        for b in rse.directors.iter().skip(i + 1) {
            if a.ipv6_subnet.overlaps(&b.ipv6_subnet) {
                return Err(Error::schema(
                    &ctx,
                    format!(
                        "directors {} and {} own overlapping subnets ({} vs {})",
                        a.id, b.id, a.ipv6_subnet, b.ipv6_subnet
                    ),
                ));
            }
        }
    }
    Ok(())
}

/// Translate an LFN to a PFN through the first endpoint carrying the
/// requested preference: `protocol://host:port<namespace_prefix><lfn>`.
pub fn resolve_pfn(rse: &Rse, lfn: &str, preference: Preference) -> Result<String> {
    let endpoint = rse.endpoint_for(preference)?;
    Ok(format_pfn(endpoint, &endpoint.host, lfn))
}

/// PFN translation for a service-bound transfer: the chosen endpoint
/// supplies protocol, port, and namespace, while the director supplies the
/// data termination host.
pub fn resolve_pfn_via_director(
    rse: &Rse,
    director: &Director,
    lfn: &str,
    preference: Preference,
) -> Result<String> {
    let endpoint = rse.endpoint_for(preference)?;
    Ok(format_pfn(endpoint, &director.endpoint_host, lfn))
}

fn format_pfn(endpoint: &Endpoint, host: &str, lfn: &str) -> String {
    format!(
        "{}://{}:{}{}{}",
        endpoint.protocol.scheme(),
        host,
        endpoint.port(),
        endpoint.namespace_prefix,
        lfn
    )
}

/// Free/allocated bookkeeping for one RSE's directors. Allocation hands out
/// the lowest free director id first.
#[derive(Debug, Clone)]
pub struct SubnetPool {
    rse: String,
    free: BTreeSet<String>,
    allocated: BTreeMap<String, String>, // service id -> director id
}

impl SubnetPool {
    pub fn new(rse: &Rse) -> Self {
        SubnetPool {
            rse: rse.name.clone(),
            free: rse.directors.iter().map(|d| d.id.clone()).collect(),
            allocated: BTreeMap::new(),
        }
    }

    pub fn rse_name(&self) -> &str {
        &self.rse
    }

    pub fn free_ids(&self) -> impl Iterator<Item = &str> {
        self.free.iter().map(String::as_str)
    }

    pub fn allocations(&self) -> &BTreeMap<String, String> {
        &self.allocated
    }

    pub fn director_for(&self, service_id: &str) -> Option<&str> {
        self.allocated.get(service_id).map(String::as_str)
    }

    pub fn allocate(&mut self, service_id: &str) -> Result<String> {
        if self.allocated.contains_key(service_id) {
            return Err(Error::DuplicateService(service_id.to_string()));
        }
        let id = self
            .free
            .iter()
            .next()
            .cloned()
            .ok_or_else(|| Error::PoolExhausted {
                rse: self.rse.clone(),
            })?;
        self.free.remove(&id);
        self.allocated.insert(service_id.to_string(), id.clone());
        Ok(id)
    }

    pub fn release(&mut self, service_id: &str) -> Result<String> {
        let id = self
            .allocated
            .remove(service_id)
            .ok_or_else(|| Error::UnknownService(service_id.to_string()))?;
        self.free.insert(id.clone());
        Ok(id)
    }
}
