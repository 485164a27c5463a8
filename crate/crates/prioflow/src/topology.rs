//! Sites and WAN links with per-link manageable fractions, plus
//! deterministic minimum-hop path computation.
//!
//! Links are bidirectional; capacity applies independently per direction.
//! The manageable fraction (default 0.8) bounds what the orchestrator may
//! hand to priority services on that link; the remainder is always left to
//! unmanaged best-effort traffic.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_MANAGEABLE_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SiteRole {
    SourceSite,
    DestinationSite,
    #[default]
    Transit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Site {
    pub name: String,
    #[serde(default)]
    pub role: SiteRole,
}

fn default_fraction() -> f64 {
    DEFAULT_MANAGEABLE_FRACTION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Link {
    pub a: String,
    pub b: String,
    pub capacity_gbps: f64,
    #[serde(default = "default_fraction")]
    pub manageable_fraction: f64,
}

impl Link {
    /// Capacity available to orchestrated priority services, in Gbps.
    pub fn manageable_capacity(&self) -> f64 {
        self.capacity_gbps * self.manageable_fraction
    }

    pub fn key(&self) -> LinkKey {
        LinkKey::new(&self.a, &self.b)
    }
}

/// Canonical (order-independent) identity of a link.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkKey(pub String, pub String);

impl LinkKey {
    pub fn new(a: &str, b: &str) -> Self {
        if a <= b {
            LinkKey(a.to_string(), b.to_string())
        } else {
            LinkKey(b.to_string(), a.to_string())
        }
    }
}

impl fmt::Display for LinkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}--{}", self.0, self.1)
    }
}

/// One direction of travel over a link; allocation is per direction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DirectedLink {
    pub from: String,
    pub to: String,
}

impl DirectedLink {
    pub fn key(&self) -> LinkKey {
        LinkKey::new(&self.from, &self.to)
    }
}

impl fmt::Display for DirectedLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

/// A simple path as the ordered sequence of sites from source to
/// destination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Path {
    pub sites: Vec<String>,
}

impl Path {
    pub fn hop_count(&self) -> usize {
        self.sites.len().saturating_sub(1)
    }

    pub fn hops(&self) -> impl Iterator<Item = DirectedLink> + '_ {
        self.sites.windows(2).map(|pair| DirectedLink {
            from: pair[0].clone(),
            to: pair[1].clone(),
        })
    }

    pub fn source(&self) -> &str {
        self.sites.first().map(String::as_str).unwrap_or("")
    }

    pub fn destination(&self) -> &str {
        self.sites.last().map(String::as_str).unwrap_or("")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Topology {
    pub sites: Vec<Site>,
    pub links: Vec<Link>,
}

/// A named invariant violation. Violations are data, not errors: callers
/// decide whether to abort.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub element: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.message)
    }
}

impl Topology {
    pub fn site(&self, name: &str) -> Option<&Site> {
        self.sites.iter().find(|s| s.name == name)
    }

    pub fn has_site(&self, name: &str) -> bool {
        self.site(name).is_some()
    }

    pub fn link(&self, key: &LinkKey) -> Option<&Link> {
        self.links.iter().find(|l| l.key() == *key)
    }

    /// Neighbors of `site`, sorted by name for deterministic traversal.
    fn neighbors(&self, site: &str) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .links
            .iter()
            .filter_map(|l| {
                if l.a == site {
                    Some(l.b.as_str())
                } else if l.b == site {
                    Some(l.a.as_str())
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Hop distance from every site to `target` (BFS).
    fn distances_to(&self, target: &str) -> BTreeMap<String, usize> {
        let mut dist = BTreeMap::new();
        dist.insert(target.to_string(), 0usize);
        let mut queue = VecDeque::new();
        queue.push_back(target.to_string());
        while let Some(site) = queue.pop_front() {
            let d = dist[&site];
            for next in self.neighbors(&site) {
                if !dist.contains_key(next) {
                    dist.insert(next.to_string(), d + 1);
                    queue.push_back(next.to_string());
                }
            }
        }
        dist
    }
}

/// Parse and validate a topology document.
pub fn load_topology(doc: &str) -> Result<Topology> {
    let topo: Topology =
        serde_json::from_str(doc).map_err(|e| Error::json("topology document", e))?;
    let violations = validate_topology(&topo, &[]);
    if let Some(first) = violations.first() {
        return Err(Error::schema("topology document", first.to_string()));
    }
    Ok(topo)
}

/// Check every topology invariant, plus connectivity across the sites
/// referenced by RSEs (pass an empty slice when no RSEs are in play).
/// Returns an empty list iff everything holds.
pub fn validate_topology(topo: &Topology, rse_sites: &[&str]) -> Vec<Violation> {
    let mut violations = Vec::new();

    let mut seen_sites = BTreeSet::new();
    for site in &topo.sites {
        if !seen_sites.insert(site.name.as_str()) {
            violations.push(Violation {
                element: format!("site {}", site.name),
                message: "duplicate site name".into(),
            });
        }
    }

    let mut seen_links = BTreeSet::new();
    for link in &topo.links {
        let key = link.key();
        if !seen_links.insert(key.clone()) {
            violations.push(Violation {
                element: format!("link {key}"),
                message: "duplicate link for this site pair".into(),
            });
        }
        for end in [&link.a, &link.b] {
            if !seen_sites.contains(end.as_str()) {
                violations.push(Violation {
                    element: format!("link {key}"),
                    message: format!("dangling endpoint {end}"),
                });
            }
        }
        if link.a == link.b {
            violations.push(Violation {
                element: format!("link {key}"),
                message: "self-loop".into(),
            });
        }
        if !(link.capacity_gbps > 0.0) {
            violations.push(Violation {
                element: format!("link {key}"),
                message: format!("non-positive capacity {}", link.capacity_gbps),
            });
        }
        if !(link.manageable_fraction > 0.0 && link.manageable_fraction <= 1.0) {
            violations.push(Violation {
                element: format!("link {key}"),
                message: format!(
                    "manageable_fraction {} outside (0, 1]",
                    link.manageable_fraction
                ),
            });
        }
    }

    for site in rse_sites {
        if !seen_sites.contains(site) {
            violations.push(Violation {
                element: format!("site {site}"),
                message: "referenced by an RSE but absent from topology".into(),
            });
        }
    }

    // All RSE sites must sit in one connected component.
    let referenced: Vec<&str> = rse_sites
        .iter()
        .copied()
        .filter(|s| seen_sites.contains(s))
        .collect();
    if let Some(first) = referenced.first() {
        let reach = topo.distances_to(first);
        for site in &referenced[1..] {
            if !reach.contains_key(*site) {
                violations.push(Violation {
                    element: format!("site {site}"),
                    message: format!("referenced by an RSE but disconnected from {first}"),
                });
            }
        }
    }

    violations
}

/// Manageable capacity of a link in Gbps: `capacity * manageable_fraction`.
pub fn manageable_capacity(link: &Link) -> f64 {
    link.manageable_capacity()
}

/// Deterministic minimum-hop simple path from `src` to `dst`. Ties are
/// broken by the lexicographically smallest sequence of site names.
pub fn find_path(topo: &Topology, src: &str, dst: &str) -> Result<Path> {
    if src == dst {
        return Err(Error::InvalidRequest(format!(
            "path endpoints must differ (got {src} twice)"
        )));
    }
    for site in [src, dst] {
        if !topo.has_site(site) {
            return Err(Error::UnknownSite(site.to_string()));
        }
    }
    let dist = topo.distances_to(dst);
    let total = match dist.get(src) {
        Some(d) => *d,
        None => {
            return Err(Error::NoPath {
                src: src.to_string(),
                dst: dst.to_string(),
            })
        }
    };

    // Greedy walk: at each step take the name-smallest neighbor that still
    // lies on some shortest path. Because every candidate continuation has
    // the same length, picking the smallest next site at each position
    // yields the lexicographically smallest min-hop path.
    let mut sites = vec![src.to_string()];
    let mut current = src.to_string();
    let mut remaining = total;
    while remaining > 0 {
        let next = topo
            .neighbors(&current)
            .into_iter()
            .find(|n| dist.get(*n).is_some_and(|d| *d == remaining - 1))
            .expect("BFS distance guarantees a next hop");
        sites.push(next.to_string());
        current = next.to_string();
        remaining -= 1;
    }
    Ok(Path { sites })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo(sites: &[&str], links: &[(&str, &str)]) -> Topology {
        Topology {
            sites: sites
                .iter()
                .map(|s| Site {
                    name: s.to_string(),
                    role: SiteRole::Transit,
                })
                .collect(),
            links: links
                .iter()
                .map(|(a, b)| Link {
                    a: a.to_string(),
                    b: b.to_string(),
                    capacity_gbps: 100.0,
                    manageable_fraction: 0.8,
                })
                .collect(),
        }
    }

    #[test]
    fn load_minimal_document() {
        let doc = r#"{
            "sites": [{"name": "CERN"}, {"name": "FNAL"}],
            "links": [{"a": "CERN", "b": "FNAL", "capacity_gbps": 100.0, "manageable_fraction": 0.8}]
        }"#;
        let topo = load_topology(doc).unwrap();
        assert_eq!(topo.links.len(), 1);
        assert_eq!(topo.site("CERN").unwrap().role, SiteRole::Transit);
    }

    #[test]
    fn fraction_defaults_to_eighty_percent() {
        let doc = r#"{
            "sites": [{"name": "A"}, {"name": "B"}],
            "links": [{"a": "A", "b": "B", "capacity_gbps": 10.0}]
        }"#;
        let topo = load_topology(doc).unwrap();
        assert_eq!(topo.links[0].manageable_fraction, 0.8);
    }

    #[test]
    fn dangling_endpoint_is_rejected() {
        let doc = r#"{
            "sites": [{"name": "A"}],
            "links": [{"a": "A", "b": "X", "capacity_gbps": 10.0}]
        }"#;
        let err = load_topology(doc).unwrap_err();
        assert!(err.to_string().contains("dangling endpoint X"), "{err}");
    }

    #[test]
    fn duplicate_link_is_rejected() {
        let doc = r#"{
            "sites": [{"name": "A"}, {"name": "B"}],
            "links": [
                {"a": "A", "b": "B", "capacity_gbps": 10.0},
                {"a": "B", "b": "A", "capacity_gbps": 20.0}
            ]
        }"#;
        let err = load_topology(doc).unwrap_err();
        assert!(err.to_string().contains("duplicate link"), "{err}");
    }

    #[test]
    fn manageable_capacity_arithmetic() {
        let mut link = Link {
            a: "A".into(),
            b: "B".into(),
            capacity_gbps: 1000.0,
            manageable_fraction: 0.8,
        };
        assert_eq!(manageable_capacity(&link), 800.0);
        link.capacity_gbps = 100.0;
        link.manageable_fraction = 1.0;
        assert_eq!(manageable_capacity(&link), 100.0);
        link.capacity_gbps = 250.0;
        link.manageable_fraction = 0.8;
        assert_eq!(manageable_capacity(&link), 200.0);
        assert!(manageable_capacity(&link) <= link.capacity_gbps);
    }

    #[test]
    fn direct_link_path() {
        let t = topo(&["A", "B"], &[("A", "B")]);
        let p = find_path(&t, "A", "B").unwrap();
        assert_eq!(p.sites, vec!["A", "B"]);
        assert_eq!(p.hop_count(), 1);
    }

    #[test]
    fn lexicographic_tie_break() {
        // A-B-D and A-C-D are both 2 hops; B < C so the path goes via B.
        let t = topo(&["A", "B", "C", "D"], &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")]);
        let p = find_path(&t, "A", "D").unwrap();
        assert_eq!(p.sites, vec!["A", "B", "D"]);
    }

    #[test]
    fn same_endpoints_rejected() {
        let t = topo(&["A", "B"], &[("A", "B")]);
        assert!(matches!(
            find_path(&t, "A", "A"),
            Err(Error::InvalidRequest(_))
        ));
    }

    #[test]
    fn disconnected_pair_has_no_path() {
        let t = topo(&["A", "B", "C"], &[("A", "B")]);
        assert!(matches!(
            find_path(&t, "A", "C"),
            Err(Error::NoPath { .. })
        ));
    }

    #[test]
    fn find_path_is_deterministic() {
        let t = topo(
            &["A", "B", "C", "D", "E"],
            &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D"), ("D", "E"), ("B", "E")],
        );
        let first = find_path(&t, "A", "E").unwrap();
        for _ in 0..10 {
            assert_eq!(find_path(&t, "A", "E").unwrap(), first);
        }
    }

    #[test]
    fn validate_flags_zero_capacity_and_rse_sites() {
        let mut t = topo(&["A", "B", "C"], &[("A", "B")]);
        t.links[0].capacity_gbps = 0.0;
        let violations = validate_topology(&t, &["A", "C", "Z"]);
        let rendered: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        assert!(rendered.iter().any(|v| v.contains("non-positive capacity")));
        assert!(rendered.iter().any(|v| v.contains("disconnected")));
        assert!(rendered.iter().any(|v| v.contains("absent from topology")));
    }

    #[test]
    fn validate_passes_on_ring() {
        let t = topo(&["A", "B", "C"], &[("A", "B"), ("B", "C"), ("A", "C")]);
        assert!(validate_topology(&t, &["A", "B", "C"]).is_empty());
    }

    mod oracle {
        use super::*;
        use proptest::prelude::*;

        /// Independent brute force: enumerate every simple path, keep the
        /// shortest, then the lexicographically smallest site sequence.
        fn enumerate_best(topo: &Topology, src: &str, dst: &str) -> Option<Vec<String>> {
            fn walk(
                topo: &Topology,
                current: &str,
                dst: &str,
                trail: &mut Vec<String>,
                found: &mut Vec<Vec<String>>,
            ) {
                if current == dst {
                    found.push(trail.clone());
                    return;
                }
                for next in topo.neighbors(current) {
                    if trail.iter().any(|s| s == next) {
                        continue;
                    }
                    trail.push(next.to_string());
                    walk(topo, next, dst, trail, found);
                    trail.pop();
                }
            }
            let mut found = Vec::new();
            let mut trail = vec![src.to_string()];
            walk(topo, src, dst, &mut trail, &mut found);
            found
                .into_iter()
                .min_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)))
        }

        fn arb_topology() -> impl Strategy<Value = Topology> {
            (2usize..=8).prop_flat_map(|n| {
                let pairs: Vec<(usize, usize)> = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .collect();
                proptest::collection::vec(proptest::bool::ANY, pairs.len()).prop_map(
                    move |mask| {
                        let names: Vec<String> =
                            (0..n).map(|i| format!("S{i:02}")).collect();
                        let links = pairs
                            .iter()
                            .zip(mask.iter())
                            .filter(|(_, keep)| **keep)
                            .map(|((i, j), _)| Link {
                                a: names[*i].clone(),
                                b: names[*j].clone(),
                                capacity_gbps: 100.0,
                                manageable_fraction: 0.8,
                            })
                            .collect();
                        Topology {
                            sites: names
                                .iter()
                                .map(|name| Site {
                                    name: name.clone(),
                                    role: SiteRole::Transit,
                                })
                                .collect(),
                            links,
                        }
                    },
                )
            })
        }

        proptest! {
            #[test]
            fn matches_brute_force(topo in arb_topology()) {
                let src = topo.sites.first().unwrap().name.clone();
                let dst = topo.sites.last().unwrap().name.clone();
                let expected = enumerate_best(&topo, &src, &dst);
                match find_path(&topo, &src, &dst) {
                    Ok(path) => {
                        let best = expected.expect("oracle found no path but impl did");
                        prop_assert_eq!(path.hop_count(), best.len() - 1, "hop count differs");
                        prop_assert_eq!(path.sites, best, "tie-break differs");
                    }
                    Err(Error::NoPath { .. }) => prop_assert!(expected.is_none()),
                    Err(other) => prop_assert!(false, "unexpected error {}", other),
                }
            }
        }
    }
}
