//! Seeded generators for randomized suites: connected topologies, one RSE
//! per site, and scenario timelines mixing submits, priority updates,
//! demotions, strategy changes, and teardowns. Everything derives from a
//! single seed, so suites are reproducible draw for draw.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::orchestrator::FlowSpec;
use crate::rse::{Director, Endpoint, Preference, Protocol, Rse};
use crate::scenario::{Action, ConfigOverrides, Scenario, ScenarioBundle, TimelineEntry};
use crate::sim::seeded_rng;
use crate::topology::{Link, Path, Site, SiteRole, Topology};

pub struct SynthLimits {
    pub max_sites: usize,
    pub max_services: usize,
    pub max_extra_actions: usize,
}

impl Default for SynthLimits {
    fn default() -> Self {
        SynthLimits {
            max_sites: 5,
            max_services: 6,
            max_extra_actions: 8,
        }
    }
}

/// Connected random topology: a random spanning tree plus a few extra
/// links, with mixed capacities and manageable fractions.
pub fn random_topology(rng: &mut ChaCha8Rng, max_sites: usize) -> Topology {
    let n = rng.gen_range(2..=max_sites.max(2));
    let names: Vec<String> = (0..n).map(|i| format!("SITE{i}")).collect();
    let mut links = Vec::new();
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        links.push(Link {
            a: names[parent].clone(),
            b: names[i].clone(),
            capacity_gbps: rng.gen_range(10.0..1000.0),
            manageable_fraction: *[0.5, 0.8, 0.8, 1.0].choose(rng).unwrap(),
        });
    }
    for extra_a in 0..n {
        for extra_b in (extra_a + 1)..n {
            let exists = links.iter().any(|l| {
                (l.a == names[extra_a] && l.b == names[extra_b])
                    || (l.a == names[extra_b] && l.b == names[extra_a])
            });
            if !exists && rng.gen_bool(0.2) {
                links.push(Link {
                    a: names[extra_a].clone(),
                    b: names[extra_b].clone(),
                    capacity_gbps: rng.gen_range(10.0..1000.0),
                    manageable_fraction: *[0.5, 0.8, 1.0].choose(rng).unwrap(),
                });
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
        links,
    }
}

/// One RSE per site with a small director pool and a webdavs third-party
/// endpoint.
pub fn rses_for(rng: &mut ChaCha8Rng, topo: &Topology) -> Vec<Rse> {
    topo.sites
        .iter()
        .enumerate()
        .map(|(site_idx, site)| {
            let directors = rng.gen_range(2..=4);
            Rse {
                name: format!("RSE_{}", site.name),
                site: site.name.clone(),
                endpoints: vec![Endpoint {
                    protocol: Protocol::Webdavs,
                    host: format!("redirector.{}", site.name.to_lowercase()),
                    port: None,
                    namespace_prefix: "/store".into(),
                    preferences: vec![Preference::ThirdPartyTransfer, Preference::Write],
                }],
                directors: (1..=directors)
                    .map(|d| Director {
                        id: format!("d{d}"),
                        ipv6_subnet: format!("2001:db8:{:x}:{d}::/64", site_idx + 1)
                            .parse()
                            .unwrap(),
                        endpoint_host: format!("d{d}.{}", site.name.to_lowercase()),
                    })
                    .collect(),
                server_count: 10,
            }
        })
        .collect()
}

/// A random runnable scenario over a fresh random topology. Timelines mix
/// submits with priority updates, demotions, strategy changes, and
/// teardowns against already-submitted requests.
pub fn random_bundle(seed: u64, limits: &SynthLimits) -> ScenarioBundle {
    let mut rng = seeded_rng(seed);
    let topology = random_topology(&mut rng, limits.max_sites);
    let rses = rses_for(&mut rng, &topology);
    let site_names: Vec<String> = topology.sites.iter().map(|s| s.name.clone()).collect();

    let submits = rng.gen_range(1..=limits.max_services);
    let mut entries: Vec<TimelineEntry> = Vec::new();
    let mut submitted: Vec<(f64, String)> = Vec::new();
    for i in 0..submits {
        let t = rng.gen_range(0.0..50.0);
        let src = site_names.choose(&mut rng).unwrap().clone();
        let mut dst = site_names.choose(&mut rng).unwrap().clone();
        while dst == src {
            dst = site_names.choose(&mut rng).unwrap().clone();
        }
        let request_id = format!("df{i}");
        let bytes = rng.gen_range(1_000_000_000u64..2_000_000_000_000);
        entries.push(TimelineEntry {
            t,
            action: Action::Submit {
                request_id: request_id.clone(),
                bytes,
                src,
                dst,
                priority: rng.gen_range(1..=10),
                file_count: Some(rng.gen_range(1..=12)),
                files: None,
            },
        });
        submitted.push((t, request_id));
    }

    let extras = rng.gen_range(0..=limits.max_extra_actions);
    for _ in 0..extras {
        let (submit_t, request_id) = submitted.choose(&mut rng).unwrap().clone();
        let t = submit_t + rng.gen_range(0.1..200.0);
        let action = match rng.gen_range(0..100) {
            0..=44 => Action::UpdatePriority {
                request_id,
                priority: rng.gen_range(1..=100),
            },
            45..=64 => Action::Demote { request_id },
            65..=84 => Action::ChangeStrategy { request_id },
            _ => Action::FtsDone { request_id },
        };
        entries.push(TimelineEntry { t, action });
    }
    entries.sort_by(|a, b| a.t.total_cmp(&b.t));

    let run_until = 5_000.0;
    let checkpoints = (0..rng.gen_range(0..4))
        .map(|_| rng.gen_range(0.0..run_until))
        .collect();
    ScenarioBundle {
        topology,
        rses,
        scenario: Scenario {
            topology: String::new(),
            rses: Vec::new(),
            seed,
            run_until,
            timeline: entries,
            faults: Vec::new(),
            checkpoints,
            expect_failures: false,
            config: ConfigOverrides::default(),
        },
    }
}

/// Random allocation instance for oracle comparison: a connected topology
/// and flows with random simple paths, weights, and optional demands.
pub fn random_alloc_instance(seed: u64) -> (Topology, Vec<FlowSpec>) {
    let mut rng = seeded_rng(seed);
    let topo = random_topology(&mut rng, 5);
    let site_names: Vec<String> = topo.sites.iter().map(|s| s.name.clone()).collect();
    let flow_count = rng.gen_range(1..=6);
    let mut flows = Vec::new();
    for i in 0..flow_count {
        let src = site_names.choose(&mut rng).unwrap();
        let mut dst = site_names.choose(&mut rng).unwrap();
        while dst == src {
            dst = site_names.choose(&mut rng).unwrap();
        }
        let Ok(path) = crate::topology::find_path(&topo, src, dst) else {
            continue;
        };
        flows.push(FlowSpec {
            flow_id: format!("f{i}"),
            path: Path { sites: path.sites },
            weight: if rng.gen_bool(0.15) {
                0
            } else {
                rng.gen_range(1..=10)
            },
            demand: if rng.gen_bool(0.3) {
                Some(rng.gen_range(1.0..300.0))
            } else {
                None
            },
        });
    }
    (topo, flows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::validate_topology;

    #[test]
    fn generated_topologies_are_valid_and_connected() {
        for seed in 0..50 {
            let mut rng = seeded_rng(seed);
            let topo = random_topology(&mut rng, 5);
            let rse_sites: Vec<&str> = topo.sites.iter().map(|s| s.name.as_str()).collect();
            assert!(
                validate_topology(&topo, &rse_sites).is_empty(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn generated_scenarios_validate() {
        for seed in 0..50 {
            let bundle = random_bundle(seed, &SynthLimits::default());
            bundle.scenario.validate().expect("generated scenario valid");
        }
    }

    #[test]
    fn same_seed_same_bundle() {
        let a = random_bundle(42, &SynthLimits::default());
        let b = random_bundle(42, &SynthLimits::default());
        assert_eq!(
            serde_json::to_string(&a.scenario.timeline).unwrap(),
            serde_json::to_string(&b.scenario.timeline).unwrap()
        );
        assert_eq!(a.topology.links.len(), b.topology.links.len());
    }
}
