//! HL-LHC scale arithmetic: detector output rates, per-archive daily
//! averages, and the peak headroom check used to size desk-scale
//! scenarios. Pure functions over an instrument profile.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::topology::{find_path, Topology};
use crate::units::SECONDS_PER_DAY;
use crate::{Error, Result};

pub const SECONDS_PER_YEAR: f64 = 365.0 * SECONDS_PER_DAY;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstrumentProfile {
    /// Bytes produced per collision event.
    pub event_size_bytes: f64,
    /// Events recorded per second while the instrument runs.
    pub trigger_rate_hz: f64,
    /// Fraction of calendar time the instrument is taking data.
    pub duty_cycle: f64,
    /// Fraction of the data each archive site holds; fractions sum to <= 1.
    pub archive_shares: BTreeMap<String, f64>,
}

impl InstrumentProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.event_size_bytes > 0.0) {
            return Err(Error::InvalidRequest("event size must be positive".into()));
        }
        if !(self.trigger_rate_hz > 0.0) {
            return Err(Error::InvalidRequest("trigger rate must be positive".into()));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle <= 1.0) {
            return Err(Error::InvalidRequest("duty cycle must be in (0, 1]".into()));
        }
        let mut total = 0.0;
        for (site, share) in &self.archive_shares {
            if !(*share > 0.0 && *share <= 1.0) {
                return Err(Error::InvalidRequest(format!(
                    "archive share for {site} must be in (0, 1]"
                )));
            }
            total += share;
        }
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidRequest(
                "archive shares sum to more than 1".into(),
            ));
        }
        Ok(())
    }
}

/// Raw detector output in bytes/second while the instrument is running:
/// `event_size * trigger_rate`.
pub fn raw_rate(profile: &InstrumentProfile) -> Result<f64> {
    profile.validate()?;
    Ok(profile.event_size_bytes * profile.trigger_rate_hz)
}

/// Integrated volume per running year in bytes, honoring the duty cycle.
pub fn annual_volume(profile: &InstrumentProfile) -> Result<f64> {
    Ok(raw_rate(profile)? * profile.duty_cycle * SECONDS_PER_YEAR)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiteRate {
    pub bytes_per_sec: f64,
    pub gbps: f64,
}

/// Average egress toward one archive site given a daily outbound volume:
/// `share * daily_volume / 86400`, in bytes/s and Gbps.
pub fn site_average_rate(
    profile: &InstrumentProfile,
    daily_volume_bytes: f64,
    site: &str,
) -> Result<SiteRate> {
    profile.validate()?;
    let share = profile
        .archive_shares
        .get(site)
        .ok_or_else(|| Error::UnknownSite(site.to_string()))?;
    let bytes_per_sec = share * daily_volume_bytes / SECONDS_PER_DAY;
    Ok(SiteRate {
        bytes_per_sec,
        gbps: crate::units::bytes_per_sec_to_gbps(bytes_per_sec),
    })
}

/// True iff the minimum-hop path from `src` to `dst` can host
/// `required_gbps` of priority traffic, i.e. every hop's manageable
/// capacity meets the requirement.
pub fn peak_check(topo: &Topology, src: &str, dst: &str, required_gbps: f64) -> Result<bool> {
    let path = find_path(topo, src, dst)?;
    let mut bottleneck = f64::INFINITY;
    for hop in path.hops() {
        let link = topo
            .link(&hop.key())
            .ok_or_else(|| Error::NoPath {
                src: src.to_string(),
                dst: dst.to_string(),
            })?;
        bottleneck = bottleneck.min(link.manageable_capacity());
    }
    Ok(bottleneck >= required_gbps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Link, Site, SiteRole};
    use proptest::prelude::*;

    fn hl_lhc_profile() -> InstrumentProfile {
        InstrumentProfile {
            event_size_bytes: 6.5e6,
            trigger_rate_hz: 7500.0,
            duty_cycle: 0.3,
            archive_shares: [("FNAL".to_string(), 0.4)].into_iter().collect(),
        }
    }

    #[test]
    fn raw_rate_matches_stated_output() {
        let rate = raw_rate(&hl_lhc_profile()).unwrap();
        assert_eq!(rate, 48.75e9, "6.5 MB x 7.5 kHz");
        // Within 5% of the round 50 GB/s figure.
        assert!((rate - 50e9).abs() / 50e9 < 0.05);
    }

    #[test]
    fn raw_rate_identity_case() {
        let profile = InstrumentProfile {
            event_size_bytes: 1.0,
            trigger_rate_hz: 1.0,
            duty_cycle: 1.0,
            archive_shares: BTreeMap::new(),
        };
        assert_eq!(raw_rate(&profile).unwrap(), 1.0);
    }

    #[test]
    fn zero_rate_rejected_by_profile() {
        let mut profile = hl_lhc_profile();
        profile.trigger_rate_hz = 0.0;
        assert!(raw_rate(&profile).is_err());
    }

    #[test]
    fn site_average_for_largest_archive() {
        let rate = site_average_rate(&hl_lhc_profile(), 5e15, "FNAL").unwrap();
        let expected = 0.4 * 5e15 / 86_400.0;
        assert!((rate.bytes_per_sec - expected).abs() < 1.0);
        assert!((rate.bytes_per_sec - 23.15e9).abs() / 23.15e9 < 1e-3);
        assert!((rate.gbps - 185.2).abs() / 185.2 < 1e-3);
        // Within 15% of the rounded 20 GB/s and 200 Gbps figures.
        assert!(crate::units::rel_diff(rate.bytes_per_sec, 20e9) < 0.15);
        assert!(crate::units::rel_diff(rate.gbps, 200.0) < 0.15);
    }

    #[test]
    fn site_average_unit_case() {
        let mut profile = hl_lhc_profile();
        profile.archive_shares.insert("ALL".into(), 0.6);
        let mut all = profile.clone();
        all.archive_shares = [("ALL".to_string(), 1.0)].into_iter().collect();
        let rate = site_average_rate(&all, 86_400.0, "ALL").unwrap();
        assert_eq!(rate.bytes_per_sec, 1.0);
    }

    #[test]
    fn unknown_site_rejected() {
        assert!(matches!(
            site_average_rate(&hl_lhc_profile(), 5e15, "CNAF"),
            Err(Error::UnknownSite(_))
        ));
    }

    #[test]
    fn annual_volume_is_reported_not_forced() {
        let volume = annual_volume(&hl_lhc_profile()).unwrap();
        // 48.75 GB/s at 30% duty over a year lands near 461 PB.
        assert!((volume - 461.2e15).abs() / 461.2e15 < 1e-3, "{volume}");
    }

    fn two_site_topo(capacity: f64, fraction: f64) -> Topology {
        Topology {
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
        }
    }

    #[test]
    fn peak_check_thresholds() {
        // 1250 Gbps at 0.8 manageable leaves exactly the 1 Tbps peak headroom.
        let t = two_site_topo(1250.0, 0.8);
        assert!(peak_check(&t, "CERN", "FNAL", 1000.0).unwrap());
        let small = two_site_topo(100.0, 0.8);
        assert!(!peak_check(&small, "CERN", "FNAL", 1000.0).unwrap());
        let boundary = two_site_topo(1000.0, 1.0);
        assert!(peak_check(&boundary, "CERN", "FNAL", 1000.0).unwrap());
    }

    proptest! {
        #[test]
        fn raw_rate_is_linear(size in 1.0f64..1e8, rate in 1.0f64..1e6, k in 1.0f64..100.0) {
            let base = InstrumentProfile {
                event_size_bytes: size,
                trigger_rate_hz: rate,
                duty_cycle: 0.5,
                archive_shares: BTreeMap::new(),
            };
            let scaled = InstrumentProfile {
                event_size_bytes: k * size,
                ..base.clone()
            };
            let a = raw_rate(&base).unwrap();
            let b = raw_rate(&scaled).unwrap();
            prop_assert!((b - k * a).abs() <= 1e-9 * b.abs());
            prop_assert!(a > 0.0);
        }
    }
}
