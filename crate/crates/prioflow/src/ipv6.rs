//! IPv6 prefix handling for director subnets. Prefixes are stored
//! normalized (host bits masked off) so equality and containment are
//! purely arithmetic on the u128 form.

use std::fmt;
use std::net::Ipv6Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ipv6Prefix {
    bits: u128,
    len: u8,
}

impl Ipv6Prefix {
    pub fn new(addr: Ipv6Addr, len: u8) -> Result<Self, Error> {
        if len > 128 {
            return Err(Error::schema(
                "ipv6 prefix",
                format!("prefix length {len} exceeds 128"),
            ));
        }
        Ok(Ipv6Prefix {
            bits: u128::from(addr) & Self::mask(len),
            len,
        })
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    fn mask(len: u8) -> u128 {
        if len == 0 {
            0
        } else {
            u128::MAX << (128 - len)
        }
    }

    /// True if `other` lies entirely within this prefix.
    pub fn contains(&self, other: &Ipv6Prefix) -> bool {
        self.len <= other.len && (other.bits & Self::mask(self.len)) == self.bits
    }

    /// Two prefixes overlap iff one contains the other.
    pub fn overlaps(&self, other: &Ipv6Prefix) -> bool {
        self.contains(other) || other.contains(self)
    }
}

impl FromStr for Ipv6Prefix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let (addr, len) = s
            .split_once('/')
            .ok_or_else(|| Error::schema("ipv6 prefix", format!("missing '/len' in {s:?}")))?;
        let addr: Ipv6Addr = addr
            .parse()
            .map_err(|e| Error::schema("ipv6 prefix", format!("bad address in {s:?}: {e}")))?;
        let len: u8 = len
            .parse()
            .map_err(|e| Error::schema("ipv6 prefix", format!("bad length in {s:?}: {e}")))?;
        Ipv6Prefix::new(addr, len)
    }
}

impl fmt::Display for Ipv6Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", Ipv6Addr::from(self.bits), self.len)
    }
}

impl Serialize for Ipv6Prefix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ipv6Prefix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        let p: Ipv6Prefix = "2001:db8:1::/64".parse().unwrap();
        assert_eq!(p.to_string(), "2001:db8:1::/64");
        assert_eq!(p.len(), 64);
    }

    #[test]
    fn host_bits_are_masked() {
        let a: Ipv6Prefix = "2001:db8:1::42/64".parse().unwrap();
        let b: Ipv6Prefix = "2001:db8:1::/64".parse().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn containment_and_overlap() {
        let wide: Ipv6Prefix = "2001:db8::/32".parse().unwrap();
        let narrow: Ipv6Prefix = "2001:db8:1::/64".parse().unwrap();
        let other: Ipv6Prefix = "2001:db9::/32".parse().unwrap();
        assert!(wide.contains(&narrow));
        assert!(!narrow.contains(&wide));
        assert!(wide.overlaps(&narrow));
        assert!(narrow.overlaps(&wide));
        assert!(!wide.overlaps(&other));
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!("2001:db8::".parse::<Ipv6Prefix>().is_err());
        assert!("2001:db8::/129".parse::<Ipv6Prefix>().is_err());
        assert!("nonsense/64".parse::<Ipv6Prefix>().is_err());
    }
}
