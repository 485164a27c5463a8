//! Unit conventions: bytes and seconds internally, decimal network units at
//! the edges. 1 Gbps = 1e9 bits/s, 1 GB = 1e9 bytes, so
//! `bytes/s = gbps * 1e9 / 8`.

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Convert a rate in Gbps (decimal) to bytes per second.
pub fn gbps_to_bytes_per_sec(gbps: f64) -> f64 {
    gbps * 1e9 / 8.0
}

/// Convert a rate in bytes per second to Gbps (decimal).
pub fn bytes_per_sec_to_gbps(bytes_per_sec: f64) -> f64 {
    bytes_per_sec * 8.0 / 1e9
}

/// Symmetric relative difference `|a - b| / max(|a|, |b|)`, used when
/// comparing computed values against rounded published figures.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gbps_round_trip() {
        // 800 Gbps is 100 GB/s in decimal units.
        assert_eq!(gbps_to_bytes_per_sec(800.0), 100e9);
        assert_eq!(bytes_per_sec_to_gbps(100e9), 800.0);
    }
}
