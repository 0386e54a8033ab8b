//! Upper-bound analytic model of application data-transfer latency.
//!
//! Two architectures are compared for N applications each needing the
//! same amount of data. In the separate-system architecture every
//! application pulls its data over a shared external channel, so the
//! per-application bandwidth is the total divided by N. In the
//! near-data architecture the consumer runs in the database process and
//! reads at in-memory bandwidth, independent of N.
//!
//! ```text
//! separate  = data / (external_bandwidth / n_apps)
//! near_data = data / neardata_bandwidth
//! gap       = separate / near_data  =  n_apps · neardata_bandwidth / external_bandwidth
//! ```
//!
//! Units are decimal: 1 KB = 10³ B, 1 MB = 10⁶ B, 1 GB = 10⁹ B,
//! 1 TB = 10¹² B. Computation latency is excluded; data transfer is the
//! term that separates the two designs.

use crate::error::{Error, Result};

/// Inputs of the transfer model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferScenario {
    /// Number of applications sharing the external channel (N).
    pub n_apps: u64,
    /// Bytes each application must move.
    pub data_per_app: f64,
    /// Total external bandwidth shared across the N applications, B/s.
    pub external_bandwidth_total: f64,
    /// Per-application near-data bandwidth, B/s (constant in N).
    pub neardata_bandwidth: f64,
}

impl TransferScenario {
    pub fn new(
        n_apps: u64,
        data_per_app: f64,
        external_bandwidth_total: f64,
        neardata_bandwidth: f64,
    ) -> Result<TransferScenario> {
        let s = TransferScenario {
            n_apps,
            data_per_app,
            external_bandwidth_total,
            neardata_bandwidth,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.n_apps == 0 {
            return Err(Error::InvalidConfig("n_apps must be positive".into()));
        }
        for (name, v) in [
            ("data_per_app", self.data_per_app),
            ("external_bandwidth_total", self.external_bandwidth_total),
            ("neardata_bandwidth", self.neardata_bandwidth),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Transfer latency under the separate-system architecture: the shared
/// channel splits evenly, so each application sees
/// `external_bandwidth_total / n_apps`.
pub fn separate_latency(s: &TransferScenario) -> f64 {
    let per_app_bandwidth = s.external_bandwidth_total / s.n_apps as f64;
    s.data_per_app / per_app_bandwidth
}

/// Transfer latency under the near-data architecture; independent of
/// the application count.
pub fn neardata_latency(s: &TransferScenario) -> f64 {
    s.data_per_app / s.neardata_bandwidth
}

/// Ratio of the two latencies.
pub fn gap(s: &TransferScenario) -> f64 {
    separate_latency(s) / neardata_latency(s)
}

/// Parses a byte quantity with an optional decimal unit suffix:
/// `B`, `KB`, `MB`, `GB`, `TB` (case-insensitive; bare numbers are
/// bytes).
pub fn parse_bytes(text: &str) -> Result<f64> {
    let trimmed = text.trim();
    let split = trimmed
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-' || c == '+'))
        .unwrap_or(trimmed.len());
    let (num, unit) = trimmed.split_at(split);
    let value: f64 = num
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad byte quantity: {text}")))?;
    let scale = match unit.trim().to_ascii_uppercase().as_str() {
        "" | "B" => 1.0,
        "KB" => 1e3,
        "MB" => 1e6,
        "GB" => 1e9,
        "TB" => 1e12,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown unit {other:?} in {text}"
            )))
        }
    };
    let bytes = value * scale;
    if !(bytes.is_finite() && bytes > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "byte quantity must be positive: {text}"
        )));
    }
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// 50 applications, 1 GB each, over a 500 MB/s shared channel vs a
    /// 100 GB/s near-data path.
    fn reference_scenario() -> TransferScenario {
        TransferScenario::new(50, 1e9, 500e6, 100e9).unwrap()
    }

    #[test]
    fn reference_scenario_is_exact() {
        let s = reference_scenario();
        assert_eq!(separate_latency(&s), 100.0);
        assert_eq!(neardata_latency(&s), 0.01);
        assert_eq!(gap(&s), 10_000.0);
    }

    #[test]
    fn single_app_gets_the_whole_channel() {
        let s = TransferScenario::new(1, 4e9, 2e9, 2e9).unwrap();
        assert_eq!(separate_latency(&s), 2.0);
        assert_eq!(gap(&s), 1.0);
    }

    #[test]
    fn latency_scales_linearly_in_data() {
        let s = TransferScenario::new(50, 2e9, 500e6, 100e9).unwrap();
        assert_eq!(separate_latency(&s), 200.0);
        let s = TransferScenario::new(1000, 1e9, 500e6, 100e9).unwrap();
        assert_eq!(neardata_latency(&s), 0.01, "independent of N");
        let s = TransferScenario::new(50, 10e9, 500e6, 100e9).unwrap();
        assert_eq!(neardata_latency(&s), 0.1);
    }

    #[test]
    fn doubling_apps_doubles_the_gap() {
        let a = TransferScenario::new(50, 1e9, 500e6, 100e9).unwrap();
        let b = TransferScenario::new(100, 1e9, 500e6, 100e9).unwrap();
        assert_eq!(gap(&b), 2.0 * gap(&a));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(TransferScenario::new(0, 1.0, 1.0, 1.0).is_err());
        assert!(TransferScenario::new(1, 0.0, 1.0, 1.0).is_err());
        assert!(TransferScenario::new(1, 1.0, -5.0, 1.0).is_err());
        assert!(TransferScenario::new(1, 1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn byte_units_are_decimal() {
        assert_eq!(parse_bytes("1GB").unwrap(), 1e9);
        assert_eq!(parse_bytes("500MB").unwrap(), 500e6);
        assert_eq!(parse_bytes("100GB").unwrap(), 100e9);
        assert_eq!(parse_bytes("2.5KB").unwrap(), 2500.0);
        assert_eq!(parse_bytes("42").unwrap(), 42.0);
        assert_eq!(parse_bytes("1tb").unwrap(), 1e12);
        assert!(parse_bytes("3GiB").is_err());
        assert!(parse_bytes("-1GB").is_err());
    }

    proptest! {
        /// Closed form: gap = n · near / external.
        #[test]
        fn gap_matches_closed_form(
            n in 1u64..10_000,
            data in 1e3f64..1e12,
            ext in 1e3f64..1e12,
            near in 1e3f64..1e12,
        ) {
            let s = TransferScenario::new(n, data, ext, near).unwrap();
            let direct = gap(&s);
            let closed = n as f64 * near / ext;
            prop_assert!(
                (direct - closed).abs() <= 1e-9 * closed.abs().max(1.0),
                "{direct} vs {closed}"
            );
        }
    }
}
