//! Machine-readable check records shared by the verification suites and the
//! command line.

use serde::Serialize;

use crate::config::Config;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub status: Status,
    /// Measured deviation; `null` when the computation itself failed.
    pub value: f64,
    pub tolerance: f64,
    pub config: Config,
}

impl CheckReport {
    /// `value ≤ tolerance · tolerance_scale`.
    pub fn new(check: impl Into<String>, value: f64, tolerance: f64, config: &Config) -> Self {
        let tolerance = tolerance * config.tolerance_scale;
        let status = if value <= tolerance { Status::Pass } else { Status::Fail };
        Self { check: check.into(), status, value, tolerance, config: *config }
    }

    /// A yes/no property; `value` is 0 when it holds and 1 otherwise.
    pub fn flag(check: impl Into<String>, holds: bool, config: &Config) -> Self {
        let mut r = Self::new(check, if holds { 0.0 } else { 1.0 }, 0.0, config);
        r.status = if holds { Status::Pass } else { Status::Fail };
        r
    }

    /// A check whose computation returned an error.
    pub fn errored(check: impl Into<String>, tolerance: f64, config: &Config) -> Self {
        Self::new(check, f64::INFINITY, tolerance, config)
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }
}

/// Sorts by check name so that output order does not depend on scheduling.
pub fn sort_reports(reports: &mut [CheckReport]) {
    reports.sort_by(|a, b| a.check.cmp(&b.check));
}
