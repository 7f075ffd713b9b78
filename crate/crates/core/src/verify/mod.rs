//! Property harness: every numerically checkable consequence of the theory,
//! evaluated on solver output, with the worst violation and its location.
//!
//! Each check returns one [`CheckResult`] per property it tests. A result
//! passes iff its worst violation is at most its tolerance.

mod integrability;
mod kernels;
pub mod oracle;
mod report;
pub mod svg;
mod weighted;

use std::fmt;

use sha2::{Digest, Sha256};

use crate::coefficients::OperatorSpec;
use crate::par::Exec;
use crate::solver::{default_dt, GridSpec};
use crate::{Error, Result};

pub use integrability::{check_lyapunov_integrability, integrate_weight, IntegrabilityOptions};
pub use kernels::{
    check_chapman_kolmogorov, check_domination, check_duality, check_mass_and_positivity, check_monotone_in_R,
    check_support, check_support_patterns,
};
pub use oracle::oracle_l1_error;
pub use report::{results_csv, summary};
pub use weighted::{
    calibrate_weighted_bound, check_decay_shape, check_weighted_bound, prepare_weighted, weighted_sup, Side,
    WeightedConfig, WeightedPlan, WeightedSetup, WeightedSup,
};

/// Ids of the checks the CLI can select.
pub const CHECK_IDS: [&str; 9] = [
    "domination",
    "monotone",
    "mass",
    "support",
    "duality",
    "chapman_kolmogorov",
    "integrability",
    "weighted_bound",
    "decay_shape",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// the measured quantity is dominated by domain truncation
    Inconclusive,
}

impl CheckStatus {
    pub fn name(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where a sample was taken; unused coordinates are `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Location {
    pub t: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    /// 0-based
    pub h: Option<usize>,
    /// 0-based
    pub k: Option<usize>,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(t) = self.t {
            parts.push(format!("t={t}"));
        }
        if let Some(x) = &self.x {
            parts.push(format!("x={x:?}"));
        }
        if let Some(y) = &self.y {
            parts.push(format!("y={y:?}"));
        }
        if let Some(h) = self.h {
            parts.push(format!("h={}", h + 1));
        }
        if let Some(k) = self.k {
            parts.push(format!("k={}", k + 1));
        }
        if parts.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&parts.join(" "))
        }
    }
}

/// One measured value; `violation` is what the tolerance is compared with.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub location: Location,
    pub value: f64,
    pub reference: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub id: String,
    pub status: CheckStatus,
    pub worst: f64,
    pub location: Location,
    pub tolerance: f64,
    pub fingerprint: String,
    pub samples: Vec<Sample>,
    pub metrics: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl CheckResult {
    /// Result from the samples; NaN violations count as failures.
    pub fn from_samples(id: &str, tolerance: f64, fingerprint: &str, samples: Vec<Sample>) -> Self {
        let worst_sample = samples.iter().max_by(|a, b| nan_high(a.violation).total_cmp(&nan_high(b.violation)));
        let (worst, location) = worst_sample
            .map_or((f64::NEG_INFINITY, Location::default()), |s| (nan_high(s.violation), s.location.clone()));
        let status = if worst <= tolerance { CheckStatus::Pass } else { CheckStatus::Fail };
        Self {
            id: id.to_string(),
            status,
            worst,
            location,
            tolerance,
            fingerprint: fingerprint.to_string(),
            samples,
            metrics: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn with_metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.push((name.to_string(), value));
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// One-line summary.
    pub fn line(&self) -> String {
        format!(
            "{:<28} {:<12} worst {:>12.4e} tol {:>10.3e} at {}",
            self.id,
            self.status.name(),
            self.worst,
            self.tolerance,
            self.location
        )
    }
}

fn nan_high(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn fingerprint(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn fingerprint_of(id: &str, spec: &OperatorSpec, extra: &str) -> String {
    fingerprint(&format!("{id}|{:?}|{extra}", spec.coefficients()))
}

/// Time stepping and smoothing shared by the checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    pub theta: f64,
    /// `None` uses `min(t_min/64, h)` over the requested times
    pub dt: Option<f64>,
    /// mollifier width in units of the mesh
    pub mollifier_factor: f64,
    pub exec: Exec,
}

impl SolveSettings {
    /// Implicit Euler: monotone, for positivity-sensitive checks.
    pub fn positivity() -> Self {
        Self { theta: 1.0, dt: None, mollifier_factor: 2.0, exec: Exec::Parallel }
    }

    /// Crank–Nicolson, for oracle comparisons.
    pub fn accuracy() -> Self {
        Self { theta: 0.5, ..Self::positivity() }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn dt_for(&self, times: &[f64], mesh: f64) -> f64 {
        self.dt.unwrap_or_else(|| {
            let t = times.iter().copied().filter(|t| *t > 0.0).fold(f64::INFINITY, f64::min);
            if t.is_finite() {
                default_dt(t, mesh)
            } else {
                mesh
            }
        })
    }

    pub fn width(&self, grid: &GridSpec) -> f64 {
        self.mollifier_factor * grid.mesh
    }
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self::positivity()
    }
}

/// A kernel source: point `y` and component `k` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub y: Vec<f64>,
    pub k: usize,
}

impl Source {
    pub fn new(y: Vec<f64>, k: usize) -> Self {
        Self { y, k }
    }
}

pub(crate) fn node_of(grid: &GridSpec, x: &[f64]) -> Result<usize> {
    grid.node_at(x).ok_or_else(|| Error::Precondition(format!("point {x:?} is not an interior node of the grid")))
}

/// Sorted, deduplicated times; all must be positive.
pub(crate) fn sorted_times(times: &[f64]) -> Result<Vec<f64>> {
    if times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::Precondition(format!("times must be positive, got {times:?}")));
    }
    let mut t = times.to_vec();
    t.sort_by(f64::total_cmp);
    t.dedup();
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(v: f64) -> Sample {
        Sample { location: Location { t: Some(v), ..Location::default() }, value: v, reference: 0.0, violation: v }
    }

    #[test]
    fn status_follows_worst() {
        let r = CheckResult::from_samples("x", 0.5, "f", vec![sample(0.1), sample(0.4)]);
        assert!(r.passed());
        assert_eq!(r.location.t, Some(0.4));
        let r = CheckResult::from_samples("x", 0.5, "f", vec![sample(0.1), sample(f64::NAN)]);
        assert!(!r.passed());
        let r = CheckResult::from_samples("x", 0.5, "f", vec![]);
        assert!(r.passed());
    }

    #[test]
    fn fingerprints_are_stable() {
        assert_eq!(fingerprint("abc"), "ba7816bf8f01cfea");
        assert_ne!(fingerprint("abc"), fingerprint("abd"));
    }
}
