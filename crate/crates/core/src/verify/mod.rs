//! Executable forms of the correctness arguments: linearizability checking
//! (linearization-point construction and a brute-force oracle), potential-
//! function monitoring, and agreement-condition verdicts over traces.

pub mod agreement;
pub mod alpha;
pub mod battery;
pub mod bgsim;
pub mod history;
pub mod linearize;

use serde::Serialize;

/// Outcome of one checked condition.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// The condition's hypotheses did not hold in this trace.
    Vacuous,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self != Verdict::Fail
    }
}

/// One detected violation, with the step window it occurred in.
#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub check: &'static str,
    pub detail: String,
    /// Step range relevant to the counterexample.
    pub window: Option<(u64, u64)>,
}

impl Violation {
    pub fn new(check: &'static str, detail: String) -> Self {
        Violation {
            check,
            detail,
            window: None,
        }
    }

    pub fn with_window(mut self, lo: u64, hi: u64) -> Self {
        self.window = Some((lo, hi));
        self
    }

    pub fn render(&self) -> String {
        match self.window {
            Some((lo, hi)) => format!("[{}] {} (steps {}..{})", self.check, self.detail, lo, hi),
            None => format!("[{}] {}", self.check, self.detail),
        }
    }
}

/// Aggregated verdicts for a trace, emitted as the JSON check report.
#[derive(Clone, Debug, Default, Serialize)]
pub struct CheckReport {
    pub checks: Vec<(String, Verdict)>,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn record(&mut self, name: &str, verdict: Verdict) {
        self.checks.push((name.to_string(), verdict));
    }

    pub fn extend_violations(&mut self, more: Vec<Violation>) {
        self.violations.extend(more);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|(_, v)| v.passed()) && self.violations.is_empty()
    }
}
