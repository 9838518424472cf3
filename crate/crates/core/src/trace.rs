//! Per-iteration records shared by every solver.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Damped,
    Full,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Damped => "damped",
            Phase::Full => "full",
        }
    }
}

/// State at the start of iteration `iter` and the step taken from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub phase: Phase,
    pub f: f64,
    pub grad_norm: f64,
    pub lambda: f64,
    pub beta: f64,
    pub d_k: f64,
    pub tau: f64,
    pub cum_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
    DomainError,
}

/// Outcome of a solver run.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: ndarray::Array1<f64>,
    pub trace: Vec<IterRecord>,
    pub status: Status,
    /// Objective evaluations, including line-search trials.
    pub f_evals: usize,
    /// Steps shortened because the trial point left the domain.
    pub domain_fallbacks: usize,
}

impl SolveResult {
    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }

    pub fn final_record(&self) -> Option<&IterRecord> {
        self.trace.last()
    }
}

/// Wall-clock source that reads zero unless enabled.
pub(crate) struct Clock {
    start: Option<std::time::Instant>,
}

impl Clock {
    pub(crate) fn new(enabled: bool) -> Self {
        Self { start: enabled.then(std::time::Instant::now) }
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.start.map_or(0.0, |s| s.elapsed().as_secs_f64())
    }
}
