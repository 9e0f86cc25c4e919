//! Residuals, Lyapunov terms, bit and round accounting, and the CSV/summary
//! renderings of a run.

use std::fmt::Write as _;

use crate::compressors::Compressor;
use crate::dynamics::IterationEvents;
use crate::error::{Error, Result};
use crate::games::EquilibriumSource;
use crate::linalg::Mat;

pub const CSV_HEADER: &str = "k,residual,v1,v2,event_err_sq,bits_cum,rounds_cum,n_triggered";
pub const TRIGGER_LOG_HEADER: &str = "agent,iteration";

/// `‖X_k − X*‖_F / ‖X_0 − X*‖_F`
pub fn residual(xk: &Mat, x_star: &Mat, x0: &Mat) -> Result<f64> {
    let denom = x0.dist_sq(x_star);
    if denom == 0.0 {
        return Err(Error::ZeroInitialResidual);
    }
    Ok((xk.dist_sq(x_star) / denom).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    /// Per-iteration slope of `ln R_k`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(k, ln R_k)` with `k` counted from the start
/// of `residuals`. A flat series has `r² = 1`.
pub fn linear_rate_fit(residuals: &[f64]) -> Result<RateFit> {
    if residuals.len() < 2 {
        return Err(Error::InvalidParameter("rate fit needs at least two residuals".into()));
    }
    if let Some(bad) = residuals.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidParameter(format!("rate fit needs positive residuals, found {bad}")));
    }
    let n = residuals.len() as f64;
    let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (k, y) in ys.iter().enumerate() {
        let dx = k as f64 - x_mean;
        let dy = y - y_mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res: f64 = ys
        .iter()
        .enumerate()
        .map(|(k, y)| (y - intercept - slope * k as f64).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Suffix of `residuals` starting at the first value below `threshold`.
pub fn window_below(residuals: &[f64], threshold: f64) -> Option<&[f64]> {
    residuals.iter().position(|&r| r < threshold).map(|i| &residuals[i..])
}

/// Bits charged for one iteration: every triggered agent pays one payload.
pub fn bits_accounting(triggered: &[bool], compressor: Compressor, d: usize, l: u32) -> u64 {
    triggered.iter().filter(|&&t| t).count() as u64 * compressor.bits(d, l)
}

/// Same, read off a step's events.
pub fn event_bits(events: &IterationEvents, compressor: Compressor, d: usize, l: u32) -> u64 {
    bits_accounting(&events.triggered(), compressor, d, l)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub residual: f64,
    /// ‖X_k − X*‖²_F
    pub v1: f64,
    /// ‖X_k − H_k‖²_F
    pub v2: f64,
    /// ‖E_k‖²_F
    pub event_err_sq: f64,
    pub bits_cum: u64,
    pub rounds_cum: u64,
    pub triggers: Vec<bool>,
}

impl IterationRecord {
    pub fn n_triggered(&self) -> usize {
        self.triggers.iter().filter(|&&t| t).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub iterations: usize,
    pub agents: usize,
    /// Residual of the last state reached.
    pub final_residual: f64,
    pub total_bits: u64,
    pub total_rounds: u64,
    /// Trigger events over `agents × iterations`.
    pub communication_rate: f64,
    pub target: Option<f64>,
    pub converged_at: Option<usize>,
    pub bits_to_target: Option<u64>,
    pub rounds_to_target: Option<u64>,
    pub reference: EquilibriumSource,
}

impl RunSummary {
    pub fn from_records(
        records: &[IterationRecord],
        agents: usize,
        final_residual: f64,
        target: Option<f64>,
        converged_at: Option<usize>,
        reference: EquilibriumSource,
    ) -> Self {
        let (total_bits, total_rounds) = records.last().map_or((0, 0), |r| (r.bits_cum, r.rounds_cum));
        let slots = (agents * records.len()) as f64;
        let communication_rate = if slots == 0.0 { 0.0 } else { total_rounds as f64 / slots };
        // records stop right before the converged state, so the totals are
        // exactly what it cost to get there
        let (bits_to_target, rounds_to_target) = match converged_at {
            Some(_) => (Some(total_bits), Some(total_rounds)),
            None => (None, None),
        };
        Self {
            iterations: records.len(),
            agents,
            final_residual,
            total_bits,
            total_rounds,
            communication_rate,
            target,
            converged_at,
            bits_to_target,
            rounds_to_target,
            reference,
        }
    }

    /// Flat `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        let _ = writeln!(s, "iterations={}", self.iterations);
        let _ = writeln!(s, "agents={}", self.agents);
        let _ = writeln!(s, "final_residual={}", self.final_residual);
        let _ = writeln!(s, "total_bits={}", self.total_bits);
        let _ = writeln!(s, "total_rounds={}", self.total_rounds);
        let _ = writeln!(s, "communication_rate={}", self.communication_rate);
        let _ = writeln!(s, "target={}", opt(self.target.map(|t| t.to_string())));
        let _ = writeln!(s, "converged_at={}", opt(self.converged_at.map(|t| t.to_string())));
        let _ = writeln!(s, "bits_to_target={}", opt(self.bits_to_target.map(|t| t.to_string())));
        let _ = writeln!(s, "rounds_to_target={}", opt(self.rounds_to_target.map(|t| t.to_string())));
        let _ = writeln!(s, "equilibrium={}", self.reference);
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub summary: RunSummary,
}

impl RunTrace {
    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.records.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.k,
                r.residual,
                r.v1,
                r.v2,
                r.event_err_sq,
                r.bits_cum,
                r.rounds_cum,
                r.n_triggered()
            );
        }
        s
    }

    /// One `agent,iteration` line per trigger event, agents 0-based.
    pub fn trigger_log_csv(&self) -> String {
        let mut s = String::from(TRIGGER_LOG_HEADER);
        s.push('\n');
        for r in &self.records {
            for (i, _) in r.triggers.iter().enumerate().filter(|(_, &t)| t) {
                let _ = writeln!(s, "{i},{}", r.k);
            }
        }
        s
    }
}
