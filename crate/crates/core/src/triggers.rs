//! Communication gates deciding whether an agent broadcasts its fresh
//! compressed innovation or lets neighbors keep using the last one sent.

use crate::error::{Error, Result};

/// Per-iteration threshold sequence for the deterministic gate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdSchedule {
    /// τ = 0: every iteration transmits.
    Zero,
    /// τ_k = a / (k + b)^c
    Fractional { a: f64, b: f64, c: f64 },
    /// τ_k = scale · rate^k
    Exponential { scale: f64, rate: f64 },
}

impl ThresholdSchedule {
    pub fn fractional(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0) || !(b >= 0.0) || !(c > 0.0) || !a.is_finite() || !b.is_finite() || !c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "fractional schedule needs a > 0, b >= 0, c > 0; got a={a}, b={b}, c={c}"
            )));
        }
        Ok(Self::Fractional { a, b, c })
    }

    pub fn exponential(scale: f64, rate: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() || !(rate > 0.0 && rate < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "exponential schedule needs scale > 0 and rate in (0, 1); got scale={scale}, rate={rate}"
            )));
        }
        Ok(Self::Exponential { scale, rate })
    }

    /// τ_k. With `b = 0` the fractional form is infinite at `k = 0`, which is
    /// harmless because iteration 0 always transmits.
    pub fn value(&self, k: usize) -> f64 {
        match *self {
            ThresholdSchedule::Zero => 0.0,
            ThresholdSchedule::Fractional { a, b, c } => a / (k as f64 + b).powf(c),
            ThresholdSchedule::Exponential { scale, rate } => scale * rate.powf(k as f64),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StochasticTriggerParams {
    kappa: f64,
    zeta_low: f64,
}

impl StochasticTriggerParams {
    pub fn new(kappa: f64, zeta_low: f64) -> Result<Self> {
        if !(kappa > 1.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!("kappa must exceed 1, got {kappa}")));
        }
        if !(zeta_low > 0.0 && zeta_low < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "zeta lower bound must lie in (0, 1), got {zeta_low}"
            )));
        }
        Ok(Self { kappa, zeta_low })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn zeta_low(&self) -> f64 {
        self.zeta_low
    }

    /// `ln κ − ln a`, the constant bounding ‖e‖ by ‖x − h‖.
    pub fn log_span(&self) -> f64 {
        self.kappa.ln() - self.zeta_low.ln()
    }

    /// Maps a uniform `[0, 1)` draw onto `(a, 1)`.
    pub fn zeta_from_uniform(&self, u: f64) -> f64 {
        let z = self.zeta_low + (1.0 - self.zeta_low) * u;
        // u = 0 would land on the open lower end
        if z <= self.zeta_low {
            self.zeta_low + f64::EPSILON * self.zeta_low
        } else {
            z
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TriggerPolicy {
    /// Transmit every iteration.
    Always,
    Deterministic(ThresholdSchedule),
    Stochastic(StochasticTriggerParams),
}

impl TriggerPolicy {
    pub fn uses_zeta(&self) -> bool {
        matches!(self, TriggerPolicy::Stochastic(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriggerDecision {
    pub fire: bool,
    /// ‖q_k − q̃_{k−1}‖
    pub innovation_norm: f64,
    /// τ_k for the deterministic gate; `κ·exp(−‖q − q̃‖/‖x − h‖)` for the
    /// stochastic one.
    pub threshold_used: f64,
}

/// Fires at `k = 0`, afterwards iff ‖q − q̃‖ ≥ τ.
pub fn deterministic_trigger(q: &[f64], q_prev_sent: &[f64], tau: f64, k: usize) -> TriggerDecision {
    assert_eq!(q.len(), q_prev_sent.len());
    let innovation_norm = crate::linalg::dist(q, q_prev_sent);
    TriggerDecision {
        fire: k == 0 || innovation_norm >= tau,
        innovation_norm,
        threshold_used: tau,
    }
}

/// Fires at `k = 0`, afterwards iff `ζ > κ·exp(−‖q − q̃‖/‖x − h‖)`.
///
/// A zero reference gap with zero innovation reads the exponent as 0 (no
/// fire); a zero gap with nonzero innovation reads it as −∞ (fire).
pub fn stochastic_trigger(
    q: &[f64],
    q_prev_sent: &[f64],
    x: &[f64],
    h: &[f64],
    params: &StochasticTriggerParams,
    zeta: f64,
    k: usize,
) -> TriggerDecision {
    let innovation_norm = crate::linalg::dist(q, q_prev_sent);
    let gap = crate::linalg::dist(x, h);
    let threshold_used = if gap > 0.0 {
        params.kappa * (-innovation_norm / gap).exp()
    } else if innovation_norm == 0.0 {
        params.kappa
    } else {
        0.0
    };
    TriggerDecision {
        fire: k == 0 || zeta > threshold_used,
        innovation_norm,
        threshold_used,
    }
}
