//! The six named algorithm configurations compared on the connectivity game.

use std::fmt;
use std::str::FromStr;

use crate::compressors::Compressor;
use crate::error::{Error, Result};
use crate::triggers::{StochasticTriggerParams, ThresholdSchedule, TriggerPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preset {
    Cdnes,
    Etne,
    Setne,
    Etcdnes1,
    Etcdnes2,
    Setcdnes,
}

/// Fully explicit algorithm parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgorithmSpec {
    pub compressor: Compressor,
    pub trigger: TriggerPolicy,
    pub eta: f64,
    pub gamma: f64,
    pub alpha: f64,
}

pub const BASELINE_NOTE: &str = "uncompressed event-triggered baseline (approx.)";

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Cdnes,
        Preset::Etne,
        Preset::Setne,
        Preset::Etcdnes1,
        Preset::Etcdnes2,
        Preset::Setcdnes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Cdnes => "CDNES",
            Preset::Etne => "ETNE",
            Preset::Setne => "SETNE",
            Preset::Etcdnes1 => "ETCDNES1",
            Preset::Etcdnes2 => "ETCDNES2",
            Preset::Setcdnes => "SETCDNES",
        }
    }

    /// The uncompressed comparison points.
    pub fn is_baseline(self) -> bool {
        matches!(self, Preset::Etne | Preset::Setne)
    }

    /// Baselines run the same update with the identity compressor and the
    /// shared consensus parameters `γ = 0.5`, `α = 0.05`.
    pub fn expand(self) -> AlgorithmSpec {
        let quantize = Compressor::Quantize { bits: 2 };
        let fractional = TriggerPolicy::Deterministic(ThresholdSchedule::Fractional {
            a: 10.0,
            b: 0.0,
            c: 1.1,
        });
        let stochastic = |kappa, zeta_low| {
            TriggerPolicy::Stochastic(StochasticTriggerParams::new(kappa, zeta_low).expect("preset constants are valid"))
        };
        let (compressor, trigger) = match self {
            Preset::Cdnes => (quantize, TriggerPolicy::Always),
            Preset::Etne => (Compressor::Identity, fractional),
            Preset::Setne => (Compressor::Identity, stochastic(1.075, 0.05)),
            Preset::Etcdnes1 => (quantize, fractional),
            Preset::Etcdnes2 => (
                quantize,
                TriggerPolicy::Deterministic(ThresholdSchedule::Exponential { scale: 50.0, rate: 0.99 }),
            ),
            Preset::Setcdnes => (quantize, stochastic(1.5, 0.5)),
        };
        AlgorithmSpec {
            compressor,
            trigger,
            eta: 0.01,
            gamma: 0.5,
            alpha: 0.05,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| *c != '-' && *c != '_').collect();
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(&key))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset {s:?}; expected one of {}",
                    Preset::ALL.map(Preset::name).join(", ")
                ))
            })
    }
}
