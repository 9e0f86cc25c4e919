//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # 50-agent connectivity benchmark
//! graph.n = 50
//! graph.p = 0.1
//! preset = ETCDNES2, SETCDNES
//! iters = 100000
//! target = 0.01
//! seeds = 1, 2, 3
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::compressors::{Compressor, DEFAULT_SCALAR_BITS};
use crate::error::{Error, Result};
use crate::games::{self, ConnectivityGame, EquilibriumSource, Game, QuadraticGame};
use crate::graph::{build_row_stochastic_weights, spectral_quantities, DiGraph, WeightMatrix};
use crate::harness::presets::{AlgorithmSpec, Preset};
use crate::theory::{certified_stepsizes, Certificate, TheoryInputs};
use crate::triggers::{StochasticTriggerParams, ThresholdSchedule, TriggerPolicy};

const KEYS: &[&str] = &[
    "graph.file",
    "graph.n",
    "graph.p",
    "graph.seed",
    "game",
    "game.n",
    "game.matrix",
    "game.vector",
    "game.action_dim",
    "preset",
    "compressor",
    "quantize.bits",
    "topk.k",
    "scalar_bits",
    "trigger",
    "trigger.schedule",
    "trigger.fractional.a",
    "trigger.fractional.b",
    "trigger.fractional.exponent",
    "trigger.exponential.scale",
    "trigger.exponential.rate",
    "trigger.kappa",
    "trigger.zeta_low",
    "stepsizes",
    "eta",
    "gamma",
    "alpha",
    "iters",
    "target",
    "seeds",
    "out",
];

/// Keys that describe an explicit algorithm and so clash with `preset`.
const ALGORITHM_KEYS: &[&str] = &[
    "compressor",
    "quantize.bits",
    "topk.k",
    "trigger",
    "trigger.schedule",
    "trigger.fractional.a",
    "trigger.fractional.b",
    "trigger.fractional.exponent",
    "trigger.exponential.scale",
    "trigger.exponential.rate",
    "trigger.kappa",
    "trigger.zeta_low",
    "stepsizes",
    "eta",
    "gamma",
    "alpha",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected key = value, got {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(parse_err(format!("unknown key {k:?}")));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(parse_err(format!("duplicate key {k:?}")));
        }
    }
    Ok(map)
}

#[derive(Clone, Debug, PartialEq)]
pub enum GraphSource {
    File(PathBuf),
    Random { n: usize, p: f64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum GameSpec {
    Connectivity { n: Option<usize> },
    Quadratic {
        matrix: PathBuf,
        vector: PathBuf,
        action_dim: usize,
    },
}

/// Compressor choice before the estimate dimension is known.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CompressorChoice {
    Identity,
    Quantize { bits: u32 },
    /// `None` keeps a tenth of the entries.
    TopK { k: Option<usize> },
    NormSign,
}

impl CompressorChoice {
    pub fn resolve(self, d: usize) -> Compressor {
        match self {
            CompressorChoice::Identity => Compressor::Identity,
            CompressorChoice::Quantize { bits } => Compressor::Quantize { bits },
            CompressorChoice::TopK { k } => Compressor::TopK {
                k: k.unwrap_or((d / 10).max(1)),
            },
            CompressorChoice::NormSign => Compressor::NormSign,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stepsizes {
    Fixed { eta: f64, gamma: f64 },
    /// Largest `η` certified by the bound matching the trigger, `γ = μ_F/L_F²`.
    Certified,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplicitAlgorithm {
    pub compressor: CompressorChoice,
    pub trigger: TriggerPolicy,
    pub stepsizes: Stepsizes,
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlgorithmChoice {
    Preset(Preset),
    Explicit(ExplicitAlgorithm),
}

impl AlgorithmChoice {
    pub fn label(&self) -> String {
        match self {
            AlgorithmChoice::Preset(p) => p.name().to_string(),
            AlgorithmChoice::Explicit(_) => "custom".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    pub game: GameSpec,
    pub algorithms: Vec<AlgorithmChoice>,
    pub scalar_bits: u32,
    pub iters: usize,
    pub target: Option<f64>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

/// Network, game and reference equilibrium shared by every run of an
/// experiment.
#[derive(Clone, Debug)]
pub struct Instance {
    pub graph: DiGraph,
    pub weights: Arc<WeightMatrix>,
    pub game: Arc<dyn Game>,
    pub x_star: Vec<f64>,
    pub reference: EquilibriumSource,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_map(parse_key_values(&text, path)?)
    }

    /// Reads `path` if given, then lets `overrides` replace file values.
    pub fn load(path: Option<&Path>, overrides: &[(&str, String)]) -> Result<Self> {
        let mut map = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                parse_key_values(&text, p)?
            }
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            map.insert(k.to_string(), v.clone());
        }
        Self::from_map(map)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_map(parse_key_values(text, Path::new("<config>"))?)
    }

    /// Resolves a key-value map, filling defaults for the 50-agent connectivity benchmark.
    pub fn from_map(map: BTreeMap<String, String>) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key {k:?}")));
        }
        let r = Reader { map: &map };

        let graph = match r.get("graph.file") {
            Some(f) => {
                for k in ["graph.n", "graph.p", "graph.seed"] {
                    if map.contains_key(k) {
                        return Err(Error::Config(format!("{k} conflicts with graph.file")));
                    }
                }
                GraphSource::File(PathBuf::from(f))
            }
            None => GraphSource::Random {
                n: r.parse_or("graph.n", 50)?,
                p: r.parse_or("graph.p", 0.1)?,
                seed: r.parse_or("graph.seed", 1)?,
            },
        };

        let game = match r.get("game").unwrap_or("connectivity") {
            "connectivity" => GameSpec::Connectivity { n: r.parse_opt("game.n")? },
            "quadratic" => GameSpec::Quadratic {
                matrix: PathBuf::from(r.require("game.matrix")?),
                vector: PathBuf::from(r.require("game.vector")?),
                action_dim: r.parse_or("game.action_dim", 1)?,
            },
            other => return Err(Error::Config(format!("unknown game {other:?}"))),
        };

        let algorithms = match r.get("preset") {
            Some(list) => {
                if let Some(k) = ALGORITHM_KEYS.iter().find(|k| map.contains_key(**k)) {
                    return Err(Error::Config(format!("{k} conflicts with preset")));
                }
                split_list(list)
                    .map(|p| p.parse().map(AlgorithmChoice::Preset))
                    .collect::<Result<Vec<_>>>()?
            }
            None => vec![AlgorithmChoice::Explicit(explicit_algorithm(&r)?)],
        };
        if algorithms.is_empty() {
            return Err(Error::Config("preset list is empty".into()));
        }

        let target = match r.get("target") {
            None => Some(0.01),
            Some("none") => None,
            Some(v) => Some(parse_value::<f64>("target", v)?),
        };
        if target.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config("target must be positive".into()));
        }
        let seeds = match r.get("seeds") {
            None => vec![1],
            Some(list) => split_list(list)
                .map(|s| parse_value("seeds", s))
                .collect::<Result<Vec<u64>>>()?,
        };
        if seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }

        Ok(Self {
            graph,
            game,
            algorithms,
            scalar_bits: r.parse_or("scalar_bits", DEFAULT_SCALAR_BITS)?,
            iters: r.parse_or("iters", 100_000)?,
            target,
            seeds,
            out: PathBuf::from(r.get("out").unwrap_or("out")),
        })
    }

    /// Builds the graph, weights, game and equilibrium.
    pub fn instance(&self) -> Result<Instance> {
        let graph = match &self.graph {
            GraphSource::File(p) => DiGraph::read_edge_list(p)?,
            GraphSource::Random { n, p, seed } => DiGraph::random_strongly_connected(*n, *p, *seed)?,
        };
        let weights = Arc::new(build_row_stochastic_weights(&graph)?);
        let n = graph.agents();
        let game: Arc<dyn Game> = match &self.game {
            GameSpec::Connectivity { n: players } => {
                let players = players.unwrap_or(n);
                if players != n {
                    return Err(Error::Config(format!("game.n = {players} but the graph has {n} agents")));
                }
                Arc::new(ConnectivityGame::new(players)?)
            }
            GameSpec::Quadratic {
                matrix,
                vector,
                action_dim,
            } => Arc::new(QuadraticGame::from_csv(matrix, vector, *action_dim)?),
        };
        if game.players() != n {
            return Err(Error::Config(format!(
                "game has {} players but the graph has {n} agents",
                game.players()
            )));
        }
        let (x_star, reference) = games::equilibrium(game.as_ref())?;
        Ok(Instance {
            graph,
            weights,
            game,
            x_star,
            reference,
        })
    }
}

impl Instance {
    /// Problem constants for the convergence theory.
    pub fn theory_inputs(&self, compressor: Compressor, alpha: f64, trigger: &TriggerPolicy) -> Result<TheoryInputs> {
        let constants = games::game_constants(self.game.as_ref())?;
        let spectral = spectral_quantities(&self.weights)?;
        Ok(TheoryInputs {
            n: self.graph.agents(),
            mu_r: constants.mu_r,
            l_m: constants.l_m,
            fro_i_minus_w: spectral.fro_i_minus_w,
            lambda_min_tilde: spectral.lambda_min_tilde,
            compressor: compressor.constants(self.game.profile_dim()),
            alpha,
            stochastic: match trigger {
                TriggerPolicy::Stochastic(p) => Some(*p),
                _ => None,
            },
        })
    }

    /// Concrete parameters of one algorithm on this instance.
    pub fn resolve(&self, choice: &AlgorithmChoice) -> Result<AlgorithmSpec> {
        match choice {
            AlgorithmChoice::Preset(p) => Ok(p.expand()),
            AlgorithmChoice::Explicit(e) => {
                let compressor = e.compressor.resolve(self.game.profile_dim());
                let (eta, gamma) = match e.stepsizes {
                    Stepsizes::Fixed { eta, gamma } => (eta, gamma),
                    Stepsizes::Certified => {
                        let inputs = self.theory_inputs(compressor, e.alpha, &e.trigger)?;
                        let which = if inputs.stochastic.is_some() {
                            Certificate::Stochastic
                        } else {
                            Certificate::Deterministic
                        };
                        let s = certified_stepsizes(&inputs, which)?;
                        (s.eta, s.gamma)
                    }
                };
                Ok(AlgorithmSpec {
                    compressor,
                    trigger: e.trigger,
                    eta,
                    gamma,
                    alpha: e.alpha,
                })
            }
        }
    }
}

fn explicit_algorithm(r: &Reader<'_>) -> Result<ExplicitAlgorithm> {
    let compressor = match r.get("compressor").unwrap_or("identity") {
        "identity" => CompressorChoice::Identity,
        "quantize" => CompressorChoice::Quantize {
            bits: r.parse_or("quantize.bits", 2)?,
        },
        "topk" => CompressorChoice::TopK {
            k: r.parse_opt("topk.k")?,
        },
        "normsign" => CompressorChoice::NormSign,
        other => return Err(Error::Config(format!("unknown compressor {other:?}"))),
    };
    let trigger = match r.get("trigger").unwrap_or("always") {
        "always" => TriggerPolicy::Always,
        "deterministic" => TriggerPolicy::Deterministic(match r.get("trigger.schedule").unwrap_or("zero") {
            "zero" => ThresholdSchedule::Zero,
            "fractional" => ThresholdSchedule::fractional(
                r.parse_or("trigger.fractional.a", 10.0)?,
                r.parse_or("trigger.fractional.b", 0.0)?,
                r.parse_or("trigger.fractional.exponent", 1.1)?,
            )?,
            "exponential" => ThresholdSchedule::exponential(
                r.parse_or("trigger.exponential.scale", 50.0)?,
                r.parse_or("trigger.exponential.rate", 0.99)?,
            )?,
            other => return Err(Error::Config(format!("unknown trigger.schedule {other:?}"))),
        }),
        "stochastic" => TriggerPolicy::Stochastic(StochasticTriggerParams::new(
            r.parse_or("trigger.kappa", 1.5)?,
            r.parse_or("trigger.zeta_low", 0.5)?,
        )?),
        other => return Err(Error::Config(format!("unknown trigger {other:?}"))),
    };
    let stepsizes = match r.get("stepsizes").unwrap_or("fixed") {
        "fixed" => Stepsizes::Fixed {
            eta: r.parse_or("eta", 0.01)?,
            gamma: r.parse_or("gamma", 0.5)?,
        },
        "certified" => {
            for k in ["eta", "gamma"] {
                if r.get(k).is_some() {
                    return Err(Error::Config(format!("{k} conflicts with stepsizes = certified")));
                }
            }
            Stepsizes::Certified
        }
        other => return Err(Error::Config(format!("unknown stepsizes {other:?}"))),
    };
    Ok(ExplicitAlgorithm {
        compressor,
        trigger,
        stepsizes,
        alpha: r.parse_or("alpha", 0.05)?,
    })
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| Error::Config(format!("{key} = {v:?}: {e}")))
}

struct Reader<'a> {
    map: &'a BTreeMap<String, String>,
}

impl Reader<'_> {
    fn get(&self, k: &str) -> Option<&str> {
        self.map.get(k).map(String::as_str)
    }

    fn require(&self, k: &str) -> Result<&str> {
        self.get(k).ok_or_else(|| Error::Config(format!("missing key {k}")))
    }

    fn parse_opt<T: std::str::FromStr>(&self, k: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(k).map(|v| parse_value(k, v)).transpose()
    }

    fn parse_or<T: std::str::FromStr>(&self, k: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse_opt(k)?.unwrap_or(default))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_benchmark_setup() {
        let c = ExperimentConfig::from_text("preset = SETCDNES\n").unwrap();
        assert_eq!(
            c.graph,
            GraphSource::Random {
                n: 50,
                p: 0.1,
                seed: 1
            }
        );
        assert_eq!(c.game, GameSpec::Connectivity { n: None });
        assert_eq!(c.algorithms, vec![AlgorithmChoice::Preset(Preset::Setcdnes)]);
        assert_eq!((c.iters, c.target, c.scalar_bits), (100_000, Some(0.01), 32));
        assert_eq!(c.seeds, vec![1]);
    }

    #[test]
    fn parses_lists_comments_and_explicit() {
        let text = "\
# comment
graph.n = 6   # trailing
graph.p = 0.5
compressor = topk
trigger = deterministic
trigger.schedule = exponential
trigger.exponential.scale = 2
eta = 0.02
seeds = 3, 4 ,5
target = none
";
        let c = ExperimentConfig::from_text(text).unwrap();
        assert_eq!(c.seeds, vec![3, 4, 5]);
        assert_eq!(c.target, None);
        let AlgorithmChoice::Explicit(e) = c.algorithms[0] else {
            panic!()
        };
        assert_eq!(e.compressor, CompressorChoice::TopK { k: None });
        assert_eq!(e.compressor.resolve(12), Compressor::TopK { k: 1 });
        assert_eq!(
            e.trigger,
            TriggerPolicy::Deterministic(ThresholdSchedule::Exponential { scale: 2.0, rate: 0.99 })
        );
        assert_eq!(e.stepsizes, Stepsizes::Fixed { eta: 0.02, gamma: 0.5 });
        let inst = c.instance().unwrap();
        assert_eq!(inst.graph.agents(), 6);
        assert_eq!(inst.x_star, vec![-0.5; 12]);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            "graph.nodes = 5",
            "preset = CDNES\neta = 0.1",
            "preset = FOO",
            "iters = -3",
            "compressor = zip",
            "graph.n = 5\ngraph.n = 6",
            "no equals sign",
            "trigger = stochastic\ntrigger.kappa = 0.9",
            "stepsizes = certified\neta = 0.1",
            "graph.file = g.txt\ngraph.n = 5",
            "target = 0",
        ] {
            assert!(ExperimentConfig::from_text(bad).is_err(), "{bad:?} accepted");
        }
        let c = ExperimentConfig::from_text("graph.n = 4\ngame.n = 5").unwrap();
        assert!(c.instance().is_err());
    }

    #[test]
    fn parse_errors_carry_line() {
        match parse_key_values("a.b = 1\n", Path::new("x.cfg")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quadratic_game_from_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.csv"), "2,1\n-1,2\n").unwrap();
        std::fs::write(dir.path().join("v.csv"), "1,-1\n").unwrap();
        std::fs::write(dir.path().join("g.txt"), "2\n1 2\n2 1\n").unwrap();
        let text = format!(
            "graph.file = {0}/g.txt\ngame = quadratic\ngame.matrix = {0}/m.csv\ngame.vector = {0}/v.csv\nalpha = 1\nstepsizes = certified\n",
            dir.path().display()
        );
        let c = ExperimentConfig::from_text(&text).unwrap();
        let inst = c.instance().unwrap();
        assert_eq!(inst.reference, EquilibriumSource::LinearSolve);
        let spec = inst.resolve(&c.algorithms[0]).unwrap();
        assert!(spec.eta > 0.0 && spec.gamma > 0.0);
    }
}
