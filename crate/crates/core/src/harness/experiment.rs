//! Replicated runs over (algorithm, seed) pairs and their on-disk outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dynamics::{run, AlgorithmParams, RunSpec, SimulationSetup};
use crate::error::{Error, Result};
use crate::harness::config::{AlgorithmChoice, ExperimentConfig, Instance};
use crate::harness::presets::{AlgorithmSpec, BASELINE_NOTE};
use crate::metrics::RunTrace;

/// Setup for one seed: `X0` uniform on `[0, 1]`, `H0 = 0`.
pub fn setup_for(instance: &Instance, spec: &AlgorithmSpec, iters: usize, seed: u64, scalar_bits: u32) -> SimulationSetup {
    let mut setup = SimulationSetup::with_random_start(
        instance.game.clone(),
        instance.weights.clone(),
        spec.compressor,
        spec.trigger,
        AlgorithmParams {
            eta: spec.eta,
            gamma: spec.gamma,
            alpha: spec.alpha,
            max_iters: iters,
        },
        seed,
    );
    setup.scalar_bits = scalar_bits;
    setup
}

pub fn run_spec_for(instance: &Instance, setup: SimulationSetup, target: Option<f64>) -> RunSpec {
    RunSpec {
        setup,
        x_star: instance.x_star.clone(),
        reference: instance.reference,
        target,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub label: String,
    pub baseline: bool,
    pub seed: u64,
    pub trace: RunTrace,
}

impl RunOutcome {
    pub fn stem(&self) -> String {
        format!("{}_seed{}", self.label, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmComparison {
    pub label: String,
    pub baseline: bool,
    pub runs: usize,
    pub converged: usize,
    /// Means over runs, present only when every run reached the target.
    pub mean_bits_to_target: Option<f64>,
    pub mean_rounds_to_target: Option<f64>,
    pub mean_final_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub target: Option<f64>,
    pub iters: usize,
    /// Converged algorithms by ascending mean bits, then the rest.
    pub entries: Vec<AlgorithmComparison>,
}

impl Comparison {
    pub fn from_runs(runs: &[RunOutcome], target: Option<f64>, iters: usize) -> Self {
        let mut labels: Vec<&str> = Vec::new();
        for r in runs {
            if !labels.contains(&r.label.as_str()) {
                labels.push(&r.label);
            }
        }
        let mut entries: Vec<AlgorithmComparison> = labels
            .iter()
            .map(|label| {
                let group: Vec<&RunOutcome> = runs.iter().filter(|r| r.label == *label).collect();
                let count = group.len() as f64;
                let converged = group.iter().filter(|r| r.trace.summary.converged_at.is_some()).count();
                let all = converged == group.len();
                let mean = |f: &dyn Fn(&RunOutcome) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / count;
                AlgorithmComparison {
                    label: label.to_string(),
                    baseline: group[0].baseline,
                    runs: group.len(),
                    converged,
                    mean_bits_to_target: all
                        .then(|| mean(&|r| r.trace.summary.bits_to_target.unwrap_or(0) as f64)),
                    mean_rounds_to_target: all
                        .then(|| mean(&|r| r.trace.summary.rounds_to_target.unwrap_or(0) as f64)),
                    mean_final_residual: mean(&|r| r.trace.summary.final_residual),
                }
            })
            .collect();
        entries.sort_by(|a, b| match (a.mean_bits_to_target, b.mean_bits_to_target) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        });
        Self { target, iters, entries }
    }

    pub fn get(&self, label: &str) -> Option<&AlgorithmComparison> {
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "target={}", self.target.map_or("none".into(), |t| t.to_string()));
        let _ = writeln!(s, "iterations={}", self.iters);
        let order: Vec<&str> = self.entries.iter().map(|e| e.label.as_str()).collect();
        let _ = writeln!(s, "order={}", order.join(","));
        for e in &self.entries {
            let p = &e.label;
            if e.baseline {
                let _ = writeln!(s, "{p}.note={BASELINE_NOTE}");
            }
            let _ = writeln!(s, "{p}.runs={}", e.runs);
            let _ = writeln!(s, "{p}.converged={}", e.converged);
            match (e.mean_bits_to_target, e.mean_rounds_to_target) {
                (Some(bits), Some(rounds)) => {
                    let _ = writeln!(s, "{p}.status=converged");
                    let _ = writeln!(s, "{p}.mean_bits_to_target={bits}");
                    let _ = writeln!(s, "{p}.mean_rounds_to_target={rounds}");
                }
                _ if self.target.is_none() => {
                    let _ = writeln!(s, "{p}.status=no target");
                }
                _ => {
                    let _ = writeln!(s, "{p}.status=not converged at K");
                }
            }
            let _ = writeln!(s, "{p}.mean_final_residual={}", e.mean_final_residual);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub runs: Vec<RunOutcome>,
    pub comparison: Comparison,
}

impl ExperimentResult {
    /// Comparison block followed by every run's summary, keys prefixed with
    /// the run's file stem.
    pub fn summary_text(&self) -> String {
        let mut s = self.comparison.to_text();
        for r in &self.runs {
            for line in r.trace.summary.to_text().lines() {
                let _ = writeln!(s, "{}.{line}", r.stem());
            }
        }
        s
    }
}

/// Every configured algorithm on every seed, in parallel.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let instance = cfg.instance()?;
    let jobs: Vec<(AlgorithmChoice, u64)> = cfg
        .algorithms
        .iter()
        .flat_map(|a| cfg.seeds.iter().map(move |s| (*a, *s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|(choice, seed)| {
            let label = choice.label();
            let wrap = |e: Error| Error::Run {
                label: label.clone(),
                seed: *seed,
                source: Box::new(e),
            };
            let spec = instance.resolve(choice).map_err(wrap)?;
            let setup = setup_for(&instance, &spec, cfg.iters, *seed, cfg.scalar_bits);
            let trace = run(&run_spec_for(&instance, setup, cfg.target)).map_err(wrap)?;
            Ok(RunOutcome {
                baseline: matches!(choice, AlgorithmChoice::Preset(p) if p.is_baseline()),
                label,
                seed: *seed,
                trace,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let comparison = Comparison::from_runs(&runs, cfg.target, cfg.iters);
    Ok(ExperimentResult { runs, comparison })
}

/// Writes `{label}_seed{seed}.csv`, `{label}_seed{seed}_triggers.csv` and
/// `summary.txt` into `dir`; returns the paths written.
pub fn emit_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut write = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    for r in &result.runs {
        write(format!("{}.csv", r.stem()), r.trace.to_csv())?;
        write(format!("{}_triggers.csv", r.stem()), r.trace.trigger_log_csv())?;
    }
    write("summary.txt".into(), result.summary_text())?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_text(&format!("graph.n = 6\ngraph.p = 0.4\n{extra}")).unwrap()
    }

    #[test]
    fn fan_out_two_seeds() {
        let cfg = small("preset = SETCDNES\nseeds = 1, 2\niters = 400\ntarget = 0.5\n");
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.runs.len(), 2);
        let dir = tempfile::tempdir().unwrap();
        let files = emit_outputs(&res, dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        assert!(dir.path().join("SETCDNES_seed2_triggers.csv").exists());
    }

    #[test]
    fn six_presets_make_thirteen_files() {
        let cfg = small("preset = CDNES, ETNE, SETNE, ETCDNES1, ETCDNES2, SETCDNES\niters = 400\ntarget = 0.5\n");
        let res = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_outputs(&res, dir.path()).unwrap();
        assert_eq!(files.len(), 13);
        let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.contains(&format!("ETNE.note={BASELINE_NOTE}")));
        assert!(summary.contains("order="));
    }

    #[test]
    fn unreachable_target_is_marked() {
        let cfg = small("preset = CDNES\ntarget = 1e-9\niters = 5\n");
        let res = run_experiment(&cfg).unwrap();
        assert!(res.comparison.to_text().contains("CDNES.status=not converged at K"));
        assert_eq!(res.comparison.get("CDNES").unwrap().mean_bits_to_target, None);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let cfg = small("preset = SETCDNES, ETCDNES2\nseeds = 7\niters = 400\n");
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        emit_outputs(&run_experiment(&cfg).unwrap(), a.path()).unwrap();
        emit_outputs(&run_experiment(&cfg).unwrap(), b.path()).unwrap();
        for name in ["SETCDNES_seed7.csv", "ETCDNES2_seed7_triggers.csv", "summary.txt"] {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name}");
        }
    }

    #[test]
    fn no_target_is_not_a_failure() {
        let cfg = small("preset = CDNES\ntarget = none\niters = 5\n");
        let text = run_experiment(&cfg).unwrap().comparison.to_text();
        assert!(text.contains("CDNES.status=no target"));
        assert!(text.contains("target=none"));
    }

    #[test]
    fn empty_trace_gives_header_only_csv() {
        let cfg = small("preset = CDNES\niters = 0\n");
        let res = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_outputs(&res, dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("CDNES_seed1.csv")).unwrap();
        assert_eq!(csv, format!("{}\n", crate::metrics::CSV_HEADER));
    }

    #[test]
    fn divergence_names_the_run() {
        let cfg = small("eta = 50\ngamma = 5\nalpha = 1\nseeds = 4\niters = 400\n");
        match run_experiment(&cfg) {
            Err(Error::Run { label, seed, source }) => {
                assert_eq!((label.as_str(), seed), ("custom", 4));
                assert!(matches!(*source, Error::Diverged { .. }));
            }
            other => panic!("{other:?}"),
        }
    }
}
