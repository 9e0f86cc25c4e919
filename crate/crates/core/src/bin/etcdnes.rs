use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use etcdnes::compressors::{certify_constants, Compressor};
use etcdnes::harness::config::AlgorithmChoice;
use etcdnes::harness::{emit_outputs, run_experiment, ExperimentConfig};
use etcdnes::theory::{analyze, certified_eta, Certificate};
use etcdnes::triggers::TriggerPolicy;
use etcdnes::Result;

#[derive(Parser)]
#[command(name = "etcdnes", version, about = "Compressed, event-triggered distributed Nash equilibrium seeking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured algorithm on every seed and write CSV traces.
    Run(Common),
    /// Print the convergence constants, stepsize bounds and rate certificates.
    Certify(Common),
    /// Check compressor constants empirically on Gaussian inputs.
    CompressBench {
        #[command(flatten)]
        common: Common,
        /// Samples per (compressor, dimension).
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Comma-separated dimensions.
        #[arg(long, default_value = "2,10,100", value_delimiter = ',')]
        dims: Vec<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// Key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated preset names (overrides the file).
    #[arg(long)]
    preset: Option<String>,
    /// Single seed (overrides `seeds`).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iters: Option<usize>,
    /// Residual target, or `none`.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut overrides = Vec::new();
        if let Some(p) = &self.preset {
            overrides.push(("preset", p.clone()));
        }
        if let Some(s) = self.seed {
            overrides.push(("seeds", s.to_string()));
        }
        if let Some(k) = self.iters {
            overrides.push(("iters", k.to_string()));
        }
        if let Some(t) = &self.target {
            overrides.push(("target", t.clone()));
        }
        if let Some(o) = &self.out {
            overrides.push(("out", o.display().to_string()));
        }
        ExperimentConfig::load(self.config.as_deref(), &overrides)
    }
}

fn run(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let result = run_experiment(&cfg)?;
    let files = emit_outputs(&result, &cfg.out)?;
    print!("{}", result.comparison.to_text());
    eprintln!("wrote {} files to {}", files.len(), cfg.out.display());
    Ok(())
}

fn certify(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let instance = cfg.instance()?;
    for choice in &cfg.algorithms {
        let spec = instance.resolve(choice)?;
        let inputs = instance.theory_inputs(spec.compressor, spec.alpha, &spec.trigger)?;
        println!("algorithm={}", choice.label());
        println!("n={}", inputs.n);
        println!("mu_r={}", inputs.mu_r);
        println!("L_m={}", inputs.l_m);
        println!("fro_I_minus_W={}", inputs.fro_i_minus_w);
        println!("lambda_min_tilde={}", inputs.lambda_min_tilde);
        println!("compressor={}", spec.compressor);
        println!("C={}", inputs.compressor.c);
        println!("delta={}", inputs.compressor.delta);
        println!("r={}", inputs.compressor.r);
        println!("alpha={}", inputs.alpha);
        for (name, which) in [
            ("deterministic", Certificate::Deterministic),
            ("stochastic", Certificate::Stochastic),
        ] {
            if which == Certificate::Stochastic && inputs.stochastic.is_none() {
                continue;
            }
            match certified_eta(&inputs, which) {
                Ok(eta) => println!("certified_eta_{name}={eta}"),
                Err(e) => println!("certified_eta_{name}=none ({e})"),
            }
        }
        match analyze(&inputs, spec.eta) {
            Ok(t) => {
                print!("{}", t.to_report());
                let which = match spec.trigger {
                    TriggerPolicy::Stochastic(_) => Certificate::Stochastic,
                    _ => Certificate::Deterministic,
                };
                println!("configured_gamma={}", spec.gamma);
                println!("certified={}", t.certifies(which) && spec.gamma <= t.gamma_star);
            }
            Err(e) => println!("constants=none ({e})"),
        }
        println!();
    }
    Ok(())
}

fn compress_bench(common: &Common, samples: usize, dims: &[usize]) -> Result<bool> {
    let cfg = common.load()?;
    let seed = cfg.seeds[0];
    let mut all_ok = true;
    for &d in dims {
        let mut compressors: Vec<Compressor> = cfg
            .algorithms
            .iter()
            .filter_map(|a| match a {
                AlgorithmChoice::Explicit(e) => Some(e.compressor.resolve(d)),
                AlgorithmChoice::Preset(_) => None,
            })
            .filter(|c| !c.is_identity())
            .collect();
        if compressors.is_empty() {
            compressors = vec![
                Compressor::Quantize { bits: 2 },
                Compressor::TopK { k: (d / 10).max(1) },
                Compressor::NormSign,
            ];
        }
        for c in compressors {
            match certify_constants(c, d, samples, seed) {
                Ok(r) => println!(
                    "compressor={c} d={d} declared_C={} mean={} std_err={} max={} scaled_mean={} declared_one_minus_delta={} status=ok",
                    r.declared.c,
                    r.c_mean,
                    r.c_std_err,
                    r.c_max,
                    r.scaled_mean,
                    1.0 - r.declared.delta
                ),
                Err(e) => {
                    all_ok = false;
                    println!("compressor={c} d={d} status=rejected ({e})");
                }
            }
        }
    }
    Ok(all_ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(c) => run(c).map(|_| true),
        Command::Certify(c) => certify(c).map(|_| true),
        Command::CompressBench { common, samples, dims } => compress_bench(common, *samples, dims),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
