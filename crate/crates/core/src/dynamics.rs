//! Per-iteration execution of the compressed, event-triggered seeking
//! dynamics on the stacked agent matrices.
//!
//! Row `i` of every matrix belongs to agent `i`. Agent `i` only reads rows of
//! `Q̃` for which `W_ij ≠ 0`; the simulator keeps the global view so the
//! invariants relating the matrices can be checked directly.

use std::sync::Arc;

use rand::Rng;

use crate::compressors::{Compressor, DEFAULT_SCALAR_BITS};
use crate::error::{Error, Result};
use crate::games::{EquilibriumSource, Game};
use crate::graph::WeightMatrix;
use crate::linalg::{self, Mat};
use crate::metrics::{self, IterationRecord, RunSummary, RunTrace};
use crate::rng::{self, Purpose};
use crate::triggers::{deterministic_trigger, stochastic_trigger, TriggerDecision, TriggerPolicy};

/// Magnitude beyond which a state entry counts as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgorithmParams {
    /// Gradient stepsize η.
    pub eta: f64,
    /// Consensus stepsize γ.
    pub gamma: f64,
    /// Reference mixing α.
    pub alpha: f64,
    pub max_iters: usize,
}

impl AlgorithmParams {
    /// Requires `η > 0`, `γ > 0` and `α ∈ (0, 1/r]`.
    pub fn validate(&self, r: f64) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {}", self.gamma)));
        }
        // tolerate α = 1/r computed in floating point
        if !(self.alpha > 0.0) || self.alpha > (1.0 / r) * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1/r] = (0, {}], got {}",
                1.0 / r,
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState {
    /// Local estimates of the joint profile.
    pub x: Mat,
    /// Reference points.
    pub h: Mat,
    /// Weighted references, equal to `W·H`.
    pub h_w: Mat,
    /// Latest value each agent sent.
    pub q_tilde: Mat,
}

/// `H_w = W·H_0`, `Q̃ = 0`.
pub fn init_state(w: &WeightMatrix, x0: &Mat, h0: &Mat) -> Result<NetworkState> {
    let n = w.agents();
    if x0.rows() != n || h0.shape() != x0.shape() {
        return Err(Error::Dimension(format!(
            "{n} agents need matching X0 and H0 with {n} rows, got {:?} and {:?}",
            x0.shape(),
            h0.shape()
        )));
    }
    Ok(NetworkState {
        x: x0.clone(),
        h: h0.clone(),
        h_w: weighted(w, h0),
        q_tilde: Mat::zeros(n, x0.cols()),
    })
}

/// `W·M` using the sparse rows of `W`.
pub fn weighted(w: &WeightMatrix, m: &Mat) -> Mat {
    let mut out = Mat::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        let row = out.row_mut(i);
        for &(j, wij) in w.row(i) {
            for (o, v) in row.iter_mut().zip(m.row(j)) {
                *o += wij * v;
            }
        }
    }
    out
}

/// What happened during one iteration.
#[derive(Clone, Debug)]
pub struct IterationEvents {
    pub k: usize,
    pub decisions: Vec<TriggerDecision>,
    /// ζ drawn by each agent, for the stochastic gate.
    pub zetas: Option<Vec<f64>>,
    /// ‖x_(i) − h_i‖ before the update.
    pub reference_gaps: Vec<f64>,
    /// Fresh compressed innovations `Q_k`.
    pub q: Mat,
    /// `E_k = Q_k − Q̃_k`
    pub event_error: Mat,
    /// `D_k = X_k − X̂_k`
    pub compression_error: Mat,
    /// Bits broadcast this iteration.
    pub bits: u64,
}

impl IterationEvents {
    pub fn triggered(&self) -> Vec<bool> {
        self.decisions.iter().map(|d| d.fire).collect()
    }

    pub fn rounds(&self) -> u64 {
        self.decisions.iter().filter(|d| d.fire).count() as u64
    }
}

/// Borrowed view of everything a step needs besides the state.
#[derive(Clone, Copy, Debug)]
pub struct StepContext<'a> {
    pub game: &'a dyn Game,
    pub weights: &'a WeightMatrix,
    pub compressor: Compressor,
    pub trigger: TriggerPolicy,
    pub params: AlgorithmParams,
    pub scalar_bits: u32,
    pub seed: u64,
}

/// One iteration from `state` at index `k`.
pub fn step(state: &NetworkState, ctx: &StepContext<'_>, k: usize) -> Result<(NetworkState, IterationEvents)> {
    let n = state.x.rows();
    let dim = state.x.cols();
    let da = ctx.game.action_dim();
    let AlgorithmParams { eta, gamma, alpha, .. } = ctx.params;

    let mut q = Mat::zeros(n, dim);
    let mut q_tilde = state.q_tilde.clone();
    let mut decisions = Vec::with_capacity(n);
    let mut zetas = ctx.trigger.uses_zeta().then(|| Vec::with_capacity(n));
    let mut reference_gaps = Vec::with_capacity(n);
    let mut bits = 0u64;
    let mut diff = vec![0.0; dim];

    for i in 0..n {
        let (xi, hi) = (state.x.row(i), state.h.row(i));
        for ((d, x), h) in diff.iter_mut().zip(xi).zip(hi) {
            *d = x - h;
        }
        reference_gaps.push(linalg::norm(&diff));
        let mut crng = rng::stream(ctx.seed, Purpose::Compression, i as u64, k as u64);
        let payload = ctx.compressor.compress(&diff, ctx.scalar_bits, &mut crng);
        payload.decode_into(q.row_mut(i));

        let prev = state.q_tilde.row(i);
        let decision = match ctx.trigger {
            TriggerPolicy::Always => deterministic_trigger(q.row(i), prev, 0.0, k),
            TriggerPolicy::Deterministic(schedule) => deterministic_trigger(q.row(i), prev, schedule.value(k), k),
            TriggerPolicy::Stochastic(params) => {
                let u: f64 = rng::stream(ctx.seed, Purpose::Zeta, i as u64, k as u64).gen();
                let zeta = params.zeta_from_uniform(u);
                if let Some(z) = zetas.as_mut() {
                    z.push(zeta);
                }
                stochastic_trigger(q.row(i), prev, xi, hi, &params, zeta, k)
            }
        };
        if decision.fire {
            q_tilde.row_mut(i).copy_from_slice(q.row(i));
            bits += payload.bit_count;
        }
        decisions.push(decision);
    }

    let event_error = q.sub(&q_tilde);
    let wq = weighted(ctx.weights, &q_tilde);
    let mut next = NetworkState {
        x: state.x.clone(),
        h: state.h.clone(),
        h_w: state.h_w.clone(),
        q_tilde,
    };
    let mut compression_error = Mat::zeros(n, dim);
    let mut grad = vec![0.0; da];

    for i in 0..n {
        ctx.game.partial_gradient(i, state.x.row(i), &mut grad);
        let qt = next.q_tilde.row(i);
        let wqi = wq.row(i);
        let (h, hw) = (state.h.row(i), state.h_w.row(i));
        let x = state.x.row(i);
        let d_row = compression_error.row_mut(i);
        for c in 0..dim {
            let x_hat = h[c] + qt[c];
            let x_hat_w = hw[c] + wqi[c];
            d_row[c] = x[c] - x_hat;
            next.h[(i, c)] = (1.0 - alpha) * h[c] + alpha * x_hat;
            next.h_w[(i, c)] = (1.0 - alpha) * hw[c] + alpha * x_hat_w;
            next.x[(i, c)] = x[c] - gamma * (x_hat - x_hat_w);
        }
        for (c, g) in grad.iter().enumerate() {
            next.x[(i, i * da + c)] -= gamma * eta * g;
        }
    }

    for (name, m) in [("X", &next.x), ("H", &next.h), ("H_w", &next.h_w)] {
        if !m.all_finite() || m.max_abs() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                iteration: k,
                detail: format!("{name} has an entry beyond {DIVERGENCE_LIMIT:e} or non-finite"),
            });
        }
    }

    Ok((
        next,
        IterationEvents {
            k,
            decisions,
            zetas,
            reference_gaps,
            q,
            event_error,
            compression_error,
            bits,
        },
    ))
}

/// `(I − W)X + η·F̃(X)` where `F̃(X)` holds `∇_i J_i(x_(i))` in row `i`,
/// block `i`.
pub fn augmented_mapping(x: &Mat, w: &WeightMatrix, eta: f64, game: &dyn Game) -> Mat {
    let da = game.action_dim();
    let wx = weighted(w, x);
    let mut out = x.sub(&wx);
    let mut grad = vec![0.0; da];
    for i in 0..x.rows() {
        game.partial_gradient(i, x.row(i), &mut grad);
        for (c, g) in grad.iter().enumerate() {
            out[(i, i * da + c)] += eta * g;
        }
    }
    out
}

/// Everything that defines one run.
#[derive(Clone, Debug)]
pub struct SimulationSetup {
    pub game: Arc<dyn Game>,
    pub weights: Arc<WeightMatrix>,
    pub compressor: Compressor,
    pub trigger: TriggerPolicy,
    pub params: AlgorithmParams,
    pub scalar_bits: u32,
    pub seed: u64,
    pub x0: Mat,
    pub h0: Mat,
}

impl SimulationSetup {
    /// `X0` uniform on `[0, 1]` per entry from the seed's init stream, `H0 = 0`.
    pub fn with_random_start(
        game: Arc<dyn Game>,
        weights: Arc<WeightMatrix>,
        compressor: Compressor,
        trigger: TriggerPolicy,
        params: AlgorithmParams,
        seed: u64,
    ) -> Self {
        let n = weights.agents();
        let dim = game.profile_dim();
        let mut x0 = Mat::zeros(n, dim);
        for i in 0..n {
            let mut r = rng::stream(seed, Purpose::Init, i as u64, 0);
            for v in x0.row_mut(i) {
                *v = r.gen::<f64>();
            }
        }
        Self {
            game,
            weights,
            compressor,
            trigger,
            params,
            scalar_bits: DEFAULT_SCALAR_BITS,
            seed,
            h0: Mat::zeros(n, dim),
            x0,
        }
    }

    pub fn dim(&self) -> usize {
        self.game.profile_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.weights.agents();
        if self.game.players() != n {
            return Err(Error::Dimension(format!(
                "game has {} players but the network has {n} agents",
                self.game.players()
            )));
        }
        let dim = self.dim();
        if self.x0.shape() != (n, dim) {
            return Err(Error::Dimension(format!("X0 must be {n}x{dim}, got {:?}", self.x0.shape())));
        }
        if self.scalar_bits == 0 {
            return Err(Error::InvalidParameter("scalar bit width must be positive".into()));
        }
        self.compressor.validate(dim)?;
        self.params.validate(self.compressor.constants(dim).r)
    }

    pub fn context(&self) -> StepContext<'_> {
        StepContext {
            game: self.game.as_ref(),
            weights: self.weights.as_ref(),
            compressor: self.compressor,
            trigger: self.trigger,
            params: self.params,
            scalar_bits: self.scalar_bits,
            seed: self.seed,
        }
    }
}

/// A run in progress.
#[derive(Clone, Debug)]
pub struct Simulation {
    setup: SimulationSetup,
    state: NetworkState,
    k: usize,
}

impl Simulation {
    pub fn new(setup: SimulationSetup) -> Result<Self> {
        setup.validate()?;
        let state = init_state(&setup.weights, &setup.x0, &setup.h0)?;
        Ok(Self { setup, state, k: 0 })
    }

    pub fn step(&mut self) -> Result<IterationEvents> {
        let (next, events) = step(&self.state, &self.setup.context(), self.k)?;
        self.state = next;
        self.k += 1;
        Ok(events)
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn setup(&self) -> &SimulationSetup {
        &self.setup
    }
}

#[derive(Clone, Debug)]
pub struct RunSpec {
    pub setup: SimulationSetup,
    /// Equilibrium profile; the reference matrix stacks it in every row.
    pub x_star: Vec<f64>,
    pub reference: EquilibriumSource,
    /// Stop once the residual is at or below this.
    pub target: Option<f64>,
}

pub fn run(spec: &RunSpec) -> Result<RunTrace> {
    run_observed(spec, |_, _, _| {})
}

/// Like [`run`], handing every `(state before, events, state after)` to
/// `observer`.
///
/// Record `k` holds the residual and Lyapunov terms of `X_k` together with
/// the events of the step taken from it. The residual of the final state is
/// in the summary.
pub fn run_observed(
    spec: &RunSpec,
    mut observer: impl FnMut(&NetworkState, &IterationEvents, &NetworkState),
) -> Result<RunTrace> {
    let mut sim = Simulation::new(spec.setup.clone())?;
    let n = spec.setup.weights.agents();
    let x_star = Mat::consensual(n, &spec.x_star);
    let x0 = spec.setup.x0.clone();
    if x_star.shape() != x0.shape() {
        return Err(Error::Dimension("equilibrium profile does not match the estimate dimension".into()));
    }
    let mut records = Vec::with_capacity(spec.setup.params.max_iters.min(1 << 20));
    let (mut bits_cum, mut rounds_cum) = (0u64, 0u64);
    let mut converged_at = None;

    for k in 0..spec.setup.params.max_iters {
        let before = sim.state().clone();
        let residual = metrics::residual(&before.x, &x_star, &x0)?;
        if spec.target.is_some_and(|t| residual <= t) {
            converged_at = Some(k);
            break;
        }
        let events = sim.step()?;
        bits_cum += events.bits;
        rounds_cum += events.rounds();
        observer(&before, &events, sim.state());
        records.push(IterationRecord {
            k,
            residual,
            v1: before.x.dist_sq(&x_star),
            v2: before.x.dist_sq(&before.h),
            event_err_sq: events.event_error.fro_norm_sq(),
            bits_cum,
            rounds_cum,
            triggers: events.triggered(),
        });
    }

    let final_residual = metrics::residual(&sim.state().x, &x_star, &x0)?;
    if converged_at.is_none() && spec.target.is_some_and(|t| final_residual <= t) {
        converged_at = Some(records.len());
    }
    let summary = RunSummary::from_records(&records, n, final_residual, spec.target, converged_at, spec.reference);
    Ok(RunTrace { records, summary })
}

/// Long uncompressed, always-transmitting run from `setup` for games without
/// an equilibrium oracle; returns the agents' mean estimate.
pub fn reference_equilibrium(setup: &SimulationSetup) -> Result<Vec<f64>> {
    let mut ref_setup = setup.clone();
    ref_setup.compressor = Compressor::Identity;
    ref_setup.trigger = TriggerPolicy::Always;
    ref_setup.params.alpha = 1.0;
    ref_setup.params.max_iters = setup.params.max_iters.saturating_mul(10);
    let mut sim = Simulation::new(ref_setup)?;
    for _ in 0..sim.setup().params.max_iters {
        sim.step()?;
    }
    let x = &sim.state().x;
    let n = x.rows() as f64;
    Ok((0..x.cols())
        .map(|c| (0..x.rows()).map(|i| x[(i, c)]).sum::<f64>() / n)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{quadratic_ne_oracle, ConnectivityGame, QuadraticGame};
    use crate::graph::{build_row_stochastic_weights, DiGraph};
    use crate::triggers::{StochasticTriggerParams, ThresholdSchedule};
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn two_player() -> Arc<dyn Game> {
        Arc::new(
            QuadraticGame::scalar(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 2.0]), DVector::zeros(2))
                .unwrap(),
        )
    }

    fn half_weights() -> Arc<WeightMatrix> {
        Arc::new(WeightMatrix::from_dense(DMatrix::from_element(2, 2, 0.5)).unwrap())
    }

    fn params(eta: f64, gamma: f64, alpha: f64, k: usize) -> AlgorithmParams {
        AlgorithmParams {
            eta,
            gamma,
            alpha,
            max_iters: k,
        }
    }

    fn example_setup() -> SimulationSetup {
        SimulationSetup {
            game: two_player(),
            weights: half_weights(),
            compressor: Compressor::Identity,
            trigger: TriggerPolicy::Deterministic(ThresholdSchedule::Zero),
            params: params(0.1, 0.1, 1.0, 10),
            scalar_bits: 32,
            seed: 0,
            x0: Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
            h0: Mat::zeros(2, 2),
        }
    }

    fn assert_close(a: &Mat, b: &Mat, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    fn ring_setup(compressor: Compressor, trigger: TriggerPolicy, seed: u64) -> SimulationSetup {
        let w = Arc::new(build_row_stochastic_weights(&DiGraph::ring(4)).unwrap());
        let game: Arc<dyn Game> = Arc::new(ConnectivityGame::new(4).unwrap());
        SimulationSetup::with_random_start(game, w, compressor, trigger, params(0.01, 0.5, 0.05, 50), seed)
    }

    #[test]
    fn init_examples() {
        let w = WeightMatrix::from_dense(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        ))
        .unwrap();
        let h0 = Mat::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        let s = init_state(&w, &Mat::zeros(3, 1), &h0).unwrap();
        assert_eq!(s.h_w, Mat::from_rows(&[vec![3.0], vec![1.0], vec![2.0]]));
        assert_eq!(s.q_tilde, Mat::zeros(3, 1));

        let s = init_state(&w, &Mat::zeros(3, 2), &Mat::zeros(3, 2)).unwrap();
        assert_eq!(s.h_w, Mat::zeros(3, 2));
        let v = Mat::consensual(3, &[0.25, -4.0]);
        let s = init_state(&w, &v, &v).unwrap();
        assert_eq!(s.h_w, v);

        assert!(init_state(&w, &Mat::zeros(2, 1), &Mat::zeros(2, 1)).is_err());
        assert!(init_state(&w, &Mat::zeros(3, 1), &Mat::zeros(3, 2)).is_err());
    }

    #[test]
    fn step_example() {
        let mut sim = Simulation::new(example_setup()).unwrap();
        let ev = sim.step().unwrap();
        let want = Mat::from_rows(&[vec![0.93, 0.05], vec![0.05, 0.93]]);
        assert_close(&sim.state().x, &want, 1e-12);
        assert_eq!(ev.bits, 2 * 64);
        assert_eq!(ev.event_error, Mat::zeros(2, 2));
    }

    #[test]
    fn augmented_mapping_examples() {
        let s = example_setup();
        let f = augmented_mapping(&s.x0, &s.weights, 0.1, s.game.as_ref());
        assert_close(&f, &Mat::from_rows(&[vec![0.7, -0.5], vec![-0.5, 0.7]]), 1e-12);
        let f0 = augmented_mapping(&s.x0, &s.weights, 0.0, s.game.as_ref());
        assert_close(&f0, &s.x0.sub(&weighted(&s.weights, &s.x0)), 0.0);
        let g = ConnectivityGame::new(3).unwrap();
        let w = build_row_stochastic_weights(&DiGraph::ring(3)).unwrap();
        let xs = Mat::consensual(3, &g.known_ne().unwrap());
        assert!(augmented_mapping(&xs, &w, 0.3, &g).max_abs() <= 1e-12);
    }

    #[test]
    fn huge_threshold_holds() {
        let setup = ring_setup(
            Compressor::Quantize { bits: 2 },
            TriggerPolicy::Deterministic(ThresholdSchedule::exponential(1e9, 0.999).unwrap()),
            3,
        );
        let mut sim = Simulation::new(setup).unwrap();
        let first = sim.step().unwrap();
        assert_eq!(first.rounds(), 4);
        let sent = sim.state().q_tilde.clone();
        for _ in 0..5 {
            let ev = sim.step().unwrap();
            assert_eq!(ev.bits, 0);
            assert_eq!(ev.rounds(), 0);
            assert_eq!(sim.state().q_tilde, sent);
        }
    }

    #[test]
    fn fixed_point_is_stationary() {
        let g = ConnectivityGame::new(4).unwrap();
        let xs = Mat::consensual(4, &g.known_ne().unwrap());
        let w = Arc::new(build_row_stochastic_weights(&DiGraph::ring(4)).unwrap());
        for compressor in [
            Compressor::Identity,
            Compressor::Quantize { bits: 2 },
            Compressor::TopK { k: 1 },
            Compressor::NormSign,
        ] {
            let setup = SimulationSetup {
                game: Arc::new(g.clone()),
                weights: w.clone(),
                compressor,
                trigger: TriggerPolicy::Always,
                params: params(0.01, 0.5, 0.05, 3),
                scalar_bits: 32,
                seed: 1,
                x0: xs.clone(),
                h0: xs.clone(),
            };
            let mut sim = Simulation::new(setup).unwrap();
            for _ in 0..3 {
                sim.step().unwrap();
                assert_close(&sim.state().x, &xs, 1e-15);
            }
        }
    }

    #[test]
    fn uncompressed_matches_plain_recursion() {
        let setup = ring_setup(Compressor::Identity, TriggerPolicy::Always, 9);
        let ctx = setup.context();
        let mut state = init_state(&setup.weights, &setup.x0, &setup.h0).unwrap();
        let (eta, gamma) = (setup.params.eta, setup.params.gamma);
        for k in 0..30 {
            let fa = augmented_mapping(&state.x, &setup.weights, eta, setup.game.as_ref());
            let plain = Mat::from_fn(4, 8, |i, j| state.x[(i, j)] - gamma * fa[(i, j)]);
            let (next, ev) = step(&state, &ctx, k).unwrap();
            assert!(ev.compression_error.max_abs() <= 1e-12);
            assert_close(&next.x, &plain, 1e-12);
            state = next;
        }
    }

    #[test]
    fn divergence_is_reported() {
        let mut setup = example_setup();
        setup.params = params(1e3, 1e3, 1.0, 100);
        let spec = RunSpec {
            setup,
            x_star: vec![0.0, 0.0],
            reference: EquilibriumSource::LinearSolve,
            target: None,
        };
        match run(&spec) {
            Err(Error::Diverged { iteration, .. }) => assert!(iteration < 100),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn params_validation() {
        assert!(params(0.1, 0.1, 1.0, 1).validate(1.0).is_ok());
        assert!(params(0.1, 0.1, 0.5, 1).validate(2.0).is_ok());
        assert!(params(0.1, 0.1, 0.6, 1).validate(2.0).is_err());
        assert!(params(0.0, 0.1, 0.5, 1).validate(1.0).is_err());
        assert!(params(0.1, -1.0, 0.5, 1).validate(1.0).is_err());
        assert!(params(0.1, 0.1, 0.0, 1).validate(1.0).is_err());
        let mut s = example_setup();
        s.compressor = Compressor::Quantize { bits: 1 };
        assert!(Simulation::new(s).is_err());
    }

    #[test]
    fn run_examples() {
        let mut setup = example_setup();
        setup.params.max_iters = 0;
        let spec = RunSpec {
            setup,
            x_star: vec![0.0, 0.0],
            reference: EquilibriumSource::LinearSolve,
            target: None,
        };
        let trace = run(&spec).unwrap();
        assert!(trace.records.is_empty());
        assert_eq!(trace.summary.final_residual, 1.0);

        let mut spec = spec;
        spec.setup.params.max_iters = 20000;
        spec.target = Some(1e-3);
        let a = run(&spec).unwrap();
        let b = run(&spec).unwrap();
        assert_eq!(a, b);
        let k = a.summary.converged_at.expect("converges");
        assert_eq!(a.records.len(), k);
        assert!(a.summary.final_residual <= 1e-3);
        assert!(a.records.iter().all(|r| r.residual > 1e-3));
    }

    #[test]
    fn reference_run_matches_oracle() {
        let q = QuadraticGame::scalar(
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 2.0]),
            DVector::from_vec(vec![1.0, -2.0]),
        )
        .unwrap();
        let oracle = quadratic_ne_oracle(&q).unwrap();
        let mut setup = example_setup();
        setup.game = Arc::new(q);
        setup.params = params(0.5, 0.5, 1.0, 2000);
        let x = reference_equilibrium(&setup).unwrap();
        for (a, b) in x.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{x:?} vs {oracle:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn invariants_hold_along_runs(seed in any::<u64>(), which in 0usize..4, trig in 0usize..3) {
            let compressor = [
                Compressor::Identity,
                Compressor::Quantize { bits: 2 },
                Compressor::TopK { k: 2 },
                Compressor::NormSign,
            ][which];
            let trigger = match trig {
                0 => TriggerPolicy::Always,
                1 => TriggerPolicy::Deterministic(ThresholdSchedule::exponential(5.0, 0.9).unwrap()),
                _ => TriggerPolicy::Stochastic(StochasticTriggerParams::new(1.5, 0.5).unwrap()),
            };
            let setup = ring_setup(compressor, trigger, seed);
            let bits_per = compressor.bits(8, 32);
            let mut sim = Simulation::new(setup.clone()).unwrap();
            for k in 0..40 {
                let before = sim.state().clone();
                let ev = sim.step().unwrap();
                let after = sim.state();
                let drift = after.h_w.dist_sq(&weighted(&setup.weights, &after.h)).sqrt();
                prop_assert!(drift <= 1e-10 * (1.0 + after.h.fro_norm()));
                prop_assert_eq!(ev.bits, ev.rounds() * bits_per);
                for (i, d) in ev.decisions.iter().enumerate() {
                    let e = linalg::norm(ev.event_error.row(i));
                    if d.fire {
                        prop_assert_eq!(e, 0.0);
                    } else {
                        prop_assert_eq!(after.q_tilde.row(i), before.q_tilde.row(i));
                        if let TriggerPolicy::Deterministic(s) = trigger {
                            prop_assert!(e <= s.value(k));
                        }
                    }
                }
                if k == 0 {
                    prop_assert_eq!(ev.rounds(), 4);
                }
            }
        }
    }
}
