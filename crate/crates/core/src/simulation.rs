//! Seeded Monte Carlo rollouts of the equilibrium strategies.
//!
//! Replicate `i` of a run with base seed `s` draws from the ChaCha8 stream
//! `(s, i)`, so results do not depend on how replicates are scheduled across
//! threads. Standard normals come from the Box-Muller transform applied to
//! consecutive pairs of uniforms in `(0, 1]`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::{controls_at, RiccatiSolution};
use crate::decision::{Decision, Plan};
use crate::error::SolveError;
use crate::estimation::{Estimator, FilterState};
use crate::linalg::psd_sqrt;
use crate::model::{GameSpec, InitialState};
use crate::{Matrix, Vector};

/// Replicates per reduction chunk; fixed so the floating-point reduction
/// order never changes.
const CHUNK: usize = 1024;

/// One stage of a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub x: Vector,
    pub xhat: Vector,
    pub ud: Vector,
    pub ua: Vector,
    pub decision: Decision,
    pub h: bool,
    pub y: Option<Vector>,
    /// `x'Qx + u^d'R^d u^d - u^a'R^a u^a + i^d O^d - i^a O^a`.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub stages: Vec<StageRecord>,
    pub terminal_state: Vector,
    /// `x_N' Q_N x_N`.
    pub terminal_cost: f64,
    /// Stage costs summed in order, then the terminal cost.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloStats {
    pub replicates: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(replicates)`.
    pub std_error: f64,
    /// Sample covariance of `x_n - x̂_n` per stage.
    pub error_cov: Vec<Matrix>,
}

struct Gaussian {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Gaussian {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Gaussian { rng, spare: None }
    }

    fn standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        self.spare = Some(r * (TAU * u2).sin());
        r * (TAU * u2).cos()
    }

    /// `F z` with `z` standard normal, i.e. a draw from `N(0, F F')`.
    fn draw(&mut self, factor: &Matrix) -> Vector {
        let z = Vector::from_fn(factor.ncols(), |_, _| self.standard());
        factor * z
    }
}

/// Everything a rollout needs that does not change between replicates.
struct Prepared<'a> {
    spec: &'a GameSpec,
    riccati: &'a RiccatiSolution,
    plan: &'a Plan,
    est: Estimator,
    x0_factor: Matrix,
    system_factor: Matrix,
    observation_factor: Matrix,
}

impl<'a> Prepared<'a> {
    fn new(spec: &'a GameSpec, riccati: &'a RiccatiSolution, plan: &'a Plan) -> Self {
        let x0_factor = match &spec.initial_state {
            InitialState::Known(x) => Matrix::zeros(x.len(), 0),
            InitialState::Gaussian { cov, .. } => psd_sqrt(cov),
        };
        Prepared {
            spec,
            riccati,
            plan,
            est: Estimator::new(spec),
            x0_factor,
            system_factor: psd_sqrt(&spec.sigma_s),
            observation_factor: psd_sqrt(&spec.sigma_o),
        }
    }

    fn decision(&self, stage: usize, history: &[bool]) -> Result<Decision, SolveError> {
        let found = match self.plan {
            Plan::Tree(tree) => tree.decision_after(history),
            Plan::Sequence(seq) => seq.decisions.get(stage).copied(),
        };
        found.ok_or_else(|| SolveError::MissingNode {
            history: history.iter().map(|&h| if h { '1' } else { '0' }).collect(),
        })
    }

    fn run(&self, seed: u64, stream: u64) -> Result<RolloutResult, SolveError> {
        let spec = self.spec;
        let mut g = Gaussian::new(seed, stream);
        let mut x = spec.initial_state.mean() + g.draw(&self.x0_factor);
        let mut filter = FilterState::prior(spec);
        let mut history = Vec::with_capacity(spec.horizon);
        let mut stages = Vec::with_capacity(spec.horizon);
        for n in 0..spec.horizon {
            let decision = self.decision(n, &history)?;
            let h = spec.observation_rule.delivers(decision);
            let y = h.then(|| &spec.d * &x + &spec.e * g.draw(&self.observation_factor));
            filter = self.est.correct(filter, y.as_ref(), h)?;
            let (ud, ua) = controls_at(self.riccati, n, &filter.xhat)?;
            let id = decision.observe as u8 as f64;
            let ia = decision.jam as u8 as f64;
            let cost = x.dot(&(&spec.q[n] * &x)) + ud.dot(&(&spec.r_d[n] * &ud)) - ua.dot(&(&spec.r_a[n] * &ua))
                + id * spec.o_d[n]
                - ia * spec.o_a[n];
            let drive = &spec.b_d * &ud + &spec.b_a * &ua;
            let next_x = &spec.a * &x + &drive + &spec.c * g.draw(&self.system_factor);
            let next_filter = FilterState {
                xhat: &spec.a * &filter.xhat + &drive,
                p: self.est.predict(&filter.p),
            };
            stages.push(StageRecord { stage: n, x, xhat: filter.xhat, ud, ua, decision, h, y, cost });
            history.push(h);
            x = next_x;
            filter = next_filter;
        }
        let terminal_cost = x.dot(&(&spec.q_terminal * &x));
        let total = stages.iter().map(|s| s.cost).sum::<f64>() + terminal_cost;
        Ok(RolloutResult { stages, terminal_state: x, terminal_cost, total })
    }
}

/// One rollout on stream 0 of `seed`.
pub fn rollout(
    spec: &GameSpec,
    riccati: &RiccatiSolution,
    plan: &Plan,
    seed: u64,
) -> Result<RolloutResult, SolveError> {
    rollout_stream(spec, riccati, plan, seed, 0)
}

/// The rollout used as replicate `stream` by [`monte_carlo`].
pub fn rollout_stream(
    spec: &GameSpec,
    riccati: &RiccatiSolution,
    plan: &Plan,
    seed: u64,
    stream: u64,
) -> Result<RolloutResult, SolveError> {
    Prepared::new(spec, riccati, plan).run(seed, stream)
}

/// Running sums for one chunk of replicates.
#[derive(Clone)]
struct Acc {
    count: f64,
    mean: f64,
    m2: f64,
    err_sum: Vec<Vector>,
    err_outer: Vec<Matrix>,
}

impl Acc {
    fn new(horizon: usize, q: usize) -> Self {
        Acc {
            count: 0.0,
            mean: 0.0,
            m2: 0.0,
            err_sum: vec![Vector::zeros(q); horizon],
            err_outer: vec![Matrix::zeros(q, q); horizon],
        }
    }

    fn push(&mut self, r: &RolloutResult) {
        self.count += 1.0;
        let delta = r.total - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (r.total - self.mean);
        for (n, s) in r.stages.iter().enumerate() {
            let e = &s.x - &s.xhat;
            self.err_outer[n] += &e * e.transpose();
            self.err_sum[n] += e;
        }
    }

    fn merge(mut self, other: &Acc) -> Self {
        let count = self.count + other.count;
        if count == 0.0 {
            return self;
        }
        let delta = other.mean - self.mean;
        self.mean += delta * other.count / count;
        self.m2 += other.m2 + delta * delta * self.count * other.count / count;
        self.count = count;
        for n in 0..self.err_sum.len() {
            self.err_sum[n] += &other.err_sum[n];
            self.err_outer[n] += &other.err_outer[n];
        }
        self
    }
}

/// Runs `replicates` independent rollouts in parallel.
///
/// # Panics
///
/// If `replicates < 2`.
pub fn monte_carlo(
    spec: &GameSpec,
    riccati: &RiccatiSolution,
    plan: &Plan,
    replicates: usize,
    base_seed: u64,
) -> Result<MonteCarloStats, SolveError> {
    assert!(replicates >= 2, "monte_carlo needs at least two replicates");
    let prep = Prepared::new(spec, riccati, plan);
    let q = spec.state_dim();
    let chunks: Vec<Acc> = (0..replicates.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Acc::new(spec.horizon, q);
            for i in c * CHUNK..((c + 1) * CHUNK).min(replicates) {
                acc.push(&prep.run(base_seed, i as u64)?);
            }
            Ok(acc)
        })
        .collect::<Result<_, SolveError>>()?;
    let total = chunks
        .iter()
        .fold(Acc::new(spec.horizon, q), |a, b| a.merge(b));
    let n = total.count;
    let variance = total.m2 / (n - 1.0);
    let error_cov = total
        .err_sum
        .iter()
        .zip(&total.err_outer)
        .map(|(s, o)| (o - s * s.transpose() / n) / (n - 1.0))
        .collect();
    Ok(MonteCarloStats {
        replicates,
        mean: total.mean,
        std_error: (variance / n).sqrt(),
        error_cov,
    })
}
