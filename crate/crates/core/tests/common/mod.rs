//! Seeded random game generators shared by the integration tests.
#![allow(dead_code)]

use lqgame::control::{backward_riccati, RiccatiSolution};
use lqgame::estimation::Estimator;
use lqgame::model::{
    Decision, GameSpec, InfoStructure, InitialState, ObservationRule, SaddleCheck, ScalarBenchmark,
};
use lqgame::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use num_rational::BigRational;
use num_traits::ToPrimitive;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

/// `G G'` with `G` of `rank` columns.
pub fn psd(rng: &mut ChaCha8Rng, n: usize, rank: usize, scale: f64) -> Matrix {
    let g = uniform(rng, n, rank, scale);
    &g * g.transpose()
}

/// A multivariable game with `q, m_d, m_a <= 4`, not yet checked for concavity.
pub fn random_spec(rng: &mut ChaCha8Rng) -> GameSpec {
    let q = rng.random_range(1..=4);
    let md = rng.random_range(1..=4);
    let ma = rng.random_range(0..=4);
    let p = rng.random_range(1..=q);
    let r = rng.random_range(1..=q);
    let s = r;
    let horizon = rng.random_range(1..=8);
    let eye = |n: usize| Matrix::identity(n, n);
    let mut stage = |f: &mut dyn FnMut(&mut ChaCha8Rng) -> Matrix| (0..horizon).map(|_| f(rng)).collect::<Vec<_>>();
    let q_list = stage(&mut |g| psd(g, q, q, 0.7));
    let rd = stage(&mut |g| psd(g, md, md, 0.7) + eye(md) * g.random_range(0.2..2.0));
    let ra = stage(&mut |g| psd(g, ma, ma, 0.7) + eye(ma) * g.random_range(4.0..30.0));
    GameSpec {
        horizon,
        a: uniform(rng, q, q, 1.2 / (q as f64).sqrt()),
        b_d: uniform(rng, q, md, 1.0),
        b_a: uniform(rng, q, ma, 1.0),
        c: uniform(rng, q, p, 1.0),
        d: uniform(rng, r, q, 1.0),
        e: uniform(rng, r, s, 1.0),
        sigma_s: psd(rng, p, p, 1.0),
        sigma_o: psd(rng, s, s, 1.0) + eye(s) * 0.1,
        initial_state: InitialState::Gaussian {
            mean: Vector::from_fn(q, |_, _| rng.random_range(-1.0..1.0)),
            cov: psd(rng, q, q, 1.0),
        },
        q: q_list,
        q_terminal: psd(rng, q, q, 1.0),
        r_d: rd,
        r_a: ra,
        o_d: (0..horizon).map(|_| rng.random_range(0.0..5.0)).collect(),
        o_a: (0..horizon).map(|_| rng.random_range(0.0..5.0)).collect(),
        info_structure: InfoStructure::DefenderLeads,
        observation_rule: ObservationRule::JAM_BLOCKS,
        saddle_check: SaddleCheck::Strict,
    }
}

/// Draws until the strict concavity condition holds at every stage and the
/// observation channel is well-posed.
pub fn random_solvable(rng: &mut ChaCha8Rng) -> (GameSpec, RiccatiSolution) {
    loop {
        let spec = random_spec(rng);
        if let Ok(r) = backward_riccati(&spec) {
            return (spec, r);
        }
    }
}

/// Scalar games like the benchmark with randomized parameters.
pub fn random_scalar(rng: &mut ChaCha8Rng, horizon: usize) -> GameSpec {
    let mut spec = ScalarBenchmark {
        horizon,
        a: rng.random_range(0.3..1.3),
        r_a: rng.random_range(0.5..20.0),
        sigma_o: rng.random_range(0.1..5.0),
        o_d: rng.random_range(0.0..20.0),
        o_a: rng.random_range(0.0..40.0),
    }
    .to_spec();
    let s = |v: f64| Matrix::from_element(1, 1, v);
    spec.sigma_s = s(rng.random_range(0.5..5.0));
    spec.initial_state = InitialState::Gaussian { mean: Vector::zeros(1), cov: s(rng.random_range(0.1..3.0)) };
    spec.q_terminal = s(rng.random_range(1.0..10.0));
    spec
}

/// Full game-tree backward induction: both outcomes of every stage are
/// expanded recursively and the leader/follower order is resolved by explicit
/// minimization and maximization over the four cells (ties to inaction).
pub struct Exhaustive<'a> {
    pub spec: &'a GameSpec,
    pub riccati: &'a RiccatiSolution,
    pub est: Estimator,
}

impl<'a> Exhaustive<'a> {
    pub fn new(spec: &'a GameSpec, riccati: &'a RiccatiSolution) -> Self {
        Exhaustive { spec, riccati, est: Estimator::new(spec) }
    }

    /// `(decision, J*_k)` given the covariance entering stage `k`.
    pub fn solve(&self, k: usize, entering: &Matrix) -> (Decision, f64) {
        let outcome = |h: bool| {
            let p = if h { self.est.posterior(entering).unwrap() } else { entering.clone() };
            let cont = if k + 1 < self.spec.horizon {
                self.solve(k + 1, &self.est.predict(&p)).1
            } else {
                0.0
            };
            (lqgame::linalg::trace_product(&p, &self.riccati.phi[k]), cont)
        };
        let outcomes = [outcome(false), outcome(true)];
        let cell = |o: bool, j: bool| {
            let d = Decision::new(o, j);
            let (tr, cont) = outcomes[self.spec.observation_rule.delivers(d) as usize];
            let id = o as u8 as f64;
            let ia = j as u8 as f64;
            tr + id * self.spec.o_d[k] - ia * self.spec.o_a[k] + cont
        };
        let reply = |o: bool| {
            let (idle, jam) = (cell(o, false), cell(o, true));
            if jam > idle {
                (true, jam)
            } else {
                (false, idle)
            }
        };
        let (j0, v0) = reply(false);
        let (j1, v1) = reply(true);
        if v1 < v0 {
            (Decision::new(true, j1), v1)
        } else {
            (Decision::new(false, j0), v0)
        }
    }
}

/// Exact scalar Riccati recursion for `x' = a x + u^d + u^a` with stationary
/// weights. Returns `L_N, L_{N-1}, ..., L_{N-steps}`.
pub fn rational_riccati(a: f64, q: f64, rd: f64, ra: f64, q_terminal: f64, steps: usize) -> Vec<BigRational> {
    let exact = |v: f64| BigRational::from_float(v).expect("finite");
    let (a, q, rd, ra) = (exact(a), exact(q), exact(rd), exact(ra));
    let mut out = vec![exact(q_terminal)];
    for _ in 0..steps {
        let l = out.last().unwrap().clone();
        // M = [[rd + l, l], [l, l - ra]], P = [l a; l a], φ = P' M^{-1} P.
        let (m11, m12, m22) = (&rd + &l, l.clone(), &l - &ra);
        let det = &m11 * &m22 - &m12 * &m12;
        let inv_sum = (&m11 + &m22 - &m12 - &m12) / det;
        let la = &l * &a;
        let phi = &la * &la * inv_sum;
        out.push(&q + &a * &a * &l - phi);
    }
    out
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("representable")
}
