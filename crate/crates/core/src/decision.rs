//! Observation and jamming decisions.
//!
//! Under the equilibrium controls the remaining game is played on the error
//! covariance alone. At stage `k` both players see the covariance entering the
//! stage (`Σ_0` at stage 0, `Z(P_{k-1})` afterwards) and choose
//! `(i^d_k, i^a_k)`; the outcome `h_k` selects the next covariance and the
//! stage contributes
//!
//! ```text
//! tr(P_k φ_k) + i^d O^d_k - i^a O^a_k + J*_{k+1}(P_k)
//! ```
//!
//! to the defender's cost. Everything here is deterministic: the covariance
//! trajectory depends on the decisions only, never on the noise.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::control::RiccatiSolution;
use crate::error::{EstimationError, SolveError};
use crate::estimation::{Estimator, FilterState};
use crate::linalg::{bit_key, to_rows, trace_product};
use crate::model::{GameSpec, InfoStructure, InitialState, ObservationRule};
use crate::Matrix;

pub use crate::model::Decision;

/// Default cap on the number of covariance nodes [`backward_enumerate`] may build.
pub const DEFAULT_NODE_LIMIT: usize = 1 << 22;

/// Equilibrium type of one stage game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    Pure(Decision),
    /// Simultaneous moves where every cell invites a profitable deviation.
    NoPureNash,
}

/// Result of [`stage_equilibrium`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageDecision {
    pub regime: Regime,
    /// Value of observing, `T_k`.
    pub threshold: f64,
    /// `J*_k` at the chosen cell; `None` without a pure equilibrium.
    pub value: Option<f64>,
}

impl StageDecision {
    pub fn decision(&self) -> Option<Decision> {
        match self.regime {
            Regime::Pure(d) => Some(d),
            Regime::NoPureNash => None,
        }
    }
}

/// The 2×2 observation/jamming game at one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageGame {
    pub stage: usize,
    /// Covariance after a missed observation.
    pub without: Matrix,
    /// Covariance after a delivered observation.
    pub with: Matrix,
    /// `J*_{k+1}` at `without` and at `with`.
    pub continuation: [f64; 2],
    pub o_d: f64,
    pub o_a: f64,
    traces: [f64; 2],
    gain_trace: f64,
    rule: ObservationRule,
    info: InfoStructure,
    /// The initial state is known exactly, so nobody acts at stage 0.
    forced_idle: bool,
}

impl StageGame {
    pub fn new(
        spec: &GameSpec,
        riccati: &RiccatiSolution,
        stage: usize,
        without: Matrix,
        with: Matrix,
        continuation: [f64; 2],
    ) -> Self {
        let phi = &riccati.phi[stage];
        let traces = [trace_product(&without, phi), trace_product(&with, phi)];
        let gain_trace = trace_product(&(&without - &with), phi);
        StageGame {
            stage,
            without,
            with,
            continuation,
            o_d: spec.o_d[stage],
            o_a: spec.o_a[stage],
            traces,
            gain_trace,
            rule: spec.observation_rule,
            info: spec.info_structure,
            forced_idle: stage == 0 && matches!(spec.initial_state, InitialState::Known(_)),
        }
    }

    /// Defender's cost of the cell `d`.
    pub fn payoff(&self, d: Decision) -> f64 {
        let h = self.rule.delivers(d) as usize;
        let id = d.observe as u8 as f64;
        let ia = d.jam as u8 as f64;
        self.traces[h] + id * self.o_d - ia * self.o_a + self.continuation[h]
    }

    /// Payoff table indexed `[i_d][i_a]`.
    pub fn payoffs(&self) -> [[f64; 2]; 2] {
        let cell = |o, j| self.payoff(Decision::new(o, j));
        [[cell(false, false), cell(false, true)], [cell(true, false), cell(true, true)]]
    }

    /// `T_k = tr(H φ_k) + J*_{k+1}(Z) - J*_{k+1}(Z - H)`.
    pub fn threshold(&self) -> f64 {
        self.gain_trace + self.continuation[0] - self.continuation[1]
    }

    pub fn solve(&self) -> StageDecision {
        let threshold = self.threshold();
        let regime = if self.forced_idle {
            Regime::Pure(Decision::IDLE)
        } else if self.rule.is_jam_blocks() {
            threshold_rule(self.info, self.o_d, self.o_a, threshold)
        } else {
            solve_table(self.info, &self.payoffs())
        };
        let value = match regime {
            Regime::Pure(d) => Some(self.payoff(d)),
            Regime::NoPureNash => None,
        };
        StageDecision { regime, threshold, value }
    }
}

/// Closed-form equilibrium for the default rule `h = i^d (1 - i^a)`.
/// Ties go to inaction.
pub fn threshold_rule(info: InfoStructure, o_d: f64, o_a: f64, t: f64) -> Regime {
    match info {
        InfoStructure::DefenderLeads => {
            if o_d < o_a && o_a < t {
                Regime::Pure(Decision::OBSERVE_JAMMED)
            } else if o_d < t && t <= o_a {
                Regime::Pure(Decision::OBSERVE)
            } else {
                Regime::Pure(Decision::IDLE)
            }
        }
        InfoStructure::AttackerLeads => {
            if o_d >= t {
                Regime::Pure(Decision::IDLE)
            } else if o_d + o_a < t {
                Regime::Pure(Decision::JAM_ONLY)
            } else {
                Regime::Pure(Decision::OBSERVE)
            }
        }
        InfoStructure::Simultaneous => {
            if o_d >= t {
                Regime::Pure(Decision::IDLE)
            } else if t <= o_a {
                Regime::Pure(Decision::OBSERVE)
            } else {
                Regime::NoPureNash
            }
        }
    }
}

/// Equilibrium of an arbitrary 2×2 table of defender costs indexed
/// `[i_d][i_a]`; the defender minimizes, the attacker maximizes, and ties go
/// to inaction.
pub fn solve_table(info: InfoStructure, p: &[[f64; 2]; 2]) -> Regime {
    let attacker_reply = |id: usize| (p[id][1] > p[id][0]) as usize;
    let defender_reply = |ia: usize| (p[1][ia] < p[0][ia]) as usize;
    let pick = |id: usize, ia: usize| Regime::Pure(Decision::new(id == 1, ia == 1));
    match info {
        InfoStructure::DefenderLeads => {
            let (a0, a1) = (attacker_reply(0), attacker_reply(1));
            if p[1][a1] < p[0][a0] {
                pick(1, a1)
            } else {
                pick(0, a0)
            }
        }
        InfoStructure::AttackerLeads => {
            let (d0, d1) = (defender_reply(0), defender_reply(1));
            if p[d1][1] > p[d0][0] {
                pick(d1, 1)
            } else {
                pick(d0, 0)
            }
        }
        InfoStructure::Simultaneous => {
            for (id, ia) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                if p[id][ia] <= p[1 - id][ia] && p[id][ia] >= p[id][1 - ia] {
                    return pick(id, ia);
                }
            }
            Regime::NoPureNash
        }
    }
}

/// Covariance entering stage `k`, plus the two possible outcomes.
struct Branch {
    without: Matrix,
    with: Matrix,
}

fn branch(est: &Estimator, spec: &GameSpec, stage: usize, entering: Matrix) -> Result<Branch, EstimationError> {
    let forced = stage == 0 && matches!(spec.initial_state, InitialState::Known(_));
    let with = if forced { entering.clone() } else { est.posterior(&entering)? };
    Ok(Branch { without: entering, with })
}

/// `T_k` at `P_{k-1} = p_prev`, with `j_next` giving `J*_{k+1}`.
pub fn threshold_t(
    spec: &GameSpec,
    riccati: &RiccatiSolution,
    k: usize,
    p_prev: &Matrix,
    j_next: impl Fn(&Matrix) -> f64,
) -> Result<f64, EstimationError> {
    Ok(stage_game(spec, riccati, k, p_prev, j_next)?.threshold())
}

/// Equilibrium of stage `k` at `P_{k-1} = p_prev`.
pub fn stage_equilibrium(
    spec: &GameSpec,
    riccati: &RiccatiSolution,
    k: usize,
    p_prev: &Matrix,
    j_next: impl Fn(&Matrix) -> f64,
) -> Result<StageDecision, EstimationError> {
    Ok(stage_game(spec, riccati, k, p_prev, j_next)?.solve())
}

fn stage_game(
    spec: &GameSpec,
    riccati: &RiccatiSolution,
    k: usize,
    p_prev: &Matrix,
    j_next: impl Fn(&Matrix) -> f64,
) -> Result<StageGame, EstimationError> {
    let est = Estimator::new(spec);
    let b = branch(&est, spec, k, est.predict(p_prev))?;
    let continuation = if k + 1 < spec.horizon {
        [j_next(&b.without), j_next(&b.with)]
    } else {
        [0.0, 0.0]
    };
    Ok(StageGame::new(spec, riccati, k, b.without, b.with, continuation))
}

/// One reachable covariance `P_k` in the strategy tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// `k`.
    pub stage: usize,
    /// Outcomes `h_0..=h_k` of the first history found to reach this node.
    pub history: Vec<bool>,
    pub p: Matrix,
    /// Nodes `P_{k+1}` for `h_{k+1} = 0` and `1`; `None` at the last stage.
    pub children: Option<[usize; 2]>,
    /// Equilibrium decision at stage `k + 1`.
    pub decision: Option<Decision>,
    pub threshold: Option<f64>,
    /// `J*_{k+1}(P_k)`; zero at the last stage.
    pub value: f64,
}

/// Decision state before any observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeRoot {
    /// Covariance entering stage 0.
    pub p: Matrix,
    pub children: [usize; 2],
    pub decision: Decision,
    pub threshold: f64,
    /// `J*_0`.
    pub value: f64,
}

/// Equilibrium decisions at every reachable covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyTree {
    pub horizon: usize,
    pub root: TreeRoot,
    pub nodes: Vec<TreeNode>,
    /// `levels[k]` holds the ids of the nodes at stage `k`.
    pub levels: Vec<Vec<usize>>,
}

/// One stage along the equilibrium path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub stage: usize,
    pub decision: Decision,
    pub h: bool,
    /// `P_k`.
    pub p: Matrix,
    pub threshold: f64,
    /// Estimation and decision cost from stage `k` to the end.
    pub value: f64,
}

impl StrategyTree {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Distinct covariances at which a decision is taken: the prior plus every
    /// node before the last stage.
    pub fn decision_state_count(&self) -> usize {
        1 + self.levels[..self.horizon - 1].iter().map(Vec::len).sum::<usize>()
    }

    /// `(P_{k-1}, J*_k(P_{k-1}))` samples of the stage-`k` value function;
    /// stage 0 has the prior as its only sample.
    pub fn value_samples(&self, k: usize) -> Vec<(&Matrix, f64)> {
        if k == 0 {
            return vec![(&self.root.p, self.root.value)];
        }
        self.levels[k - 1]
            .iter()
            .map(|&id| (&self.nodes[id].p, self.nodes[id].value))
            .collect()
    }

    /// Node reached after outcomes `h_0..=h_k`.
    pub fn lookup(&self, history: &[bool]) -> Option<usize> {
        let (&first, rest) = history.split_first()?;
        let mut id = self.root.children[first as usize];
        for &h in rest {
            id = self.nodes[id].children?[h as usize];
        }
        Some(id)
    }

    /// Decision for stage `history.len()` after the given outcomes.
    pub fn decision_after(&self, history: &[bool]) -> Option<Decision> {
        if history.is_empty() {
            return Some(self.root.decision);
        }
        self.nodes[self.lookup(history)?].decision
    }

    pub fn on_path(&self, rule: ObservationRule) -> Vec<PathStep> {
        let mut out = Vec::with_capacity(self.horizon);
        let (mut decision, mut threshold, mut value) = (self.root.decision, self.root.threshold, self.root.value);
        let mut children = self.root.children;
        for stage in 0..self.horizon {
            let h = rule.delivers(decision);
            let node = &self.nodes[children[h as usize]];
            out.push(PathStep { stage, decision, h, p: node.p.clone(), threshold, value });
            if let (Some(c), Some(d), Some(t)) = (node.children, node.decision, node.threshold) {
                children = c;
                decision = d;
                threshold = t;
                value = node.value;
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let node = |id: usize, n: &TreeNode| TreeNodeJson {
            id,
            stage: n.stage,
            history: n.history.iter().map(|&h| if h { '1' } else { '0' }).collect(),
            p: to_rows(&n.p),
            children: n.children,
            decision: n.decision.map(DecisionJson::from),
            threshold: n.threshold,
            value: n.value,
        };
        let doc = TreeJson {
            horizon: self.horizon,
            node_count: self.node_count(),
            decision_state_count: self.decision_state_count(),
            root: RootJson {
                p: to_rows(&self.root.p),
                children: self.root.children,
                decision: self.root.decision.into(),
                threshold: self.root.threshold,
                value: self.root.value,
            },
            nodes: self.nodes.iter().enumerate().map(|(i, n)| node(i, n)).collect(),
        };
        serde_json::to_value(doc).expect("tree serializes")
    }
}

#[derive(Serialize)]
struct DecisionJson {
    i_d: u8,
    i_a: u8,
}

impl From<Decision> for DecisionJson {
    fn from(d: Decision) -> Self {
        DecisionJson { i_d: d.observe as u8, i_a: d.jam as u8 }
    }
}

#[derive(Serialize)]
struct RootJson {
    p: Vec<Vec<f64>>,
    children: [usize; 2],
    decision: DecisionJson,
    threshold: f64,
    value: f64,
}

#[derive(Serialize)]
struct TreeNodeJson {
    id: usize,
    stage: usize,
    history: String,
    p: Vec<Vec<f64>>,
    children: Option<[usize; 2]>,
    decision: Option<DecisionJson>,
    threshold: Option<f64>,
    value: f64,
}

#[derive(Serialize)]
struct TreeJson {
    horizon: usize,
    node_count: usize,
    decision_state_count: usize,
    root: RootJson,
    nodes: Vec<TreeNodeJson>,
}

/// Worst-case node count `2^{N+1} - 2` of a tree with horizon `n`.
pub fn full_tree_size(n: usize) -> u128 {
    if n >= 127 {
        u128::MAX
    } else {
        (1u128 << (n + 1)) - 2
    }
}

struct Level {
    keys: HashMap<Vec<u64>, usize>,
}

fn insert(
    nodes: &mut Vec<TreeNode>,
    level: &mut Level,
    ids: &mut Vec<usize>,
    stage: usize,
    history: Vec<bool>,
    p: Matrix,
) -> usize {
    *level.keys.entry(bit_key(&p)).or_insert_with(|| {
        let id = nodes.len();
        nodes.push(TreeNode {
            stage,
            history,
            p,
            children: None,
            decision: None,
            threshold: None,
            value: 0.0,
        });
        ids.push(id);
        id
    })
}

/// Builds every covariance reachable under any decisions, deduplicating
/// bitwise-identical covariances within a stage, then fills decisions and
/// values by backward induction.
pub fn backward_enumerate(
    spec: &GameSpec,
    riccati: &RiccatiSolution,
    node_limit: usize,
) -> Result<StrategyTree, SolveError> {
    let n = spec.horizon;
    let est = Estimator::new(spec);
    let too_large = || SolveError::TreeTooLarge { required: full_tree_size(n), limit: node_limit };

    let prior = FilterState::prior(spec).p;
    let first = branch(&est, spec, 0, prior.clone())?;
    let mut nodes = Vec::new();
    let mut levels: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut level = Level { keys: HashMap::new() };
    let mut ids = Vec::new();
    let root_children = [
        insert(&mut nodes, &mut level, &mut ids, 0, vec![false], first.without),
        insert(&mut nodes, &mut level, &mut ids, 0, vec![true], first.with),
    ];
    levels.push(ids);

    for k in 1..n {
        let parents = &levels[k - 1];
        if nodes.len() + 2 * parents.len() > node_limit {
            return Err(too_large());
        }
        let branches: Vec<Branch> = parents
            .par_iter()
            .map(|&id| branch(&est, spec, k, est.predict(&nodes[id].p)))
            .collect::<Result<_, _>>()?;
        let mut level = Level { keys: HashMap::new() };
        let mut ids = Vec::new();
        for (&parent, b) in parents.iter().zip(branches) {
            let mut hist = nodes[parent].history.clone();
            hist.push(false);
            let c0 = insert(&mut nodes, &mut level, &mut ids, k, hist.clone(), b.without);
            *hist.last_mut().unwrap() = true;
            let c1 = insert(&mut nodes, &mut level, &mut ids, k, hist, b.with);
            nodes[parent].children = Some([c0, c1]);
        }
        levels.push(ids);
    }

    let solve_node = |children: [usize; 2], stage: usize, nodes: &[TreeNode]| {
        let (c0, c1) = (&nodes[children[0]], &nodes[children[1]]);
        StageGame::new(spec, riccati, stage, c0.p.clone(), c1.p.clone(), [c0.value, c1.value]).solve()
    };
    for k in (0..n.saturating_sub(1)).rev() {
        let results: Vec<StageDecision> = levels[k]
            .par_iter()
            .map(|&id| solve_node(nodes[id].children.expect("inner node"), k + 1, &nodes))
            .collect();
        for (&id, r) in levels[k].iter().zip(results) {
            let node = &mut nodes[id];
            match (r.decision(), r.value) {
                (Some(d), Some(v)) => {
                    node.decision = Some(d);
                    node.threshold = Some(r.threshold);
                    node.value = v;
                }
                _ => return Err(SolveError::NoPureNash { stage: k + 1, node: Some(id) }),
            }
        }
    }
    let r = solve_node(root_children, 0, &nodes);
    let (Some(decision), Some(value)) = (r.decision(), r.value) else {
        return Err(SolveError::NoPureNash { stage: 0, node: None });
    };
    Ok(StrategyTree {
        horizon: n,
        root: TreeRoot { p: prior, children: root_children, decision, threshold: r.threshold, value },
        nodes,
        levels,
    })
}

/// Result of [`policy_iteration`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyPlan {
    pub decisions: Vec<Decision>,
    /// Trajectory and open-loop values of `decisions`.
    pub path: Vec<PathStep>,
    pub converged: bool,
    /// Update passes performed.
    pub iterations: usize,
}

impl PolicyPlan {
    pub fn observation_count(&self) -> usize {
        self.decisions.iter().filter(|d| d.observe).count()
    }

    pub fn jamming_count(&self) -> usize {
        self.decisions.iter().filter(|d| d.jam).count()
    }
}

/// Covariances `P_0..P_{N-1}` and open-loop stage values of a fixed sequence
/// started at stage `from` with entering covariance `entering`.
fn open_loop(
    est: &Estimator,
    spec: &GameSpec,
    riccati: &RiccatiSolution,
    decisions: &[Decision],
    from: usize,
    entering: Matrix,
) -> Result<Vec<(Matrix, f64)>, EstimationError> {
    let mut ps = Vec::with_capacity(decisions.len() - from);
    let mut pred = entering;
    for (k, &d) in decisions.iter().enumerate().skip(from) {
        let forced = k == 0 && matches!(spec.initial_state, InitialState::Known(_));
        let p = if spec.observation_rule.delivers(d) && !forced {
            est.posterior(&pred)?
        } else {
            pred.clone()
        };
        if k + 1 < decisions.len() {
            pred = est.predict(&p);
        }
        ps.push(p);
    }
    let mut out: Vec<(Matrix, f64)> = Vec::with_capacity(ps.len());
    let mut acc = 0.0;
    for (i, p) in ps.into_iter().enumerate().rev() {
        let k = from + i;
        let d = decisions[k];
        let id = d.observe as u8 as f64;
        let ia = d.jam as u8 as f64;
        acc += trace_product(&p, &riccati.phi[k]) + id * spec.o_d[k] - ia * spec.o_a[k];
        out.push((p, acc));
    }
    out.reverse();
    Ok(out)
}

/// Trajectory and values of a fixed decision sequence from the prior.
pub fn evaluate_sequence(
    spec: &GameSpec,
    riccati: &RiccatiSolution,
    decisions: &[Decision],
) -> Result<Vec<PathStep>, SolveError> {
    if decisions.len() != spec.horizon {
        return Err(SolveError::LengthMismatch { expected: spec.horizon, got: decisions.len() });
    }
    let est = Estimator::new(spec);
    let vals = open_loop(&est, spec, riccati, decisions, 0, FilterState::prior(spec).p)?;
    let mut thresholds = vec![f64::NAN; decisions.len()];
    let mut pred = FilterState::prior(spec).p;
    for k in 0..decisions.len() {
        thresholds[k] = sequence_stage(&est, spec, riccati, decisions, k, pred)?.threshold();
        pred = est.predict(&vals[k].0);
    }
    Ok(vals
        .into_iter()
        .zip(thresholds)
        .enumerate()
        .map(|(k, ((p, value), threshold))| PathStep {
            stage: k,
            decision: decisions[k],
            h: spec.observation_rule.delivers(decisions[k]),
            p,
            threshold,
            value,
        })
        .collect())
}

/// Stage game at `k` whose continuation values follow `decisions` open-loop.
fn sequence_stage(
    est: &Estimator,
    spec: &GameSpec,
    riccati: &RiccatiSolution,
    decisions: &[Decision],
    k: usize,
    entering: Matrix,
) -> Result<StageGame, EstimationError> {
    let b = branch(est, spec, k, entering)?;
    let tail = |p: &Matrix| -> Result<f64, EstimationError> {
        if k + 1 >= decisions.len() {
            return Ok(0.0);
        }
        Ok(open_loop(est, spec, riccati, decisions, k + 1, est.predict(p))?[0].1)
    };
    let continuation = [tail(&b.without)?, tail(&b.with)?];
    Ok(StageGame::new(spec, riccati, k, b.without, b.with, continuation))
}

/// Policy iteration over decision sequences.
///
/// Each pass walks forward through the stages: stage `k` is re-decided at the
/// covariance the new sequence itself reaches, with continuation values taken
/// open-loop from the previous sequence. Stops at a fixed point or after
/// `max_iters` passes; convergence is not guaranteed.
pub fn policy_iteration(
    spec: &GameSpec,
    riccati: &RiccatiSolution,
    init: &[Decision],
    max_iters: usize,
) -> Result<PolicyPlan, SolveError> {
    if init.len() != spec.horizon {
        return Err(SolveError::LengthMismatch { expected: spec.horizon, got: init.len() });
    }
    if let Some(stage) = init.iter().position(|d| *d == Decision::JAM_ONLY) {
        return Err(SolveError::InvalidInitialPolicy { stage });
    }
    let est = Estimator::new(spec);
    let mut current = init.to_vec();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut next = Vec::with_capacity(spec.horizon);
        let mut pred = FilterState::prior(spec).p;
        for k in 0..spec.horizon {
            let game = sequence_stage(&est, spec, riccati, &current, k, pred)?;
            let d = game
                .solve()
                .decision()
                .ok_or(SolveError::NoPureNash { stage: k, node: None })?;
            let p = if spec.observation_rule.delivers(d) { &game.with } else { &game.without };
            pred = est.predict(p);
            next.push(d);
        }
        if next == current {
            converged = true;
            break;
        }
        current = next;
    }
    let path = evaluate_sequence(spec, riccati, &current)?;
    Ok(PolicyPlan { decisions: current, path, converged, iterations })
}

/// The additive terms of the equilibrium value `V_0*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueBreakdown {
    /// `E[x_0' L_0 x_0]`.
    pub initial: f64,
    /// `Σ tr(Σs C' L_{n+1} C)`.
    pub noise: f64,
    /// `Σ tr(P_n φ_n)`.
    pub estimation: f64,
    /// `Σ i^d O^d`.
    pub observation: f64,
    /// `-Σ i^a O^a`.
    pub jamming: f64,
    pub total: f64,
}

/// Splits the value of an equilibrium path into its terms.
pub fn evaluate_value(spec: &GameSpec, riccati: &RiccatiSolution, path: &[PathStep]) -> ValueBreakdown {
    let l0 = &riccati.l[0];
    let initial = match &spec.initial_state {
        InitialState::Known(x) => x.dot(&(l0 * x)),
        InitialState::Gaussian { mean, cov } => mean.dot(&(l0 * mean)) + trace_product(l0, cov),
    };
    let noise_in = &spec.c * &spec.sigma_s * spec.c.transpose();
    let noise = (0..spec.horizon).map(|n| trace_product(&noise_in, &riccati.l[n + 1])).sum();
    let mut estimation = 0.0;
    let mut observation = 0.0;
    let mut jamming = 0.0;
    for s in path {
        estimation += trace_product(&s.p, &riccati.phi[s.stage]);
        if s.decision.observe {
            observation += spec.o_d[s.stage];
        }
        if s.decision.jam {
            jamming -= spec.o_a[s.stage];
        }
    }
    ValueBreakdown {
        initial,
        noise,
        estimation,
        observation,
        jamming,
        total: initial + noise + estimation + observation + jamming,
    }
}

/// Which global solver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Enumerate when the tree fits the node limit, otherwise policy iteration.
    #[default]
    Auto,
    Enumerate,
    Policy,
}

/// A solved decision layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Tree(StrategyTree),
    Sequence(PolicyPlan),
}

impl Plan {
    pub fn path(&self, rule: ObservationRule) -> Vec<PathStep> {
        match self {
            Plan::Tree(t) => t.on_path(rule),
            Plan::Sequence(s) => s.path.clone(),
        }
    }

    /// `false` only for policy iteration that stopped without a fixed point.
    pub fn converged(&self) -> bool {
        match self {
            Plan::Tree(_) => true,
            Plan::Sequence(s) => s.converged,
        }
    }
}

/// Iteration cap for each policy-iteration start in [`solve`].
pub const POLICY_MAX_ITERS: usize = 200;

/// Solves the decision layer. Policy iteration is restarted from all-idle,
/// all-observe and all-observe-jammed sequences and the first fixed point is
/// kept; without one the all-idle run is returned.
pub fn solve(
    spec: &GameSpec,
    riccati: &RiccatiSolution,
    method: Method,
    node_limit: usize,
) -> Result<Plan, SolveError> {
    let enumerate = match method {
        Method::Enumerate => true,
        Method::Policy => false,
        Method::Auto => {
            Estimator::new(spec).perfect_observation() || full_tree_size(spec.horizon) <= node_limit as u128
        }
    };
    if enumerate {
        return backward_enumerate(spec, riccati, node_limit).map(Plan::Tree);
    }
    let mut first = None;
    for start in [Decision::IDLE, Decision::OBSERVE, Decision::OBSERVE_JAMMED] {
        let plan = policy_iteration(spec, riccati, &vec![start; spec.horizon], POLICY_MAX_ITERS)?;
        if plan.converged {
            return Ok(Plan::Sequence(plan));
        }
        first.get_or_insert(plan);
    }
    Ok(Plan::Sequence(first.expect("at least one start")))
}
