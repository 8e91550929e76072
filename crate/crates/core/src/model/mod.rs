//! Problem statement: plant, observation channel, noise, stage costs and the
//! order in which the players announce their observation/jamming decisions.

mod config;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{is_square, min_eigenvalue, PSD_TOLERANCE};
use crate::{Matrix, Vector};

pub use config::{parse_decisions, parse_spec, to_config_string};

/// How `x_0` is known to both players.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Realization known exactly; no observation is taken at stage 0.
    Known(Vector),
    /// Only the statistics `x_0 ~ N(mean, cov)` are common knowledge.
    Gaussian { mean: Vector, cov: Matrix },
}

impl InitialState {
    pub fn mean(&self) -> &Vector {
        match self {
            InitialState::Known(x) => x,
            InitialState::Gaussian { mean, .. } => mean,
        }
    }
}

/// Who announces the stage decision first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfoStructure {
    /// Defender announces `i^d`, attacker best-responds with `i^a`.
    #[default]
    DefenderLeads,
    /// Attacker announces `i^a`, defender best-responds with `i^d`.
    AttackerLeads,
    /// Both decide at once; a pure equilibrium may not exist.
    Simultaneous,
}

impl InfoStructure {
    pub fn as_str(self) -> &'static str {
        match self {
            InfoStructure::DefenderLeads => "defender-leads",
            InfoStructure::AttackerLeads => "attacker-leads",
            InfoStructure::Simultaneous => "simultaneous",
        }
    }
}

/// Which well-posedness condition the Riccati recursion enforces per stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SaddleCheck {
    /// Require `R^a_n - B^a' L_{n+1} B^a` positive definite, so the stage
    /// controls form a genuine saddle point.
    #[default]
    Strict,
    /// Only require the coupled stage matrix `M_n` to be invertible; the
    /// controls are then the stationary point of the stage quadratic.
    Stationary,
}

impl SaddleCheck {
    pub fn as_str(self) -> &'static str {
        match self {
            SaddleCheck::Strict => "strict",
            SaddleCheck::Stationary => "stationary",
        }
    }
}

/// Rule deciding whether the information vector reaches the players, as a
/// truth table indexed `[i_d][i_a]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservationRule {
    table: [[bool; 2]; 2],
}

impl ObservationRule {
    /// `h = i_d (1 - i_a)`: an observation arrives only when requested and not jammed.
    pub const JAM_BLOCKS: ObservationRule = ObservationRule {
        table: [[false, false], [true, false]],
    };

    pub fn from_table(table: [[bool; 2]; 2]) -> Self {
        ObservationRule { table }
    }

    pub fn table(&self) -> [[bool; 2]; 2] {
        self.table
    }

    pub fn delivers(&self, d: Decision) -> bool {
        self.table[d.observe as usize][d.jam as usize]
    }

    pub fn is_jam_blocks(&self) -> bool {
        *self == Self::JAM_BLOCKS
    }
}

impl Default for ObservationRule {
    fn default() -> Self {
        Self::JAM_BLOCKS
    }
}

/// A pure stage decision pair `(i^d, i^a)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Decision {
    pub observe: bool,
    pub jam: bool,
}

impl Decision {
    pub const IDLE: Decision = Decision { observe: false, jam: false };
    pub const OBSERVE: Decision = Decision { observe: true, jam: false };
    pub const OBSERVE_JAMMED: Decision = Decision { observe: true, jam: true };
    pub const JAM_ONLY: Decision = Decision { observe: false, jam: true };

    pub fn new(observe: bool, jam: bool) -> Self {
        Decision { observe, jam }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.observe as u8, self.jam as u8)
    }
}

/// The full game.
///
/// Per-stage cost lists have `horizon` entries (stages `0..N`); the terminal
/// stage only carries `q_terminal`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub horizon: usize,
    /// State transition `A` (q×q).
    pub a: Matrix,
    /// Defender input `B^d` (q×m_d).
    pub b_d: Matrix,
    /// Attacker input `B^a` (q×m_a); `m_a = 0` removes physical attacks.
    pub b_a: Matrix,
    /// System noise input `C` (q×p).
    pub c: Matrix,
    /// Observation map `D` (r×q).
    pub d: Matrix,
    /// Observation noise input `E` (r×s).
    pub e: Matrix,
    pub sigma_s: Matrix,
    pub sigma_o: Matrix,
    pub initial_state: InitialState,
    pub q: Vec<Matrix>,
    pub q_terminal: Matrix,
    pub r_d: Vec<Matrix>,
    pub r_a: Vec<Matrix>,
    /// Observation cost `O^d_n`.
    pub o_d: Vec<f64>,
    /// Jamming cost `O^a_n`.
    pub o_a: Vec<f64>,
    pub info_structure: InfoStructure,
    pub observation_rule: ObservationRule,
    pub saddle_check: SaddleCheck,
}

/// One broken invariant found by [`GameSpec::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.field, self.message)
    }
}

impl GameSpec {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn defender_dim(&self) -> usize {
        self.b_d.ncols()
    }

    pub fn attacker_dim(&self) -> usize {
        self.b_a.ncols()
    }

    pub fn observation_dim(&self) -> usize {
        self.d.nrows()
    }

    /// Lists every broken invariant; empty when the spec is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |field: String, message: String| out.push(Violation { field, message });
        let q = self.state_dim();

        if self.horizon == 0 {
            push("horizon".into(), "must be at least 1".into());
        }
        if !is_square(&self.a) {
            push("A".into(), format!("must be square, got {}x{}", self.a.nrows(), self.a.ncols()));
        }
        for (name, m) in [("Bd", &self.b_d), ("Ba", &self.b_a), ("C", &self.c)] {
            if m.nrows() != q {
                push(name.into(), format!("has {} rows, A is {q}x{q}", m.nrows()));
            }
        }
        if self.defender_dim() == 0 {
            push("Bd".into(), "must have at least one column".into());
        }
        if self.d.ncols() != q {
            push("D".into(), format!("has {} columns, A is {q}x{q}", self.d.ncols()));
        }
        if self.e.nrows() != self.d.nrows() {
            push("E".into(), format!("has {} rows, D has {}", self.e.nrows(), self.d.nrows()));
        }

        let mut semidefinite = vec![
            ("sigma_s".to_string(), &self.sigma_s, self.c.ncols()),
            ("sigma_o".to_string(), &self.sigma_o, self.e.ncols()),
            ("Q_N".to_string(), &self.q_terminal, q),
        ];
        match &self.initial_state {
            InitialState::Known(x) => {
                if x.len() != q {
                    push("x0".into(), format!("has length {}, state dimension is {q}", x.len()));
                }
            }
            InitialState::Gaussian { mean, cov } => {
                if mean.len() != q {
                    push("x0_mean".into(), format!("has length {}, state dimension is {q}", mean.len()));
                }
                semidefinite.push(("x0_cov".into(), cov, q));
            }
        }
        semidefinite.extend(self.q.iter().enumerate().map(|(n, m)| (format!("Q[{n}]"), m, q)));
        for (field, m, dim) in semidefinite {
            if let Some(msg) = check_symmetric(m, dim, false) {
                push(field, msg);
            }
        }
        let definite = self
            .r_d
            .iter()
            .enumerate()
            .map(|(n, m)| (format!("Rd[{n}]"), m, self.defender_dim()))
            .chain(
                self.r_a
                    .iter()
                    .enumerate()
                    .map(|(n, m)| (format!("Ra[{n}]"), m, self.attacker_dim())),
            );
        for (field, m, dim) in definite {
            if let Some(msg) = check_symmetric(m, dim, true) {
                push(field, msg);
            }
        }

        for (name, list) in [("Q", self.q.len()), ("Rd", self.r_d.len()), ("Ra", self.r_a.len())] {
            if list != self.horizon {
                push(name.into(), format!("has {list} stages, horizon is {}", self.horizon));
            }
        }
        for (name, costs) in [("Od", &self.o_d), ("Oa", &self.o_a)] {
            if costs.len() != self.horizon {
                push(name.into(), format!("has {} stages, horizon is {}", costs.len(), self.horizon));
            }
            for (n, &v) in costs.iter().enumerate() {
                if v < 0.0 || !v.is_finite() {
                    push(format!("{name}[{n}]"), format!("negative or not finite ({v})"));
                }
            }
        }
        out
    }

    /// Exact observations: `E Σo E' = 0` and `D` square and invertible.
    pub fn perfect_observation(&self) -> bool {
        let noise = &self.e * &self.sigma_o * self.e.transpose();
        is_square(&self.d)
            && self.d.nrows() > 0
            && noise.iter().all(|v| *v == 0.0)
            && self.d.clone().lu().is_invertible()
    }
}

/// Shape, symmetry and PSD (or PD when `definite`) check for one matrix.
fn check_symmetric(m: &Matrix, dim: usize, definite: bool) -> Option<String> {
    if m.nrows() != dim || m.ncols() != dim {
        return Some(format!("must be {dim}x{dim}, got {}x{}", m.nrows(), m.ncols()));
    }
    if dim == 0 {
        return None;
    }
    let asym = (m - m.transpose()).abs().max();
    if asym > 1e-9 * (1.0 + m.abs().max()) {
        return Some(format!("not symmetric (max asymmetry {asym:e})"));
    }
    let lo = min_eigenvalue(m);
    if definite && lo <= 0.0 {
        Some(format!("not positive definite (min eigenvalue {lo:e})"))
    } else if !definite && lo < -PSD_TOLERANCE {
        Some(format!("not positive semidefinite (min eigenvalue {lo:e})"))
    } else {
        None
    }
}

/// The scalar benchmark game
/// `x' = a x + u^d + u^a + w`, `y = x + v` with `Σs = 4`, `Σ0 = 1`,
/// `Q_n = 1`, `Q_N = 8`, `R^d_n = 1` and `R^a_n = r_a`, except that the
/// attacker's last-stage cost is `R^a_{N-1} = 10`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarBenchmark {
    pub horizon: usize,
    pub a: f64,
    pub r_a: f64,
    pub sigma_o: f64,
    pub o_d: f64,
    pub o_a: f64,
}

impl Default for ScalarBenchmark {
    fn default() -> Self {
        ScalarBenchmark {
            horizon: 30,
            a: 0.9,
            r_a: 1.5,
            sigma_o: 1.0,
            o_d: 0.0,
            o_a: 15.0,
        }
    }
}

impl ScalarBenchmark {
    pub fn to_spec(&self) -> GameSpec {
        let n = self.horizon;
        let s = |v: f64| Matrix::from_element(1, 1, v);
        let mut r_a = vec![s(self.r_a); n];
        if n > 0 {
            r_a[n - 1] = s(10.0);
        }
        GameSpec {
            horizon: n,
            a: s(self.a),
            b_d: s(1.0),
            b_a: s(1.0),
            c: s(1.0),
            d: s(1.0),
            e: s(1.0),
            sigma_s: s(4.0),
            sigma_o: s(self.sigma_o),
            initial_state: InitialState::Gaussian {
                mean: Vector::zeros(1),
                cov: s(1.0),
            },
            q: vec![s(1.0); n],
            q_terminal: s(8.0),
            r_d: vec![s(1.0); n],
            r_a,
            o_d: vec![self.o_d; n],
            o_a: vec![self.o_a; n],
            info_structure: InfoStructure::DefenderLeads,
            observation_rule: ObservationRule::JAM_BLOCKS,
            // r_a below the terminal curvature breaks strict concavity.
            saddle_check: SaddleCheck::Stationary,
        }
    }
}
