//! Equilibrium feedback control.
//!
//! For any fixed observation/jamming schedule the control layer of the game is
//! a zero-sum LQ game on the common estimate `x̂_n`. The backward recursion
//!
//! ```text
//! M_n = [ R^d + B^d'LB^d    B^d'LB^a       ]      P_n = [B^d B^a]' L A
//!       [ B^a'LB^d          B^a'LB^a - R^a ]
//! φ_n = P_n' M_n^{-1} P_n
//! L_n = Q_n + A'L_{n+1}A - φ_n,     L_N = Q_N
//! ```
//!
//! (all `L` meaning `L_{n+1}`) gives the stage feedback `[u^d; u^a] = -M_n^{-1} P_n x̂_n`.
//! `M_n^{-1}` is only ever formed through its block factorization
//! `Ω T Ω'`, with `W = R^a - B^a'LB^a` and the Schur complement
//! `S_B = R^d + B^d'LB^d + B^d'LB^a W^{-1} B^a'LB^d`.

use nalgebra::linalg::Cholesky;

use crate::error::ControlError;
use crate::linalg::{inf_norm, min_abs_eigenvalue, min_eigenvalue, symmetrize};
use crate::model::{GameSpec, SaddleCheck};
use crate::{Matrix, Vector};

/// Below this the stage blocks count as singular (or, in strict mode, not
/// positive definite).
pub const STRICTNESS_MARGIN: f64 = 1e-12;

/// Block factorization of `M_n^{-1}` at one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageFactor {
    /// Unit lower block-triangular `Ω = [[I, 0], [W^{-1}X', I]]` where
    /// `X = B^d'LB^a`; its transpose is the upper factor.
    pub omega: Matrix,
    /// `diag(S_B^{-1}, -W^{-1})`.
    pub t: Matrix,
    /// `W = R^a - B^a'LB^a`.
    pub w: Matrix,
    /// Schur complement `S_B`.
    pub s_b: Matrix,
    w_inv: Matrix,
    s_b_inv: Matrix,
}

impl StageFactor {
    /// `Ω T Ω'`.
    pub fn m_inverse(&self) -> Matrix {
        &self.omega * &self.t * self.omega.transpose()
    }

    pub fn w_inverse(&self) -> &Matrix {
        &self.w_inv
    }

    pub fn s_b_inverse(&self) -> &Matrix {
        &self.s_b_inv
    }

    /// Applies `Ω T Ω'` to `rhs` without forming the product.
    pub fn solve(&self, rhs: &Matrix) -> Matrix {
        let upper = self.omega.transpose() * rhs;
        &self.omega * (&self.t * upper)
    }
}

/// Output of [`backward_riccati`].
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    /// `L_0..=L_N`.
    pub l: Vec<Matrix>,
    /// `M_0..M_{N-1}`.
    pub m: Vec<Matrix>,
    pub factors: Vec<StageFactor>,
    /// Stacked gains `K_n` with `[u^d; u^a] = -K_n x̂`.
    pub gains: Vec<Matrix>,
    /// Observation-effect coefficients `φ_n`.
    pub phi: Vec<Matrix>,
    defender_dim: usize,
}

impl RiccatiSolution {
    pub fn horizon(&self) -> usize {
        self.phi.len()
    }

    /// Rows of `K_n` driving the defender.
    pub fn defender_gain(&self, n: usize) -> Matrix {
        let k = &self.gains[n];
        k.rows(0, self.defender_dim).into_owned()
    }

    /// Rows of `K_n` driving the attacker; `0×q` without an attack channel.
    pub fn attacker_gain(&self, n: usize) -> Matrix {
        let k = &self.gains[n];
        k.rows(self.defender_dim, k.nrows() - self.defender_dim).into_owned()
    }

    /// `‖M_n (Ω T Ω') - I‖_∞`.
    pub fn factor_residual(&self, n: usize) -> f64 {
        let prod = &self.m[n] * self.factors[n].m_inverse();
        inf_norm(&(prod - Matrix::identity(self.m[n].nrows(), self.m[n].ncols())))
    }
}

fn stage_m(spec: &GameSpec, l_next: &Matrix, n: usize) -> Matrix {
    let (md, ma) = (spec.defender_dim(), spec.attacker_dim());
    let lbd = l_next * &spec.b_d;
    let lba = l_next * &spec.b_a;
    let mut m = Matrix::zeros(md + ma, md + ma);
    m.view_mut((0, 0), (md, md))
        .copy_from(&(&spec.r_d[n] + spec.b_d.transpose() * &lbd));
    m.view_mut((0, md), (md, ma)).copy_from(&(spec.b_d.transpose() * &lba));
    m.view_mut((md, 0), (ma, md)).copy_from(&(spec.b_a.transpose() * &lbd));
    m.view_mut((md, md), (ma, ma))
        .copy_from(&(spec.b_a.transpose() * &lba - &spec.r_a[n]));
    m
}

fn invert_block(
    m: &Matrix,
    mode: SaddleCheck,
    stage: usize,
    block: &'static str,
) -> Result<Matrix, ControlError> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let singular = |min_abs_eigenvalue| ControlError::SingularStage {
        stage,
        block,
        min_abs_eigenvalue,
    };
    let inv = match mode {
        SaddleCheck::Strict => Cholesky::new(m.clone())
            .map(|c| c.inverse())
            .ok_or_else(|| singular(min_abs_eigenvalue(m)))?,
        SaddleCheck::Stationary => {
            let lo = min_abs_eigenvalue(m);
            if lo <= STRICTNESS_MARGIN {
                return Err(singular(lo));
            }
            m.clone().lu().try_inverse().ok_or_else(|| singular(lo))?
        }
    };
    Ok(symmetrize(&inv))
}

/// Factors `M_n^{-1} = Ω T Ω'` given `L_{n+1}`.
pub fn factor_m(spec: &GameSpec, l_next: &Matrix, n: usize) -> Result<StageFactor, ControlError> {
    if n >= spec.horizon {
        return Err(ControlError::StageOutOfRange { stage: n, horizon: spec.horizon });
    }
    let (md, ma) = (spec.defender_dim(), spec.attacker_dim());
    let lba = l_next * &spec.b_a;
    let w = symmetrize(&(&spec.r_a[n] - spec.b_a.transpose() * &lba));
    if spec.saddle_check == SaddleCheck::Strict && ma > 0 {
        let lo = min_eigenvalue(&w);
        if lo <= STRICTNESS_MARGIN {
            return Err(ControlError::ConcavityViolation { stage: n, min_eigenvalue: lo });
        }
    }
    let w_inv = invert_block(&w, spec.saddle_check, n, "W")?;
    let x = spec.b_d.transpose() * &lba;
    let s_b = symmetrize(
        &(&spec.r_d[n] + spec.b_d.transpose() * l_next * &spec.b_d + &x * &w_inv * x.transpose()),
    );
    let s_b_inv = invert_block(&s_b, spec.saddle_check, n, "S_B")?;

    let mut omega = Matrix::identity(md + ma, md + ma);
    omega
        .view_mut((md, 0), (ma, md))
        .copy_from(&(&w_inv * x.transpose()));
    let mut t = Matrix::zeros(md + ma, md + ma);
    t.view_mut((0, 0), (md, md)).copy_from(&s_b_inv);
    t.view_mut((md, md), (ma, ma)).copy_from(&(-&w_inv));
    Ok(StageFactor { omega, t, w, s_b, w_inv, s_b_inv })
}

/// Runs the recursion from `L_N = Q_N` down to `L_0`.
pub fn backward_riccati(spec: &GameSpec) -> Result<RiccatiSolution, ControlError> {
    let n_stages = spec.horizon;
    let mut l = vec![Matrix::zeros(0, 0); n_stages + 1];
    l[n_stages] = spec.q_terminal.clone();
    let mut m = Vec::with_capacity(n_stages);
    let mut factors = Vec::with_capacity(n_stages);
    let mut gains = Vec::with_capacity(n_stages);
    let mut phi = Vec::with_capacity(n_stages);
    let b = stacked_inputs(spec);
    for n in (0..n_stages).rev() {
        let l_next = l[n + 1].clone();
        let l_next = &l_next;
        let factor = factor_m(spec, l_next, n)?;
        let la = l_next * &spec.a;
        let p = b.transpose() * &la;
        let k = factor.solve(&p);
        let phi_n = symmetrize(&(p.transpose() * &k));
        l[n] = symmetrize(&(&spec.q[n] + spec.a.transpose() * &la - &phi_n));
        m.push(stage_m(spec, l_next, n));
        factors.push(factor);
        gains.push(k);
        phi.push(phi_n);
    }
    m.reverse();
    factors.reverse();
    gains.reverse();
    phi.reverse();
    Ok(RiccatiSolution { l, m, factors, gains, phi, defender_dim: spec.defender_dim() })
}

fn stacked_inputs(spec: &GameSpec) -> Matrix {
    let (md, ma) = (spec.defender_dim(), spec.attacker_dim());
    let mut b = Matrix::zeros(spec.state_dim(), md + ma);
    b.columns_mut(0, md).copy_from(&spec.b_d);
    b.columns_mut(md, ma).copy_from(&spec.b_a);
    b
}

/// Defender and attacker gains from the closed forms
///
/// ```text
/// K^d = S_B^{-1} B^d' (I + L B^a W^{-1} B^a') L A
/// K^a = -W^{-1} B^a' (I - L B^d S_B^{-1} B^d' (I + L B^a W^{-1} B^a')) L A
/// ```
///
/// so that `u^d = -K^d x̂` and `u^a = -K^a x̂`.
pub fn gains_explicit(spec: &GameSpec, l_next: &Matrix, n: usize) -> Result<(Matrix, Matrix), ControlError> {
    let f = factor_m(spec, l_next, n)?;
    let q = spec.state_dim();
    let eye = Matrix::identity(q, q);
    let la = l_next * &spec.a;
    let coupling = &eye + l_next * &spec.b_a * f.w_inverse() * spec.b_a.transpose();
    let kd = f.s_b_inverse() * spec.b_d.transpose() * &coupling * &la;
    let inner = &eye - l_next * &spec.b_d * f.s_b_inverse() * spec.b_d.transpose() * &coupling;
    let ka = -(f.w_inverse() * spec.b_a.transpose() * inner * &la);
    Ok((kd, ka))
}

/// Equilibrium controls `(u^d, u^a) = -K_n x̂` at stage `n`.
pub fn controls_at(sol: &RiccatiSolution, n: usize, xhat: &Vector) -> Result<(Vector, Vector), ControlError> {
    if n >= sol.horizon() {
        return Err(ControlError::StageOutOfRange { stage: n, horizon: sol.horizon() });
    }
    let u = -(&sol.gains[n] * xhat);
    let md = sol.defender_dim;
    let ud = u.rows(0, md).into_owned();
    let ua = u.rows(md, u.len() - md).into_owned();
    Ok((ud, ua))
}
