//! Error-covariance operators and the Kalman-type filter.
//!
//! With `Z(P) = APA' + CΣsC'` the one-step prediction and
//! `H(P) = Z D'(D Z D' + EΣoE')^{-1} D Z` the information gained from one
//! observation, the covariance after stage `n` is `Z(P_{n-1})` when the
//! observation is missing and `Z(P_{n-1}) - H(P_{n-1})` when it arrives.

use nalgebra::linalg::Cholesky;

use crate::error::EstimationError;
use crate::linalg::{clean_covariance, min_eigenvalue, symmetrize};
use crate::model::{GameSpec, InitialState};
use crate::{Matrix, Vector};

/// Below this the innovation covariance counts as singular.
pub const INNOVATION_MARGIN: f64 = 1e-12;

/// Covariance operators with the noise terms of one spec precomputed.
#[derive(Debug, Clone)]
pub struct Estimator {
    a: Matrix,
    b_d: Matrix,
    b_a: Matrix,
    d: Matrix,
    system_noise: Matrix,
    observation_noise: Matrix,
    /// `D^{-1}` when observations are exact.
    d_inv: Option<Matrix>,
}

impl Estimator {
    pub fn new(spec: &GameSpec) -> Self {
        let d_inv = if spec.perfect_observation() {
            spec.d.clone().lu().try_inverse()
        } else {
            None
        };
        Estimator {
            a: spec.a.clone(),
            b_d: spec.b_d.clone(),
            b_a: spec.b_a.clone(),
            d: spec.d.clone(),
            system_noise: symmetrize(&(&spec.c * &spec.sigma_s * spec.c.transpose())),
            observation_noise: symmetrize(&(&spec.e * &spec.sigma_o * spec.e.transpose())),
            d_inv,
        }
    }

    pub fn perfect_observation(&self) -> bool {
        self.d_inv.is_some()
    }

    /// `Z(P) = APA' + CΣsC'`.
    pub fn predict(&self, p: &Matrix) -> Matrix {
        clean_covariance(&(&self.a * p * self.a.transpose() + &self.system_noise))
    }

    /// `(H, G)` for an already predicted covariance `Z`.
    pub fn information(&self, z: &Matrix) -> Result<(Matrix, Matrix), EstimationError> {
        if let Some(d_inv) = &self.d_inv {
            return Ok((z.clone(), d_inv.clone()));
        }
        let dz = &self.d * z;
        let s = symmetrize(&(&dz * self.d.transpose() + &self.observation_noise));
        let lo = min_eigenvalue(&s);
        if lo <= INNOVATION_MARGIN {
            return Err(EstimationError::SingularInnovation { min_eigenvalue: lo });
        }
        let chol = Cholesky::new(s).ok_or(EstimationError::SingularInnovation { min_eigenvalue: lo })?;
        // G' = S^{-1} D Z
        let g = chol.solve(&dz).transpose();
        let h = clean_covariance(&(&g * &dz));
        Ok((h, g))
    }

    /// Covariance after an observation arrives, in Joseph form
    /// `(I - GD) Z (I - GD)' + G EΣoE' G'`.
    pub fn posterior(&self, z: &Matrix) -> Result<Matrix, EstimationError> {
        if self.d_inv.is_some() {
            return Ok(Matrix::zeros(z.nrows(), z.ncols()));
        }
        let (_, g) = self.information(z)?;
        Ok(self.joseph(z, &g))
    }

    fn joseph(&self, z: &Matrix, g: &Matrix) -> Matrix {
        let q = z.nrows();
        let i_gd = Matrix::identity(q, q) - g * &self.d;
        clean_covariance(&(&i_gd * z * i_gd.transpose() + g * &self.observation_noise * g.transpose()))
    }

    /// `P_n` from `P_{n-1}` and the stage outcome `h`.
    pub fn propagate(&self, p_prev: &Matrix, h: bool) -> Result<Matrix, EstimationError> {
        let z = self.predict(p_prev);
        if h {
            self.posterior(&z)
        } else {
            Ok(z)
        }
    }

    /// Folds the stage outcome into a predicted state.
    pub fn correct(
        &self,
        predicted: FilterState,
        observation: Option<&Vector>,
        h: bool,
    ) -> Result<FilterState, EstimationError> {
        match (observation, h) {
            (None, false) => Ok(predicted),
            (Some(y), true) => {
                if let Some(d_inv) = &self.d_inv {
                    let q = predicted.p.nrows();
                    return Ok(FilterState { xhat: d_inv * y, p: Matrix::zeros(q, q) });
                }
                let (_, g) = self.information(&predicted.p)?;
                let innovation = y - &self.d * &predicted.xhat;
                Ok(FilterState {
                    xhat: &predicted.xhat + &g * innovation,
                    p: self.joseph(&predicted.p, &g),
                })
            }
            (obs, h) => Err(EstimationError::ObservationMismatch { present: obs.is_some(), h }),
        }
    }

    /// Predicts with the stage controls, then corrects.
    pub fn step(
        &self,
        state: &FilterState,
        ud: &Vector,
        ua: &Vector,
        observation: Option<&Vector>,
        h: bool,
    ) -> Result<FilterState, EstimationError> {
        let predicted = FilterState {
            xhat: &self.a * &state.xhat + &self.b_d * ud + &self.b_a * ua,
            p: self.predict(&state.p),
        };
        self.correct(predicted, observation, h)
    }
}

/// Common state estimate and its error covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub xhat: Vector,
    pub p: Matrix,
}

impl FilterState {
    /// Belief about `x_0` before the stage-0 observation.
    pub fn prior(spec: &GameSpec) -> Self {
        match &spec.initial_state {
            InitialState::Known(x) => FilterState {
                xhat: x.clone(),
                p: Matrix::zeros(x.len(), x.len()),
            },
            InitialState::Gaussian { mean, cov } => FilterState {
                xhat: mean.clone(),
                p: clean_covariance(cov),
            },
        }
    }
}

/// `Z(P)` for `spec`.
pub fn predict_z(p: &Matrix, spec: &GameSpec) -> Matrix {
    Estimator::new(spec).predict(p)
}

/// `(H(P), G)` where `G` is the Kalman gain for the prediction `Z(P)`.
pub fn gain_h(p: &Matrix, spec: &GameSpec) -> Result<(Matrix, Matrix), EstimationError> {
    let est = Estimator::new(spec);
    est.information(&est.predict(p))
}

pub fn propagate(p_prev: &Matrix, h: bool, spec: &GameSpec) -> Result<Matrix, EstimationError> {
    Estimator::new(spec).propagate(p_prev, h)
}

/// `P_0` given the stage-0 outcome `h0`. A known initial state admits no
/// observation and yields `P_0 = 0`.
pub fn initial_covariance(spec: &GameSpec, h0: bool) -> Result<Matrix, EstimationError> {
    match &spec.initial_state {
        InitialState::Known(_) if h0 => Err(EstimationError::InvalidInitialObservation),
        InitialState::Known(x) => Ok(Matrix::zeros(x.len(), x.len())),
        InitialState::Gaussian { cov, .. } if h0 => Estimator::new(spec).posterior(&clean_covariance(cov)),
        InitialState::Gaussian { cov, .. } => Ok(clean_covariance(cov)),
    }
}

pub fn filter_step(
    state: &FilterState,
    ud: &Vector,
    ua: &Vector,
    observation: Option<&Vector>,
    h: bool,
    spec: &GameSpec,
) -> Result<FilterState, EstimationError> {
    Estimator::new(spec).step(state, ud, ua, observation, h)
}
