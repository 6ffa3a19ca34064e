use nalgebra::{DMatrix, DVector};

use crate::error::{Result, StfError};

/// Recursive least-squares estimate and its inverse-information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    pub estimate: DVector<f64>,
    pub p: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlsUpdate {
    pub state: RlsState,
    pub gain: DVector<f64>,
}

impl RlsState {
    pub fn new(estimate: DVector<f64>, p: DMatrix<f64>) -> Self {
        Self { estimate, p }
    }

    /// Exact initialization from a batch: the LS solution and `(X'X)^-1`.
    /// Continuing with unit forgetting then reproduces batch LS on the union.
    pub fn from_batch(regressors: &[DVector<f64>], ys: &[f64]) -> Result<Self> {
        let n = regressors
            .first()
            .map(|r| r.len())
            .ok_or(StfError::InvalidConfig("batch initialization needs data".into()))?;
        let mut info = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for (x, y) in regressors.iter().zip(ys) {
            info += x * x.transpose();
            rhs += x * *y;
        }
        let p = info.try_inverse().ok_or(StfError::RankDeficient { distinct: regressors.len(), required: n })?;
        let estimate = &p * rhs;
        Ok(Self { estimate, p: symmetrize(p) })
    }
}

/// One recursive least-squares step with forgetting factor `lambda`.
pub fn recursive_ls_update(state: &RlsState, regressor: &DVector<f64>, y: f64, lambda: f64) -> Result<RlsUpdate> {
    if !y.is_finite() || regressor.iter().any(|v| !v.is_finite()) {
        return Err(StfError::NonFinite("regressor or output"));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(StfError::InvalidConfig(format!("forgetting factor {lambda} outside (0, 1]")));
    }
    let n = state.estimate.len();
    if regressor.len() != n {
        return Err(StfError::DimensionMismatch { expected: n, got: regressor.len() });
    }
    let px = &state.p * regressor;
    let denom = lambda + regressor.dot(&px);
    let gain = &px / denom;
    let innovation = y - regressor.dot(&state.estimate);
    let estimate = &state.estimate + &gain * innovation;
    let p = (&state.p - &px * px.transpose() / denom) / lambda;
    Ok(RlsUpdate { state: RlsState { estimate, p: symmetrize(p) }, gain })
}

fn symmetrize(p: DMatrix<f64>) -> DMatrix<f64> {
    (&p + p.transpose()) * 0.5
}
