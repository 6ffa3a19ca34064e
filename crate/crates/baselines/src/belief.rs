use nalgebra::{DMatrix, DVector};

/// Mean and covariance of a Gaussian state estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Eigenvalues below this are a numerical problem rather than round-off.
pub const NEGATIVE_EIGEN_TOLERANCE: f64 = -1e-10;

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        assert_eq!(cov.nrows(), mean.len(), "covariance rows must match mean");
        assert_eq!(cov.ncols(), mean.len(), "covariance must be square");
        Self { mean, cov }
    }

    pub fn from_diagonal(mean: &[f64], variances: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(mean), DMatrix::from_diagonal(&DVector::from_column_slice(variances)))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Symmetrizes the covariance and clamps negative eigenvalues to zero.
    /// Returns true when an eigenvalue was below [`NEGATIVE_EIGEN_TOLERANCE`].
    pub fn sanitize(&mut self) -> bool {
        self.cov = symmetrize(&self.cov);
        if self.cov.clone().cholesky().is_some() {
            return false;
        }
        let eig = self.cov.clone().symmetric_eigen();
        let min = eig.eigenvalues.min();
        if min >= 0.0 {
            return false;
        }
        let clamped = eig.eigenvalues.map(|v| v.max(0.0));
        self.cov = symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()));
        min < NEGATIVE_EIGEN_TOLERANCE
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Moment-matched combination of weighted Gaussian components.
pub fn combine(components: &[GaussianBelief], weights: &[f64]) -> GaussianBelief {
    let n = components[0].dim();
    let mut mean = DVector::zeros(n);
    for (c, w) in components.iter().zip(weights) {
        mean += &c.mean * *w;
    }
    let mut cov = DMatrix::zeros(n, n);
    for (c, w) in components.iter().zip(weights) {
        let d = &c.mean - &mean;
        cov += (&c.cov + &d * d.transpose()) * *w;
    }
    GaussianBelief { mean, cov: symmetrize(&cov) }
}
