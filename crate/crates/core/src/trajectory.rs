//! Parameterized continuous-time trajectory functions.
//!
//! A trajectory is `F(t) = sum_i c_i * phi_i(t - t_ref)` per state dimension.
//! The *order* `m` is the number of terms, so an order-`m` monomial basis is a
//! polynomial of degree `m - 1`: order 2 is a straight line, order 3 a parabola.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StfError};

/// Evaluates term `i` (0-based) of a user basis, or its `k`-th derivative, at
/// the re-centered time `tau`.
pub type CustomTerm = dyn Fn(usize, f64, u32) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum BasisKind {
    /// `[1, tau, tau^2, ...]`.
    Monomial,
    /// `[1, sin(w tau), cos(w tau), sin(2 w tau), cos(2 w tau), ...]`.
    ///
    /// Order 2 gives `[1, sin(w tau)]`, the parametric ellipse form for the
    /// x coordinate; order 3 adds the cosine term used for y.
    Trigonometric {
        omega: f64,
    },
    Custom(Arc<CustomTerm>),
}

impl fmt::Debug for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisKind::Monomial => write!(f, "Monomial"),
            BasisKind::Trigonometric { omega } => write!(f, "Trigonometric {{ omega: {omega} }}"),
            BasisKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BasisSpec {
    pub kind: BasisKind,
    order: usize,
}

impl BasisSpec {
    pub fn monomial(order: usize) -> Self {
        assert!(order >= 1, "basis order must be at least 1");
        Self { kind: BasisKind::Monomial, order }
    }

    pub fn trigonometric(order: usize, omega: f64) -> Self {
        assert!(order >= 1, "basis order must be at least 1");
        Self { kind: BasisKind::Trigonometric { omega }, order }
    }

    pub fn custom(order: usize, term: Arc<CustomTerm>) -> Self {
        assert!(order >= 1, "basis order must be at least 1");
        Self { kind: BasisKind::Custom(term), order }
    }

    /// Number of terms `m`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_monomial(&self) -> bool {
        matches!(self.kind, BasisKind::Monomial)
    }

    /// `[phi_1(tau), ..., phi_m(tau)]` with `tau = t - t_ref`.
    pub fn basis_vector(&self, t: f64, t_ref: f64) -> DVector<f64> {
        self.derivative_vector(t, t_ref, 0)
    }

    /// `k`-th time derivative of every basis term at `tau = t - t_ref`.
    pub fn derivative_vector(&self, t: f64, t_ref: f64, k: u32) -> DVector<f64> {
        let tau = t - t_ref;
        let m = self.order;
        match &self.kind {
            BasisKind::Monomial => DVector::from_fn(m, |i, _| monomial_derivative(i, tau, k)),
            BasisKind::Trigonometric { omega } => DVector::from_fn(m, |i, _| trig_derivative(i, tau, *omega, k)),
            BasisKind::Custom(term) => DVector::from_fn(m, |i, _| term(i, tau, k)),
        }
    }
}

/// d^k/dtau^k of tau^i.
fn monomial_derivative(i: usize, tau: f64, k: u32) -> f64 {
    let k = k as usize;
    if k > i {
        return 0.0;
    }
    let falling: f64 = ((i - k + 1)..=i).map(|v| v as f64).product();
    falling * tau.powi((i - k) as i32)
}

fn trig_derivative(i: usize, tau: f64, omega: f64, k: u32) -> f64 {
    if i == 0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let harmonic = ((i + 1) / 2) as f64;
    let w = harmonic * omega;
    // Each derivative advances the phase by a quarter turn.
    let phase = w * tau + f64::from(k) * std::f64::consts::FRAC_PI_2;
    let scale = w.powi(k as i32);
    if i % 2 == 1 {
        scale * phase.sin()
    } else {
        scale * phase.cos()
    }
}

/// Sampling window `[k1, k2]` with a sample-count cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub k1: f64,
    pub k2: f64,
    pub max_count: usize,
}

impl TimeWindow {
    pub fn new(k1: f64, k2: f64, max_count: usize) -> Result<Self> {
        if !(k1 <= k2) {
            return Err(StfError::InvalidConfig(format!("window k1={k1} exceeds k2={k2}")));
        }
        if max_count == 0 {
            return Err(StfError::InvalidConfig("window max_count must be positive".into()));
        }
        Ok(Self { k1, k2, max_count })
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.k1 + self.k2)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.k1 && t <= self.k2
    }
}

/// Result of evaluating a fitted trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub state: DVector<f64>,
    /// Set when the query time falls outside the trusted window.
    pub extrapolated: bool,
}

/// Fitted trajectory coefficients, one vector of `m` coefficients per state
/// dimension, expressed around the reference time `t_ref`.
#[derive(Debug, Clone)]
pub struct FotParams {
    pub coeffs: Vec<DVector<f64>>,
    pub basis: BasisSpec,
    pub t_ref: f64,
    pub valid_window: (f64, f64),
}

impl FotParams {
    pub fn new(coeffs: Vec<DVector<f64>>, basis: BasisSpec, t_ref: f64, valid_window: (f64, f64)) -> Result<Self> {
        let m = basis.order();
        if let Some(bad) = coeffs.iter().find(|c| c.len() != m) {
            return Err(StfError::DimensionMismatch { expected: m, got: bad.len() });
        }
        if !(valid_window.0 <= valid_window.1) {
            return Err(StfError::InvalidConfig(format!(
                "valid window [{}, {}] is reversed",
                valid_window.0, valid_window.1
            )));
        }
        Ok(Self { coeffs, basis, t_ref, valid_window })
    }

    /// All-zero coefficients for `dims` state dimensions.
    pub fn zeros(dims: usize, basis: BasisSpec, t_ref: f64, valid_window: (f64, f64)) -> Self {
        let m = basis.order();
        Self { coeffs: vec![DVector::zeros(m); dims], basis, t_ref, valid_window }
    }

    pub fn dims(&self) -> usize {
        self.coeffs.len()
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    /// Coefficients stacked dimension-major into one vector.
    pub fn flatten(&self) -> DVector<f64> {
        let m = self.order();
        DVector::from_fn(self.dims() * m, |idx, _| self.coeffs[idx / m][idx % m])
    }

    /// Inverse of [`FotParams::flatten`], keeping basis and window.
    pub fn with_flat(&self, flat: &DVector<f64>) -> Self {
        let m = self.order();
        let coeffs = (0..self.dims()).map(|d| DVector::from_fn(m, |i, _| flat[d * m + i])).collect();
        Self { coeffs, basis: self.basis.clone(), t_ref: self.t_ref, valid_window: self.valid_window }
    }

    pub fn in_window(&self, t: f64) -> bool {
        t >= self.valid_window.0 && t <= self.valid_window.1
    }

    pub fn state_at(&self, t: f64) -> DVector<f64> {
        let phi = self.basis.basis_vector(t, self.t_ref);
        DVector::from_iterator(self.dims(), self.coeffs.iter().map(|c| c.dot(&phi)))
    }

    pub fn evaluate(&self, t: f64) -> Evaluation {
        Evaluation { state: self.state_at(t), extrapolated: !self.in_window(t) }
    }

    /// Analytic `order`-th time derivative of the trajectory at `t`.
    pub fn derivative(&self, t: f64, order: u32) -> DVector<f64> {
        let dphi = self.basis.derivative_vector(t, self.t_ref, order);
        DVector::from_iterator(self.dims(), self.coeffs.iter().map(|c| c.dot(&dphi)))
    }

    /// Re-expresses the trajectory around `new_ref` without changing its
    /// values. Monomial coefficients are re-expanded binomially; other bases
    /// are returned unchanged since their evaluation does not depend on where
    /// the coefficients are stored.
    pub fn recentered(&self, new_ref: f64) -> Self {
        if !self.basis.is_monomial() {
            return self.clone();
        }
        let shift = new_ref - self.t_ref;
        let m = self.order();
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                DVector::from_fn(m, |j, _| {
                    (j..m).map(|i| c[i] * binomial(i, j) * shift.powi((i - j) as i32)).sum::<f64>()
                })
            })
            .collect();
        Self { coeffs, basis: self.basis.clone(), t_ref: new_ref, valid_window: self.valid_window }
    }

    pub fn with_window(mut self, valid_window: (f64, f64)) -> Self {
        self.valid_window = valid_window;
        self
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotionClass {
    /// Constant velocity.
    CV,
    /// Constant acceleration.
    CA,
}

/// Order (number of terms) whose polynomial matches the motion class exactly.
pub fn recommended_order(class: MotionClass) -> usize {
    match class {
        MotionClass::CV => 2,
        MotionClass::CA => 3,
    }
}

/// Worst-case Lagrange remainder of an order-`m` fit over a window of the
/// given half width: `deriv_bound * half_width^m / m!`.
pub fn truncation_bound(deriv_bound: f64, half_width: f64, m: usize) -> f64 {
    let factorial: f64 = (1..=m).map(|v| v as f64).product();
    deriv_bound * half_width.powi(m as i32) / factorial
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly(coeffs: &[f64], t_ref: f64) -> FotParams {
        FotParams::new(vec![DVector::from_column_slice(coeffs)], BasisSpec::monomial(coeffs.len()), t_ref, (0.0, 10.0))
            .unwrap()
    }

    #[test]
    fn monomial_basis_values() {
        let b = BasisSpec::monomial(3).basis_vector(2.0, 0.0);
        assert_eq!(b.as_slice(), &[1.0, 2.0, 4.0]);
        let b = BasisSpec::monomial(1).basis_vector(123.4, 7.0);
        assert_eq!(b.as_slice(), &[1.0]);
    }

    #[test]
    fn trig_basis_at_zero() {
        let b = BasisSpec::trigonometric(2, 1.0).basis_vector(0.0, 0.0);
        assert_eq!(b.as_slice(), &[1.0, 0.0]);
        let b = BasisSpec::trigonometric(3, 2.0).basis_vector(0.25, 0.0);
        assert!((b[1] - 0.5f64.sin()).abs() < 1e-15);
        assert!((b[2] - 0.5f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn trig_derivatives() {
        let spec = BasisSpec::trigonometric(3, 1.5);
        let d = spec.derivative_vector(0.7, 0.2, 1);
        assert!((d[1] - 1.5 * (0.75f64).cos()).abs() < 1e-12);
        assert!((d[2] + 1.5 * (0.75f64).sin()).abs() < 1e-12);
        let d2 = spec.derivative_vector(0.7, 0.2, 2);
        assert!((d2[1] + 2.25 * (0.75f64).sin()).abs() < 1e-12);
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(poly(&[5.0], 0.0).state_at(42.0)[0], 5.0);
        assert_eq!(poly(&[1.0, 2.0, 3.0], 0.0).state_at(2.0)[0], 17.0);
        let e = poly(&[1.0, 2.0], 0.0).evaluate(11.0);
        assert!(e.extrapolated);
        assert!(!poly(&[1.0, 2.0], 0.0).evaluate(10.0).extrapolated);
    }

    #[test]
    fn derivative_examples() {
        let p = poly(&[1.0, 2.0, 3.0], 0.0);
        assert_eq!(p.derivative(1.0, 1)[0], 8.0);
        assert_eq!(p.derivative(-3.3, 2)[0], 6.0);
        assert_eq!(p.derivative(5.0, 3)[0], 0.0);
    }

    #[test]
    fn orders_for_motion_classes() {
        assert_eq!(recommended_order(MotionClass::CV), 2);
        assert_eq!(recommended_order(MotionClass::CA), 3);
    }

    #[test]
    fn truncation_bound_examples() {
        assert!((truncation_bound(6.0, 0.5, 3) - 0.125).abs() < 1e-15);
        assert_eq!(truncation_bound(6.0, 0.0, 3), 0.0);
        assert_eq!(truncation_bound(0.0, 2.0, 3), 0.0);
    }

    #[test]
    fn truncation_bound_covers_cubic_remainder() {
        // Taylor expansion of t^3 about 0 truncated at degree 2 leaves t^3 itself.
        let bound = truncation_bound(6.0, 0.5, 3);
        for i in 0..=100 {
            let t = -0.5 + i as f64 * 0.01;
            assert!(t.powi(3).abs() <= bound + 1e-15);
        }
    }

    #[test]
    fn rejects_wrong_coefficient_count() {
        let err = FotParams::new(vec![DVector::zeros(2)], BasisSpec::monomial(3), 0.0, (0.0, 1.0));
        assert!(matches!(err, Err(StfError::DimensionMismatch { expected: 3, got: 2 })));
    }

    #[test]
    fn monomial_collocation_nonsingular() {
        let spec = BasisSpec::monomial(4);
        let times = [0.1, 0.5, 0.9, 1.7];
        let a = nalgebra::DMatrix::from_fn(4, 4, |r, c| spec.basis_vector(times[r], 0.0)[c]);
        assert!(a.determinant().abs() > 1e-6);
    }

    proptest! {
        #[test]
        fn recentering_preserves_values(
            c in proptest::collection::vec(-10.0f64..10.0, 1..5),
            t_ref in -5.0f64..5.0,
            shift in -5.0f64..5.0,
            t in 0.0f64..10.0,
        ) {
            let p = poly(&c, t_ref);
            let q = p.recentered(t_ref + shift);
            let a = p.state_at(t)[0];
            let b = q.state_at(t)[0];
            let scale = c.iter().map(|v| v.abs()).sum::<f64>() * 20f64.powi(c.len() as i32);
            prop_assert!((a - b).abs() <= 1e-9 * scale.max(1.0), "{a} vs {b}");
        }

        #[test]
        fn derivative_matches_central_differences(
            c in proptest::collection::vec(-10.0f64..10.0, 1..5),
            t in 0.0f64..3.0,
        ) {
            let p = poly(&c, 0.5);
            let h = 1e-5;
            let fd = (p.state_at(t + h)[0] - p.state_at(t - h)[0]) / (2.0 * h);
            let an = p.derivative(t, 1)[0];
            prop_assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "{fd} vs {an}");
        }

        #[test]
        fn truncation_bound_monotone(
            d in 0.0f64..100.0, dd in 0.0f64..10.0,
            h in 0.0f64..3.0, dh in 0.0f64..1.0,
            m in 1usize..6,
        ) {
            let base = truncation_bound(d, h, m);
            prop_assert!(truncation_bound(d + dd, h, m) >= base);
            prop_assert!(truncation_bound(d, h + dh, m) >= base);
        }
    }
}
