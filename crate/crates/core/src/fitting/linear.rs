use nalgebra::{DMatrix, DVector};

use super::{FitProblem, FitResult, Observation};
use crate::error::{Result, StfError};
use crate::fitting::weighted_objective;
use crate::trajectory::FotParams;

const CONDITION_LIMIT: f64 = 1e10;

/// Closed-form weighted least squares for directly-observed states.
///
/// Each state dimension is solved independently from its normal equations,
/// through an SVD of the weighted collocation matrix rather than by forming
/// the normal matrix.
pub fn linear_ls_fit(problem: &FitProblem) -> Result<FitResult> {
    problem.validate()?;
    if !problem.spec.model.is_identity() && !problem.observations.iter().all(Observation::is_anchor) {
        return Err(StfError::InvalidConfig("linear fit needs a directly-observed (identity) model".into()));
    }
    let dims = problem.dims();
    let m = problem.basis.order();
    let weights = problem.normalized_weights()?;

    let informative: Vec<Observation> =
        problem.observations.iter().zip(&weights).filter(|(_, w)| **w > 0.0).map(|(o, _)| o.clone()).collect();
    let mut distinct = super::distinct_times(&informative);
    if problem.spec.penalty.as_ref().is_some_and(|p| p.trade_off > 0.0) {
        distinct += 1;
    }
    if distinct < m {
        return Err(StfError::RankDeficient { distinct, required: m });
    }
    for obs in &problem.observations {
        if obs.value.len() != dims {
            return Err(StfError::DimensionMismatch { expected: dims, got: obs.value.len() });
        }
    }

    let t_ref = problem.t_ref();
    let penalty_rows = usize::from(problem.spec.penalty.is_some());
    let rows = problem.observations.len() + penalty_rows;

    let mut design = DMatrix::zeros(rows, m);
    for (r, (obs, w)) in problem.observations.iter().zip(&weights).enumerate() {
        let phi = problem.basis.basis_vector(obs.time, t_ref);
        design.row_mut(r).copy_from(&(phi.transpose() * w.sqrt()));
    }
    if let Some(p) = &problem.spec.penalty {
        let phi = problem.basis.basis_vector(p.time, t_ref);
        design.row_mut(rows - 1).copy_from(&(phi.transpose() * p.trade_off.sqrt()));
    }

    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    let condition = if min_sv > 0.0 { max_sv / min_sv } else { f64::INFINITY };
    if !condition.is_finite() {
        return Err(StfError::RankDeficient { distinct, required: m });
    }

    let mut coeffs = Vec::with_capacity(dims);
    for d in 0..dims {
        let mut rhs = DVector::zeros(rows);
        for (r, (obs, w)) in problem.observations.iter().zip(&weights).enumerate() {
            let mut y = obs.value[d];
            if !obs.is_anchor() {
                if let Some(mean) = &problem.spec.noise_mean {
                    y -= mean[d];
                }
            }
            rhs[r] = w.sqrt() * y;
        }
        if let Some(p) = &problem.spec.penalty {
            rhs[rows - 1] = p.trade_off.sqrt() * p.state[d];
        }
        let c = svd.solve(&rhs, 0.0).map_err(|e| StfError::InvalidConfig(format!("SVD solve failed: {e}")))?;
        coeffs.push(c);
    }

    let params = FotParams::new(coeffs, problem.basis.clone(), t_ref, (problem.window.k1, problem.window.k2))?;
    let objective = weighted_objective(problem, &params)?;
    Ok(FitResult { params, objective, iterations: 0, converged: true, condition_warning: condition > CONDITION_LIMIT })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::{Penalty, ResidualSpec};
    use crate::trajectory::BasisSpec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn points(pts: &[(f64, f64)]) -> Vec<Observation> {
        pts.iter().map(|&(t, y)| Observation::scalar(t, 0, y)).collect()
    }

    fn fit(obs: Vec<Observation>, m: usize) -> Result<FitResult> {
        linear_ls_fit(&FitProblem::new(obs, ResidualSpec::identity(1), BasisSpec::monomial(m))?)
    }

    /// Intercept and slope at t = 0.
    fn line_at_origin(r: &FitResult) -> (f64, f64) {
        let p = r.params.recentered(0.0);
        (p.coeffs[0][0], p.coeffs[0][1])
    }

    #[test]
    fn collinear_points_exact() {
        let r = fit(points(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]), 2).unwrap();
        let (a, b) = line_at_origin(&r);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
        assert!(r.objective < 1e-24);
    }

    #[test]
    fn normal_equation_solution() {
        // Hand-solved normal equations: [3 3; 3 5][a b]' = [2 3]' -> a = 1/6, b = 1/2.
        let r = fit(points(&[(0.0, 0.0), (1.0, 1.0), (2.0, 1.0)]), 2).unwrap();
        let (a, b) = line_at_origin(&r);
        assert!((a - 1.0 / 6.0).abs() < 1e-12, "{a}");
        assert!((b - 0.5).abs() < 1e-12, "{b}");
    }

    #[test]
    fn dominant_weight_wins() {
        let obs = vec![
            Observation::scalar(0.0, 0, 1.0),
            Observation::scalar(1.0, 0, 7.0).with_weight(1e9),
            Observation::scalar(2.0, 0, -3.0),
        ];
        let r = fit(obs, 1).unwrap();
        assert!((r.params.coeffs[0][0] - 7.0).abs() < 1e-6);
    }

    #[test]
    fn evaluates_line_far_out() {
        let obs: Vec<_> = (0..10).map(|i| Observation::scalar(i as f64, 0, 1.0 + 2.0 * i as f64)).collect();
        let r = fit(obs, 2).unwrap();
        assert!((r.params.state_at(10.0)[0] - 21.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_distinct_times() {
        let obs = points(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]);
        assert_eq!(fit(obs, 2).unwrap_err(), StfError::RankDeficient { distinct: 1, required: 2 });
    }

    #[test]
    fn zero_weights_error() {
        let obs =
            vec![Observation::scalar(0.0, 0, 1.0).with_weight(0.0), Observation::scalar(1.0, 0, 1.0).with_weight(0.0)];
        assert_eq!(fit(obs, 2).unwrap_err(), StfError::ZeroWeights);
    }

    #[test]
    fn interpolates_m_points() {
        let obs = points(&[(0.3, 2.0), (1.1, -1.0), (2.0, 4.0), (3.7, 0.5)]);
        let r = fit(obs.clone(), 4).unwrap();
        for o in &obs {
            assert!((r.params.state_at(o.time)[0] - o.value[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn large_absolute_times_stay_conditioned() {
        let obs: Vec<_> = (0..5)
            .map(|i| {
                let t = 1e5 + i as f64;
                Observation::scalar(t, 0, 3.0 - 0.5 * (t - 1e5) + 0.1 * (t - 1e5).powi(2))
            })
            .collect();
        let r = fit(obs, 3).unwrap();
        assert!(!r.condition_warning);
        assert!(r.objective < 1e-18);
    }

    #[test]
    fn penalty_zero_matches_plain_fit() {
        let obs = points(&[(0.0, 0.0), (1.0, 1.0), (2.0, 1.0)]);
        let plain = fit(obs.clone(), 2).unwrap();
        let spec = ResidualSpec::identity(1).with_penalty(Penalty {
            time: 5.0,
            state: DVector::from_element(1, 100.0),
            trade_off: 0.0,
        });
        let pen = linear_ls_fit(&FitProblem::new(obs, spec, BasisSpec::monomial(2)).unwrap()).unwrap();
        assert_eq!(plain.params.flatten(), pen.params.flatten());
        assert_eq!(plain.objective, pen.objective);
    }

    #[test]
    fn strong_penalty_pins_anchor() {
        let obs = points(&[(0.0, 0.0), (1.0, 1.0), (2.0, 1.0)]);
        let spec = ResidualSpec::identity(1).with_penalty(Penalty {
            time: 0.0,
            state: DVector::from_element(1, -2.0),
            trade_off: 1e8,
        });
        let r = linear_ls_fit(&FitProblem::new(obs, spec, BasisSpec::monomial(2)).unwrap()).unwrap();
        assert!((r.params.state_at(0.0)[0] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn global_minimum_against_perturbations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let obs: Vec<_> = (0..12)
            .map(|i| {
                let t = i as f64 * 0.1;
                Observation::new(
                    t,
                    0,
                    DVector::from_vec(vec![t.sin() + rng.gen_range(-0.3..0.3), rng.gen_range(-1.0..1.0)]),
                )
                .with_weight(rng.gen_range(0.1..2.0))
            })
            .collect();
        let problem =
            FitProblem::new(obs, ResidualSpec::identity(2).with_fading(0.8, 0.1), BasisSpec::monomial(3)).unwrap();
        let best = linear_ls_fit(&problem).unwrap();
        let flat = best.params.flatten();
        for _ in 0..1000 {
            let perturbed = flat.map(|c| c + rng.gen_range(-0.1..0.1));
            let other = weighted_objective(&problem, &best.params.with_flat(&perturbed)).unwrap();
            assert!(best.objective <= other + 1e-15);
        }
    }

    proptest! {
        #[test]
        fn unit_weights_scale_to_mean(ys in proptest::collection::vec(-5.0f64..5.0, 3..15)) {
            let obs: Vec<_> = ys.iter().enumerate().map(|(i, y)| Observation::scalar(i as f64, 0, *y)).collect();
            let problem = FitProblem::new(obs.clone(), ResidualSpec::identity(1), BasisSpec::monomial(2)).unwrap();
            let r = linear_ls_fit(&problem).unwrap();
            let sum: f64 = obs.iter().map(|o| crate::fitting::residual_l2(&r.params, o, &problem.spec).unwrap()).sum();
            prop_assert!((r.objective - sum / obs.len() as f64).abs() < 1e-12);
        }
    }
}
