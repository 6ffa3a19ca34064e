use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use stf_baselines::imm::FilterKind;
use stf_baselines::{
    ekf_step, imm_step, ukf_step, GaussianBelief, ImmBank, ImmModel, LinearGaussianModel, SigmaParams,
};

fn is_psd(m: &DMatrix<f64>) -> bool {
    (m - m.transpose()).amax() <= 1e-12 && m.clone().symmetric_eigen().eigenvalues.min() >= -1e-10
}

proptest! {
    #[test]
    fn filter_covariances_stay_symmetric_psd(
        ys in proptest::collection::vec(-50.0f64..50.0, 1..40),
        q in 1e-4f64..5.0,
        r in 1e-4f64..5.0,
    ) {
        let model = LinearGaussianModel::wpa(1, q, 0.1, r);
        let mut e = GaussianBelief::from_diagonal(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]);
        let mut u = e.clone();
        for y in ys {
            let y = DVector::from_element(1, y);
            e = ekf_step(&e, &model, &model, &y).unwrap().filtered;
            u = ukf_step(&u, &model, &model, &y, &SigmaParams::default()).unwrap().filtered;
            prop_assert!(is_psd(&e.cov));
            prop_assert!(is_psd(&u.cov));
        }
    }

    #[test]
    fn mode_probabilities_stay_on_the_simplex(
        ys in proptest::collection::vec(-20.0f64..20.0, 1..30),
        stay in 0.5f64..0.999,
        p0 in 0.0f64..1.0,
    ) {
        let slow = Arc::new(LinearGaussianModel::wpv(1, 0.01, 0.1, 0.1));
        let fast = Arc::new(LinearGaussianModel::wpv(1, 10.0, 0.1, 0.1));
        let mut bank = ImmBank::new(
            vec![
                ImmModel::new(slow.clone(), slow, FilterKind::Extended),
                ImmModel::new(fast.clone(), fast, FilterKind::Extended),
            ],
            DMatrix::from_row_slice(2, 2, &[stay, 1.0 - stay, 1.0 - stay, stay]),
            DVector::from_vec(vec![p0, 1.0 - p0]),
        ).unwrap();
        let prior = GaussianBelief::from_diagonal(&[0.0, 0.0], &[1.0, 1.0]);
        let mut beliefs = vec![prior.clone(), prior];
        for y in ys {
            let out = imm_step(&bank, &beliefs, &DVector::from_element(1, y)).unwrap();
            let mu = &out.bank.probabilities;
            prop_assert!(mu.min() >= 0.0);
            prop_assert!((mu.sum() - 1.0).abs() < 1e-12);
            bank = out.bank;
            beliefs = out.beliefs;
        }
    }
}
