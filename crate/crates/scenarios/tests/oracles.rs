use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use stf_baselines::kalman::ekf_update;
use stf_baselines::GaussianBelief;
use stf_core::fitting::nonlinear_ls_fit;
use stf_core::{BasisSpec, FitProblem, Observation, ObservationModel, QueryMode, ResidualSpec, StfConfig, Tracker};
use stf_scenarios::ballistic::{propagate, BallisticConfig};
use stf_scenarios::bearings::{self, Bearings, BearingsConfig};

#[test]
fn rk4_error_shrinks_sixteenfold_per_halving() {
    let c = BallisticConfig::default();
    let x0 = DVector::from_column_slice(&c.initial_state);
    let reference = propagate(&x0, 30.0, 4096, c.gamma);
    let err = |n: usize| (propagate(&x0, 30.0, n, c.gamma) - &reference)[0].abs();
    let ratio = err(4) / err(8);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

fn sum_of_squares(model: &Bearings, obs: &[Observation], x: f64, y: f64) -> f64 {
    let p = DVector::from_vec(vec![x, y]);
    obs.iter()
        .map(|o| match ObservationModel::predict(model, &p, o.sensor_id, o.time) {
            Ok(pred) => ObservationModel::innovation(model, &o.value, &pred).norm_squared(),
            // On top of a sensor the bearing is undefined.
            Err(_) => f64::INFINITY,
        })
        .sum()
}

/// Best grid point at spacing `step` within `[cx - half, cx + half]`.
fn grid_min(model: &Bearings, obs: &[Observation], cx: f64, cy: f64, half: f64, step: f64) -> (f64, f64) {
    let n = (2.0 * half / step).round() as i64;
    let mut best = (f64::INFINITY, cx, cy);
    for i in 0..=n {
        for j in 0..=n {
            let x = cx - half + i as f64 * step;
            let y = cy - half + j as f64 * step;
            let v = sum_of_squares(model, obs, x, y);
            if v < best.0 {
                best = (v, x, y);
            }
        }
    }
    (best.1, best.2)
}

/// A stationary target is a two-coefficient trajectory; compare the solver
/// to an exhaustive search at 1e-3 resolution over [-10, 10]^2.
#[test]
fn bearing_fit_matches_grid_search() {
    let cfg = BearingsConfig::default();
    let model = Bearings::new(cfg.sensors.clone(), 0.01, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..5 {
        let target = [rng.gen_range(0.0..6.5), rng.gen_range(-3.0..3.0)];
        let truth = DVector::from_vec(vec![target[0], target[1], 0.0, 0.0, 0.0]);
        let mut obs = Vec::new();
        for k in 1..=5 {
            let y = bearings::observe(&cfg, &truth, &mut rng);
            for (i, b) in y.iter().enumerate() {
                obs.push(Observation::scalar(k as f64 * 0.1, i as u32, *b));
            }
        }
        let problem =
            FitProblem::new(obs.clone(), ResidualSpec::new(Arc::new(model.clone())), BasisSpec::monomial(1)).unwrap();
        let fit = nonlinear_ls_fit(&problem).unwrap();
        let est = fit.params.state_at(0.3);

        let (cx, cy) = grid_min(&model, &obs, 0.0, 0.0, 10.0, 0.1);
        let (gx, gy) = grid_min(&model, &obs, cx, cy, 0.2, 1e-3);
        assert!((est[0] - gx).abs() <= 1e-3 && (est[1] - gy).abs() <= 1e-3, "{est} vs ({gx}, {gy})");
    }
}

fn bearing_tracker(cfg: &BearingsConfig) -> Tracker {
    let spec = ResidualSpec::new(Arc::new(Bearings::new(cfg.sensors.clone(), cfg.noise_variance, 2)));
    Tracker::new(StfConfig::default(), spec).unwrap()
}

fn push_bearings(tracker: &mut Tracker, t: f64, y: &DVector<f64>) {
    for (i, b) in y.iter().enumerate() {
        tracker.push_observation(Observation::scalar(t, i as u32, *b)).unwrap();
    }
}

#[test]
fn noiseless_bearings_recover_a_straight_leg() {
    let cfg = BearingsConfig { noise_variance: 0.0, ..Default::default() };
    let truth = bearings::simulate_truth(&cfg);
    let mut tracker = bearing_tracker(&cfg);
    tracker.seed_anchor(0.0, DVector::from_vec(vec![0.0, 0.0])).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for k in 1..=55 {
        let y = bearings::observe(&cfg, &truth[k], &mut rng);
        push_bearings(&mut tracker, cfg.time(k), &y);
        let est = tracker.infer_at(QueryMode::Online, None).unwrap().estimate;
        assert!((est[0] - truth[k][0]).abs() < 1e-6 && (est[1] - truth[k][1]).abs() < 1e-6, "k={k}: {est}");
    }
}

#[test]
fn warm_start_needs_fewer_iterations() {
    let cfg = BearingsConfig::default();
    let truth = bearings::simulate_truth(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut tracker = bearing_tracker(&cfg);
    let (mut warm, mut cold) = (0, 0);
    for k in 1..=200 {
        let y = bearings::observe(&cfg, &truth[k], &mut rng);
        push_bearings(&mut tracker, cfg.time(k), &y);
        if k < 3 {
            continue;
        }
        warm += tracker.last_result().unwrap().iterations;
        let problem = FitProblem::new(
            tracker.buffer().to_vec(),
            ResidualSpec::new(Arc::new(Bearings::new(cfg.sensors.clone(), 0.01, 2))),
            BasisSpec::monomial(2),
        )
        .unwrap();
        cold += nonlinear_ls_fit(&problem).unwrap().iterations;
    }
    assert!(warm < cold, "warm {warm} vs cold {cold}");
}

#[test]
fn noiseless_ranges_recover_an_in_class_altitude() {
    let c = BallisticConfig { noise_variance: 0.0, ..Default::default() };
    let altitude = |t: f64| 3e5 - 2e4 * t + 150.0 * t * t;
    let spec = ResidualSpec::new(Arc::new(c.range_model(1)));
    let mut tracker =
        Tracker::new(StfConfig { window_count: 5, order: 3, nominal_interval: 1.0, ..Default::default() }, spec)
            .unwrap();
    for k in 1..=8 {
        let t = k as f64;
        tracker.push_observation(Observation::scalar(t, 0, c.range_of(altitude(t)))).unwrap();
        if k >= 3 {
            let h = tracker.infer_at(QueryMode::Online, None).unwrap().estimate[0];
            assert!((h - altitude(t)).abs() < 1e-6 * altitude(t), "k={k}: {h}");
        }
    }
}

/// EKF correction with one small-noise bearing against a gridded posterior.
#[test]
fn ekf_bearing_update_within_three_sigma_of_grid_bayes() {
    let sensors = vec![[-0.5, 3.5], [7.0, -3.5]];
    let r = 1e-4;
    let model = Bearings::new(sensors.clone(), r, 2);
    let prior = GaussianBelief::new(
        DVector::from_vec(vec![2.0, 0.5]),
        DMatrix::from_row_slice(2, 2, &[0.05, 0.01, 0.01, 0.04]),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let truth = [2.1, 0.45];
    let y = DVector::from_fn(2, |i, _| {
        let s = sensors[i];
        (truth[1] - s[1]).atan2(truth[0] - s[0]) + r.sqrt() * rng.sample::<f64, _>(StandardNormal)
    });
    let (post, _) = ekf_update(&prior, &model, &y).unwrap();

    let inv = prior.cov.clone().try_inverse().unwrap();
    let n = 800;
    let half = 1.0;
    let (mut w_sum, mut mx, mut my) = (0.0, 0.0, 0.0);
    let mut logs = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x = prior.mean[0] - half + 2.0 * half * i as f64 / (n - 1) as f64;
            let yy = prior.mean[1] - half + 2.0 * half * j as f64 / (n - 1) as f64;
            let d = DVector::from_vec(vec![x - prior.mean[0], yy - prior.mean[1]]);
            let pred = stf_baselines::Measurement::predict(&model, &DVector::from_vec(vec![x, yy])).unwrap();
            let e = stf_baselines::Measurement::innovation(&model, &y, &pred);
            logs.push((x, yy, -0.5 * d.dot(&(&inv * &d)) - 0.5 * e.norm_squared() / r));
        }
    }
    let top = logs.iter().map(|l| l.2).fold(f64::NEG_INFINITY, f64::max);
    for (x, yy, l) in logs {
        let w = (l - top).exp();
        w_sum += w;
        mx += w * x;
        my += w * yy;
    }
    let (gx, gy) = (mx / w_sum, my / w_sum);
    assert!((post.mean[0] - gx).abs() < 3.0 * post.cov[(0, 0)].sqrt());
    assert!((post.mean[1] - gy).abs() < 3.0 * post.cov[(1, 1)].sqrt());
}
