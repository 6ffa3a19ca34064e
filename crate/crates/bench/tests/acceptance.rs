//! Acceptance criteria, one PASS/FAIL line each. Runs without the test
//! harness so the lines always reach the output; exits nonzero on failure.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stf_baselines::{
    ekf_step, kf_step, rts_smooth, ukf_step, Dynamics, ForwardPass, GaussianBelief, Likelihood, LinearGaussianModel,
    Measurement, SigmaParams,
};
use stf_bench::{emit_report, run_campaign, CampaignConfig, CampaignReport, Format};
use stf_core::fitting::{linear_ls_fit, nonlinear_ls_fit, recursive_ls_update, RlsState};
use stf_core::{
    smoothed_pass, BasisSpec, FitProblem, Observation, ObservationModel, QueryMode, ResidualSpec, StfConfig, Tracker,
};
use stf_scenarios::ballistic::{propagate, BallisticConfig};
use stf_scenarios::bearings::{self, Bearings, BearingsConfig, CoordinatedTurn};

/// Outcome of one criterion: named checks, each passing or not.
struct Verdict {
    checks: Vec<(String, bool)>,
    notes: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { checks: Vec::new(), notes: Vec::new() }
    }

    /// Reported but not asserted.
    fn note(&mut self, text: String) {
        self.notes.push(text);
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.checks.push((label.into(), ok));
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

fn campaign(config: CampaignConfig) -> CampaignReport {
    run_campaign(&config).unwrap_or_else(|e| panic!("campaign failed: {e}"))
}

fn within(value: f64, target: f64, tolerance: f64) -> bool {
    (value - target).abs() <= tolerance * target
}

fn criterion_1() -> Verdict {
    let mut v = Verdict::new();
    let start = Instant::now();
    let r = campaign(CampaignConfig::new(1));
    let elapsed = start.elapsed().as_secs_f64();
    let m = |n: &str| r.mean(n);
    let (online, delayed, smoothed) = (m("fit-online"), m("fit-delayed"), m("fit-smoothed"));
    v.check(format!("delayed {delayed:.4} < online {online:.4}"), delayed < online);
    v.check(format!("smoothed {smoothed:.4} <= 1.1 x delayed"), smoothed <= 1.1 * delayed);
    v.check(format!("KS(WPV) {:.4} < KF(WPV) {:.4}", m("ks-wpv"), m("kf-wpv")), m("ks-wpv") < m("kf-wpv"));
    v.check(format!("IMM smoother {:.4} < IMM {:.4}", m("imm-smoother"), m("imm")), m("imm-smoother") < m("imm"));
    v.check(format!("fit forecast {:.4} > fit online", m("fit-forecast")), m("fit-forecast") > online);
    v.check(format!("IMM forecast {:.4} > IMM", m("imm-forecast")), m("imm-forecast") > m("imm"));
    v.check(format!("online {online:.4} within 25% of 0.2654"), within(online, 0.2654, 0.25));
    v.check(format!("delayed {delayed:.4} within 25% of 0.1442"), within(delayed, 0.1442, 0.25));
    v.check(format!("runtime {elapsed:.1} s < 180 s"), elapsed < 180.0);
    v
}

fn criterion_2() -> Verdict {
    let mut v = Verdict::new();
    let r = campaign(CampaignConfig::new(2));
    let m = |n: &str| r.mean(n);
    let online = m("fit-online");
    let single = m("ekf").min(m("ukf"));
    let imm = m("ekf-imm").max(m("ukf-imm"));
    v.check(
        format!(
            "IMM filters {:.4}/{:.4} < online {online:.4} < EKF/UKF {:.4}/{:.4}",
            m("ekf-imm"),
            m("ukf-imm"),
            m("ekf"),
            m("ukf")
        ),
        imm < online && online < single,
    );
    v.note(format!("online {online:.4}, {:+.1}% from 0.3029", 100.0 * (online - 0.3029) / 0.3029));

    let mut mismatched = CampaignConfig::new(2);
    mismatched.bearings.noise_variance = 0.0025;
    mismatched.bearings.assumed_noise_variance = Some(0.01);
    let r = campaign(mismatched);
    let m = |n: &str| r.mean(n);
    v.check(
        format!("mismatched: online {:.4} < EKF-IMM {:.4}", m("fit-online"), m("ekf-imm")),
        m("fit-online") < m("ekf-imm"),
    );
    let smoother = m("ekf-imm-smoother");
    v.check(
        format!(
            "mismatched: delayed {:.4} / smoothed {:.4} < EKF-IMM smoother {smoother:.4}",
            m("fit-delayed"),
            m("fit-smoothed")
        ),
        m("fit-delayed") < smoother && m("fit-smoothed") < smoother,
    );
    v
}

fn criterion_3() -> Verdict {
    let mut v = Verdict::new();
    let r = campaign(CampaignConfig::new(3));
    let m = |n: &str| r.mean(n);
    let fit = m("fit-online");
    v.check(format!("R=1e4: fit {fit:.1} < EKF {:.1}", m("ekf")), fit < m("ekf"));
    v.check(format!("R=1e4: fit {fit:.1} < UKF {:.1}", m("ukf")), fit < m("ukf"));
    v.check(format!("R=1e4: PF {:.1} worst among filters", m("pf")), m("pf") > m("ekf") && m("pf") > m("ukf"));
    v.check(format!("R=1e4: fit {fit:.1} within 40% of 212"), within(fit, 212.0, 0.4));

    let mut noisy = CampaignConfig::new(3);
    noisy.ballistic.noise_variance = 1e5;
    let r = campaign(noisy);
    let m = |n: &str| r.mean(n);
    let filters = m("ekf").min(m("ukf"));
    for name in ["o2-biased", "o2-unbiased", "fit-online"] {
        v.check(
            format!("R=1e5: {name} {:.1} < EKF {:.1} and UKF {:.1}", m(name), m("ekf"), m("ukf")),
            m(name) < filters,
        );
    }
    v.check(format!("R=1e5: fit {:.1} within 40% of 613", m("fit-online")), within(m("fit-online"), 613.0, 0.4));
    v
}

fn polynomial_truth(t: f64) -> DVector<f64> {
    DVector::from_vec(vec![1.0 - 0.5 * t + 0.25 * t * t, -2.0 + 3.0 * t - 0.1 * t * t])
}

fn stf_modes_exact() -> bool {
    let config = StfConfig { order: 3, ..StfConfig::default() };
    let mut tracker = Tracker::new(config, ResidualSpec::identity(2)).unwrap();
    let mut delayed = Vec::new();
    let mut worst: f64 = 0.0;
    for k in 1..=60 {
        let t = k as f64 * 0.1;
        tracker.push_observation(Observation::new(t, 0, polynomial_truth(t))).unwrap();
        if tracker.current_fit().is_none() {
            continue;
        }
        for mode in [QueryMode::Delayed, QueryMode::Online, QueryMode::Forecast] {
            let out = tracker.infer_at(mode, None).unwrap();
            worst = worst.max((&out.estimate - polynomial_truth(out.query_time)).amax());
        }
        let d = tracker.infer_at(QueryMode::Delayed, None).unwrap();
        delayed.push((d.query_time, d.estimate));
    }
    for ((t, _), s) in delayed.iter().zip(&smoothed_pass(&delayed, &config).unwrap()) {
        worst = worst.max((s - polynomial_truth(*t)).amax());
    }
    worst < 1e-8
}

fn recursive_matches_batch() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..20).all(|_| {
        let m = rng.gen_range(1..=4);
        let n = rng.gen_range(m + 1..=50);
        let times: Vec<f64> = (0..n).map(|i| i as f64 * 0.1 + rng.gen_range(0.0..0.05)).collect();
        let ys: Vec<f64> = times.iter().map(|_| rng.gen_range(-3.0..3.0)).collect();
        let obs = times.iter().zip(&ys).map(|(t, y)| Observation::scalar(*t, 0, *y)).collect();
        let problem = FitProblem::new(obs, ResidualSpec::identity(1), BasisSpec::monomial(m)).unwrap();
        let batch = linear_ls_fit(&problem).unwrap();
        let basis = BasisSpec::monomial(m);
        let xs: Vec<DVector<f64>> = times.iter().map(|t| basis.basis_vector(*t, problem.t_ref())).collect();
        let prime = m + (n - m) / 2;
        let mut state = RlsState::from_batch(&xs[..prime], &ys[..prime]).unwrap();
        for (x, y) in xs.iter().zip(&ys).skip(prime) {
            state = recursive_ls_update(&state, x, *y, 1.0).unwrap().state;
        }
        (&state.estimate - &batch.params.coeffs[0]).amax() < 1e-8
    })
}

fn filters_agree_on_linear_models() -> bool {
    let model = LinearGaussianModel::wpa(2, 0.5, 0.1, 0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut kf = GaussianBelief::from_diagonal(&[0.0; 6], &[1.0; 6]);
    let (mut ekf, mut ukf) = (kf.clone(), kf.clone());
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let y = DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0));
        kf = kf_step(&kf, &model, &y).unwrap();
        ekf = ekf_step(&ekf, &model, &model, &y).unwrap().filtered;
        ukf = ukf_step(&ukf, &model, &model, &y, &SigmaParams::default()).unwrap().filtered;
        worst = worst.max((&ekf.mean - &kf.mean).amax()).max((&ukf.mean - &kf.mean).amax());
    }
    worst <= 1e-9
}

/// Final smoothed step equals the filtered one; smoothing never grows the trace.
fn rts_properties() -> (bool, bool) {
    let model = LinearGaussianModel::wpv(2, 0.3, 0.1, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut b = GaussianBelief::from_diagonal(&[0.0; 4], &[1.0; 4]);
    let mut pass = ForwardPass::default();
    for k in 0..80 {
        let t = k as f64 * 0.1;
        let y = DVector::from_vec(vec![t.sin() + rng.gen_range(-0.3..0.3), t + rng.gen_range(-0.3..0.3)]);
        let rec = ekf_step(&b, &model, &model, &y).unwrap();
        pass.push(&rec);
        b = rec.filtered;
    }
    let smoothed = rts_smooth(&pass, &model).unwrap();
    let last = smoothed.last() == pass.filtered.last();
    let traces = smoothed.iter().zip(&pass.filtered).all(|(s, f)| s.cov.trace() <= f.cov.trace() + 1e-12);
    (last, traces)
}

fn rk4_ratio() -> f64 {
    let c = BallisticConfig::default();
    let x0 = DVector::from_column_slice(&c.initial_state);
    let reference = propagate(&x0, 30.0, 4096, c.gamma);
    let err = |n: usize| (propagate(&x0, 30.0, n, c.gamma) - &reference)[0].abs();
    err(4) / err(8)
}

/// Central differences with a step of 1e-4 of each coordinate, large enough
/// that rounding stays small where states span many orders of magnitude.
fn numeric_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    let rows = f(x).len();
    let mut j = DMatrix::zeros(rows, x.len());
    for i in 0..x.len() {
        let h = 1e-4 * x[i].abs().max(1e-3);
        let (mut up, mut down) = (x.clone(), x.clone());
        up[i] += h;
        down[i] -= h;
        j.set_column(i, &((f(&up) - f(&down)) / (2.0 * h)));
    }
    j
}

fn relative_gap(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>) -> f64 {
    analytic.zip_map(numeric, |a, n| (a - n).abs() / n.abs().max(1e-6)).max()
}

fn jacobians_match() -> bool {
    let mut worst: f64 = 0.0;
    let ct = CoordinatedTurn { dt: 0.1, q_turn: 0.15 };
    for w in [0.0, 0.3, -1.2] {
        let x = DVector::from_vec(vec![1.0, -2.0, 0.7, -0.4, w]);
        worst = worst.max(relative_gap(&ct.jacobian(&x), &numeric_jacobian(|v| ct.propagate(v), &x)));
    }
    let cfg = BearingsConfig::default();
    let bearing = Bearings::new(cfg.sensors.clone(), 0.01, 5);
    let x = DVector::from_vec(vec![2.0, 1.0, 1.0, 0.0, 0.0]);
    let analytic = Measurement::jacobian(&bearing, &x).unwrap();
    worst = worst.max(relative_gap(&analytic, &numeric_jacobian(|v| Measurement::predict(&bearing, v).unwrap(), &x)));
    let bc = BallisticConfig::default();
    let dynamics = bc.dynamics();
    let x = DVector::from_column_slice(&bc.initial_state);
    worst = worst.max(relative_gap(&dynamics.jacobian(&x), &numeric_jacobian(|v| dynamics.propagate(v), &x)));
    let range = bc.range_model(3);
    let x = DVector::from_vec(vec![2e5, 1.5e4, 1e-3]);
    let analytic = Measurement::jacobian(&range, &x).unwrap();
    worst = worst.max(relative_gap(&analytic, &numeric_jacobian(|v| Measurement::predict(&range, v).unwrap(), &x)));
    worst <= 1e-4
}

fn grid_search_agrees() -> bool {
    let cfg = BearingsConfig::default();
    let model = Bearings::new(cfg.sensors.clone(), 0.01, 2);
    let cost = |obs: &[Observation], x: f64, y: f64| -> f64 {
        let p = DVector::from_vec(vec![x, y]);
        obs.iter()
            .map(|o| match ObservationModel::predict(&model, &p, o.sensor_id, o.time) {
                Ok(pred) => ObservationModel::innovation(&model, &o.value, &pred).norm_squared(),
                Err(_) => f64::INFINITY,
            })
            .sum()
    };
    let grid = |obs: &[Observation], cx: f64, cy: f64, half: f64, step: f64| {
        let n = (2.0 * half / step).round() as i64;
        let mut best = (f64::INFINITY, cx, cy);
        for i in 0..=n {
            for j in 0..=n {
                let (x, y) = (cx - half + i as f64 * step, cy - half + j as f64 * step);
                let c = cost(obs, x, y);
                if c < best.0 {
                    best = (c, x, y);
                }
            }
        }
        (best.1, best.2)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    (0..5).all(|_| {
        let truth = DVector::from_vec(vec![rng.gen_range(0.0..6.5), rng.gen_range(-3.0..3.0), 0.0, 0.0, 0.0]);
        let mut obs = Vec::new();
        for k in 1..=5 {
            for (i, b) in bearings::observe(&cfg, &truth, &mut rng).iter().enumerate() {
                obs.push(Observation::scalar(k as f64 * 0.1, i as u32, *b));
            }
        }
        let spec = ResidualSpec::new(Arc::new(model.clone()));
        let fit = nonlinear_ls_fit(&FitProblem::new(obs.clone(), spec, BasisSpec::monomial(1)).unwrap()).unwrap();
        let est = fit.params.state_at(0.3);
        let (cx, cy) = grid(&obs, 0.0, 0.0, 10.0, 0.1);
        let (gx, gy) = grid(&obs, cx, cy, 0.2, 1e-3);
        (est[0] - gx).abs() <= 1e-3 && (est[1] - gy).abs() <= 1e-3
    })
}

fn criterion_4() -> Verdict {
    let mut v = Verdict::new();
    v.check("noiseless in-class truth: every STF mode exact to 1e-8", stf_modes_exact());
    v.check("recursive LS equals batch LS to 1e-8 on 20 instances", recursive_matches_batch());
    v.check("UKF = EKF = KF on a linear model to 1e-9 over 100 steps", filters_agree_on_linear_models());
    let (last, traces) = rts_properties();
    v.check("RTS final step equals the filtered step", last);
    v.check("smoothed covariance trace <= filtered at every step", traces);
    let ratio = rk4_ratio();
    v.check(format!("RK4 error ratio on step halving {ratio:.2} in [12, 20]"), (12.0..=20.0).contains(&ratio));
    v.check("analytic Jacobians within 1e-4 relative of finite differences", jacobians_match());
    v.check("bearing fits match a 1e-3 grid search", grid_search_agrees());
    let (weights, degenerate) = Likelihood::HeavyTail.weights(&[0.0; 4]);
    v.check("heavy-tail likelihood with zero spread gives uniform weights", degenerate && weights == vec![0.25; 4]);
    v
}

fn report_bytes(report: &CampaignReport, dir: &std::path::Path) -> Vec<u8> {
    let json = dir.join("report.json");
    let csv = dir.join("summary.csv");
    emit_report(report, Format::Json, &json).unwrap();
    emit_report(report, Format::Csv, &csv).unwrap();
    let mut bytes = std::fs::read(&json).unwrap();
    bytes.extend(std::fs::read(&csv).unwrap());
    bytes.extend(std::fs::read(dir.join("steps.csv")).unwrap());
    bytes
}

fn criterion_5() -> Verdict {
    let mut v = Verdict::new();
    let dir = tempfile::tempdir().unwrap();
    for scenario in [1, 2, 3] {
        let outputs: Vec<Vec<u8>> = [1, 3, 8]
            .iter()
            .map(|threads| {
                let mut config = CampaignConfig::new(scenario);
                config.runs = 12;
                config.seed = 99;
                config.threads = Some(*threads);
                report_bytes(&campaign(config), dir.path())
            })
            .collect();
        v.check(
            format!("scenario {scenario}: reports byte-identical with 1, 3 and 8 threads"),
            outputs.windows(2).all(|w| w[0] == w[1]),
        );
    }
    v
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 5] = [
        ("1 linear scenario orderings, absolute values and runtime", criterion_1),
        ("2 bearings-only orderings", criterion_2),
        ("3 ballistic orderings and absolute values", criterion_3),
        ("4 property suite", criterion_4),
        ("5 determinism across thread counts", criterion_5),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let verdict = run();
        let status = if verdict.passed() { "PASS" } else { "FAIL" };
        println!("criterion {name}: {status}");
        for (label, ok) in &verdict.checks {
            println!("    [{}] {label}", if *ok { "ok" } else { "x " });
        }
        for note in &verdict.notes {
            println!("    [reported] {note}");
        }
        if !verdict.passed() {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
