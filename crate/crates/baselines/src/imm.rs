use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::belief::{combine, symmetrize, GaussianBelief};
use crate::error::{BaselineError, Result};
use crate::kalman::{ekf_predict, ekf_step, ekf_update, smoother_gain, StepRecord};
use crate::models::{Dynamics, Measurement};
use crate::ukf::{ukf_predict, ukf_step, ukf_update, SigmaParams};

/// How a bank member runs its own filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    Extended,
    Unscented(SigmaParams),
}

#[derive(Clone)]
pub struct ImmModel {
    pub dynamics: Arc<dyn Dynamics>,
    pub measurement: Arc<dyn Measurement>,
    pub filter: FilterKind,
    /// Backward-time dynamics; enables the two-filter smoother.
    pub reverse: Option<Arc<dyn Dynamics>>,
}

impl ImmModel {
    pub fn new(dynamics: Arc<dyn Dynamics>, measurement: Arc<dyn Measurement>, filter: FilterKind) -> Self {
        Self { dynamics, measurement, filter, reverse: None }
    }

    pub fn with_reverse(mut self, reverse: Arc<dyn Dynamics>) -> Self {
        self.reverse = Some(reverse);
        self
    }

    fn predict_through(&self, belief: &GaussianBelief, dynamics: &dyn Dynamics) -> Result<GaussianBelief> {
        match &self.filter {
            FilterKind::Extended => Ok(ekf_predict(belief, dynamics)),
            FilterKind::Unscented(p) => Ok(ukf_predict(belief, dynamics, p)?.0),
        }
    }

    fn update(&self, predicted: &GaussianBelief, y: &DVector<f64>) -> Result<(GaussianBelief, f64)> {
        match &self.filter {
            FilterKind::Extended => ekf_update(predicted, &*self.measurement, y),
            FilterKind::Unscented(p) => ukf_update(predicted, &*self.measurement, y, p),
        }
    }

    fn step(&self, belief: &GaussianBelief, y: &DVector<f64>) -> Result<StepRecord> {
        match &self.filter {
            FilterKind::Extended => ekf_step(belief, &*self.dynamics, &*self.measurement, y),
            FilterKind::Unscented(p) => ukf_step(belief, &*self.dynamics, &*self.measurement, y, p),
        }
    }

    /// Prediction and the cross covariance between the input and the prediction.
    fn predict_with_cross(&self, belief: &GaussianBelief) -> Result<(GaussianBelief, DMatrix<f64>)> {
        match &self.filter {
            FilterKind::Extended => {
                let f = self.dynamics.jacobian(&belief.mean);
                Ok((ekf_predict(belief, &*self.dynamics), &belief.cov * f.transpose()))
            }
            FilterKind::Unscented(p) => ukf_predict(belief, &*self.dynamics, p),
        }
    }
}

/// Models, Markov mode transition matrix (`transition[(i, j)]` is the
/// probability of switching from mode i to mode j) and mode probabilities.
#[derive(Clone)]
pub struct ImmBank {
    pub models: Vec<ImmModel>,
    pub transition: DMatrix<f64>,
    pub probabilities: DVector<f64>,
}

impl ImmBank {
    pub fn new(models: Vec<ImmModel>, transition: DMatrix<f64>, probabilities: DVector<f64>) -> Result<Self> {
        let r = models.len();
        if r == 0 {
            return Err(BaselineError::Invalid("IMM bank needs at least one model".into()));
        }
        if transition.shape() != (r, r) || probabilities.len() != r {
            return Err(BaselineError::DimensionMismatch { expected: r, got: probabilities.len() });
        }
        for row in transition.row_iter() {
            if row.iter().any(|v| *v < 0.0) || (row.sum() - 1.0).abs() > 1e-9 {
                return Err(BaselineError::Invalid("transition rows must be distributions".into()));
            }
        }
        if probabilities.iter().any(|v| *v < 0.0) || (probabilities.sum() - 1.0).abs() > 1e-9 {
            return Err(BaselineError::Invalid("mode probabilities must sum to one".into()));
        }
        Ok(Self { models, transition, probabilities })
    }

    /// Mode probabilities one step ahead, `Tr^T mu`.
    pub fn predicted_probabilities(&self) -> DVector<f64> {
        self.transition.transpose() * &self.probabilities
    }

    /// Mixed initial conditions for each model.
    pub fn mix(&self, beliefs: &[GaussianBelief]) -> Vec<GaussianBelief> {
        let r = self.models.len();
        if r == 1 {
            return beliefs.to_vec();
        }
        let c = self.predicted_probabilities();
        (0..r)
            .map(|j| {
                let weights: Vec<f64> = (0..r)
                    .map(|i| {
                        if c[j] > 0.0 {
                            self.transition[(i, j)] * self.probabilities[i] / c[j]
                        } else {
                            f64::from(i == j)
                        }
                    })
                    .collect();
                combine(beliefs, &weights)
            })
            .collect()
    }
}

/// Posterior mode probabilities from the predicted ones and per-model
/// log-likelihoods. Falls back to uniform when every likelihood vanishes;
/// the flag reports the fallback.
pub fn update_mode_probabilities(predicted: &DVector<f64>, log_likelihoods: &[f64]) -> (DVector<f64>, bool) {
    let r = predicted.len();
    let max = log_likelihoods.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_finite() {
        let unnorm = DVector::from_fn(r, |j, _| predicted[j] * (log_likelihoods[j] - max).exp());
        let total = unnorm.sum();
        if total > 0.0 && total.is_finite() {
            return (unnorm / total, false);
        }
    }
    (DVector::from_element(r, 1.0 / r as f64), true)
}

/// Everything the IMM smoother needs from one forward step.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmRecord {
    pub filtered: Vec<GaussianBelief>,
    pub probabilities: DVector<f64>,
    pub combined: GaussianBelief,
    pub fallback: bool,
    pub measurement: DVector<f64>,
}

#[derive(Clone)]
pub struct ImmStep {
    pub bank: ImmBank,
    pub beliefs: Vec<GaussianBelief>,
    pub combined: GaussianBelief,
    pub fallback: bool,
}

/// Mix, filter each model, update the mode probabilities and combine.
pub fn imm_step(bank: &ImmBank, beliefs: &[GaussianBelief], y: &DVector<f64>) -> Result<ImmStep> {
    let mixed = bank.mix(beliefs);
    let predicted = bank.predicted_probabilities();
    let mut filtered = Vec::with_capacity(mixed.len());
    let mut log_liks = Vec::with_capacity(mixed.len());
    for (model, b) in bank.models.iter().zip(&mixed) {
        let rec = model.step(b, y)?;
        filtered.push(rec.filtered);
        log_liks.push(rec.log_likelihood);
    }
    let (probabilities, fallback) =
        if bank.models.len() == 1 { (predicted, false) } else { update_mode_probabilities(&predicted, &log_liks) };
    let combined = if filtered.len() == 1 { filtered[0].clone() } else { combine(&filtered, probabilities.as_slice()) };
    let mut next = bank.clone();
    next.probabilities = probabilities;
    Ok(ImmStep { bank: next, beliefs: filtered, combined, fallback })
}

/// Repeated mix and predict without measurement updates.
pub fn imm_forecast(bank: &ImmBank, beliefs: &[GaussianBelief], n_steps: usize) -> Result<GaussianBelief> {
    if n_steps == 0 {
        return Err(BaselineError::Invalid("forecast needs at least one step".into()));
    }
    let mut bank = bank.clone();
    let mut current = beliefs.to_vec();
    for _ in 0..n_steps {
        let mixed = bank.mix(&current);
        current = bank
            .models
            .iter()
            .zip(&mixed)
            .map(|(m, b)| m.predict_with_cross(b).map(|(p, _)| p))
            .collect::<Result<_>>()?;
        bank.probabilities = bank.predicted_probabilities();
    }
    if current.len() == 1 {
        return Ok(current.remove(0));
    }
    Ok(combine(&current, bank.probabilities.as_slice()))
}

/// Running IMM filter that keeps the records for smoothing.
#[derive(Clone)]
pub struct ImmFilter {
    pub bank: ImmBank,
    pub beliefs: Vec<GaussianBelief>,
    pub records: Vec<ImmRecord>,
    pub prior: GaussianBelief,
}

impl ImmFilter {
    /// Every model starts from the same prior.
    pub fn new(bank: ImmBank, prior: GaussianBelief) -> Self {
        let beliefs = vec![prior.clone(); bank.models.len()];
        Self { bank, beliefs, records: Vec::new(), prior }
    }

    pub fn step(&mut self, y: &DVector<f64>) -> Result<&GaussianBelief> {
        let out = imm_step(&self.bank, &self.beliefs, y)?;
        self.records.push(ImmRecord {
            filtered: out.beliefs.clone(),
            probabilities: out.bank.probabilities.clone(),
            combined: out.combined,
            fallback: out.fallback,
            measurement: y.clone(),
        });
        self.bank = out.bank;
        self.beliefs = out.beliefs;
        Ok(&self.records.last().expect("just pushed").combined)
    }

    pub fn forecast(&self, n_steps: usize) -> Result<GaussianBelief> {
        imm_forecast(&self.bank, &self.beliefs, n_steps)
    }

    /// Two-filter smoothing when every model has backward dynamics,
    /// otherwise the single-pass backward smoother. The backward filter
    /// starts from the prior covariance.
    pub fn smooth(&self) -> Result<Vec<GaussianBelief>> {
        if self.bank.models.len() > 1 && self.bank.models.iter().all(|m| m.reverse.is_some()) {
            imm_smooth_two_filter(&self.bank, &self.records, &self.prior.cov)
        } else {
            imm_smooth(&self.bank, &self.records)
        }
    }
}

/// Backward IMM smoother. Each model's forward prediction (from its mixed
/// prior) is corrected toward that model's smoothed successor; the
/// corrections reach every current mode through the backward transition
/// weights, which are merged with the smoothed mode probabilities.
pub fn imm_smooth(bank: &ImmBank, records: &[ImmRecord]) -> Result<Vec<GaussianBelief>> {
    let n = records.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let r = bank.models.len();
    let tr = &bank.transition;
    let mut out = vec![records[n - 1].combined.clone(); n];
    let mut next_states = records[n - 1].filtered.clone();
    let mut next_mu = records[n - 1].probabilities.clone();

    for k in (0..n - 1).rev() {
        let rec = &records[k];
        let mu = &rec.probabilities;
        let c = tr.transpose() * mu;
        let ratio = DVector::from_fn(r, |i, _| if c[i] > 0.0 { next_mu[i] / c[i] } else { 0.0 });

        let mut smoothed_mu = DVector::from_fn(r, |j, _| mu[j] * (0..r).map(|i| tr[(j, i)] * ratio[i]).sum::<f64>());
        let total = smoothed_mu.sum();
        smoothed_mu = if total > 0.0 && total.is_finite() { smoothed_mu / total } else { mu.clone() };

        // Replays the forward mixing at k to recover each model's prediction.
        let mut at_k = bank.clone();
        at_k.probabilities = mu.clone();
        let mixed = if r == 1 { rec.filtered.clone() } else { at_k.mix(&rec.filtered) };
        let mut corrections = Vec::with_capacity(r);
        for i in 0..r {
            let (pred, cross) = bank.models[i].predict_with_cross(&mixed[i])?;
            let gain = smoother_gain(&cross, &pred.cov, k)?;
            let target = &next_states[i];
            let mean = &gain * (&target.mean - &pred.mean);
            let cov = &gain * (&target.cov - &pred.cov) * gain.transpose();
            corrections.push((mean, cov));
        }

        let mut states = Vec::with_capacity(r);
        for j in 0..r {
            let raw: Vec<f64> = (0..r).map(|i| tr[(j, i)] * ratio[i]).collect();
            let sum: f64 = raw.iter().sum();
            let weights: Vec<f64> = if sum > 0.0 && sum.is_finite() {
                raw.iter().map(|w| w / sum).collect()
            } else {
                (0..r).map(|i| f64::from(i == j)).collect()
            };
            let filt = &rec.filtered[j];
            let mut mean = filt.mean.clone();
            let mut cov = filt.cov.clone();
            for (w, (dm, dc)) in weights.iter().zip(&corrections) {
                mean += dm * *w;
                cov += dc * *w;
            }
            let mut merged = GaussianBelief { mean, cov: symmetrize(&cov) };
            merged.sanitize();
            states.push(merged);
        }
        out[k] = if r == 1 { states[0].clone() } else { combine(&states, smoothed_mu.as_slice()) };
        next_states = states;
        next_mu = smoothed_mu;
    }
    Ok(out)
}

/// Two-filter IMM smoother. A backward IMM runs the reversed dynamics from
/// the final filtered means with covariance `backward_cov`; at every step
/// each mode's forward and backward estimates are fused, and the mode
/// probabilities are reweighted by how well the two agree.
pub fn imm_smooth_two_filter(
    bank: &ImmBank,
    records: &[ImmRecord],
    backward_cov: &DMatrix<f64>,
) -> Result<Vec<GaussianBelief>> {
    let n = records.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let r = bank.models.len();
    let reverses = bank
        .models
        .iter()
        .map(|m| m.reverse.clone().ok_or_else(|| BaselineError::Invalid("model has no backward dynamics".into())))
        .collect::<Result<Vec<_>>>()?;
    let tr = &bank.transition;
    // Backward switching with a uniform mode prior: P(s_k = j | s_{k+1} = i).
    let back = DMatrix::from_fn(r, r, |i, j| {
        let col: f64 = tr.column(i).sum();
        if col > 0.0 {
            tr[(j, i)] / col
        } else {
            f64::from(i == j)
        }
    });

    let last = &records[n - 1];
    let mut out = vec![last.combined.clone(); n];
    let mut states = Vec::with_capacity(r);
    let mut log_liks = Vec::with_capacity(r);
    for (model, filt) in bank.models.iter().zip(&last.filtered) {
        let start = GaussianBelief { mean: filt.mean.clone(), cov: backward_cov.clone() };
        let (b, ll) = model.update(&start, &last.measurement)?;
        states.push(b);
        log_liks.push(ll);
    }
    let mut mu_back = update_mode_probabilities(&DVector::from_element(r, 1.0 / r as f64), &log_liks).0;

    for k in (0..n - 1).rev() {
        let rec = &records[k];
        let a = back.transpose() * &mu_back;
        let mut predicted = Vec::with_capacity(r);
        for j in 0..r {
            let weights: Vec<f64> =
                (0..r).map(|i| if a[j] > 0.0 { back[(i, j)] * mu_back[i] / a[j] } else { f64::from(i == j) }).collect();
            let mixed = if r == 1 { states[0].clone() } else { combine(&states, &weights) };
            predicted.push(bank.models[j].predict_through(&mixed, &*reverses[j])?);
        }

        let mut fused = Vec::with_capacity(r);
        let mut agreement = Vec::with_capacity(r);
        for j in 0..r {
            let (state, ll) = fuse(&rec.filtered[j], &predicted[j])?;
            fused.push(state);
            agreement.push(ll);
        }
        let prior = DVector::from_fn(r, |j, _| rec.probabilities[j] * a[j]);
        let total = prior.sum();
        let prior = if total > 0.0 && total.is_finite() { prior / total } else { rec.probabilities.clone() };
        let (mu_smooth, _) = update_mode_probabilities(&prior, &agreement);
        out[k] = combine(&fused, mu_smooth.as_slice());

        let mut log_liks = Vec::with_capacity(r);
        states.clear();
        for (model, p) in bank.models.iter().zip(&predicted) {
            let (b, ll) = model.update(p, &rec.measurement)?;
            states.push(b);
            log_liks.push(ll);
        }
        mu_back = update_mode_probabilities(&a, &log_liks).0;
    }
    Ok(out)
}

/// Fuses a forward estimate with an independent backward one and returns
/// the log-density of their difference.
fn fuse(forward: &GaussianBelief, backward: &GaussianBelief) -> Result<(GaussianBelief, f64)> {
    let s = symmetrize(&(&forward.cov + &backward.cov));
    let chol = s.cholesky().ok_or(BaselineError::SingularInnovation)?;
    let diff = &backward.mean - &forward.mean;
    let gain = chol.solve(&forward.cov).transpose();
    let mean = &forward.mean + &gain * &diff;
    let mut state = GaussianBelief { mean, cov: symmetrize(&(&forward.cov - &gain * &forward.cov)) };
    state.sanitize();
    Ok((state, crate::kalman::gaussian_log_likelihood(&diff, &chol)))
}
