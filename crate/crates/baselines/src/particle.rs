use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::belief::GaussianBelief;
use crate::error::{BaselineError, Result};

/// Below this the largest squared residual is treated as zero.
pub const DEGENERATE_RESIDUAL: f64 = 1e-12;

/// Particle weighting rule for a scalar measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Likelihood {
    /// `exp(-e_i^2 / max_j e_j^2)`, normalized by the worst residual.
    HeavyTail,
    Gaussian {
        variance: f64,
    },
}

impl Likelihood {
    /// Normalized weights for residuals `y - y_i`. Non-finite residuals
    /// (particles that left the valid state space) get zero weight. The flag
    /// is set when the heavy-tail normalizer degenerated and uniform weights
    /// were used.
    pub fn weights(&self, residuals: &[f64]) -> (Vec<f64>, bool) {
        let n = residuals.len();
        let finite = |e: &f64| e.is_finite();
        let raw: Vec<f64> = match self {
            Likelihood::HeavyTail => {
                let max = residuals.iter().filter(|e| finite(e)).map(|e| e * e).fold(0.0, f64::max);
                if !(max >= DEGENERATE_RESIDUAL && max.is_finite()) {
                    return (vec![1.0 / n as f64; n], true);
                }
                residuals.iter().map(|e| if finite(e) { (-(e * e) / max).exp() } else { 0.0 }).collect()
            }
            Likelihood::Gaussian { variance } => {
                let logs: Vec<f64> = residuals
                    .iter()
                    .map(|e| if finite(e) { -0.5 * e * e / variance } else { f64::NEG_INFINITY })
                    .collect();
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                logs.iter().map(|l| (l - top).exp()).collect()
            }
        };
        let total: f64 = raw.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return (vec![1.0 / n as f64; n], true);
        }
        (raw.iter().map(|w| w / total).collect(), false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
}

impl ParticleSet {
    pub fn uniform(particles: Vec<DVector<f64>>) -> Result<Self> {
        if particles.len() < 2 {
            return Err(BaselineError::Invalid("a particle set needs at least two particles".into()));
        }
        let w = 1.0 / particles.len() as f64;
        let weights = vec![w; particles.len()];
        Ok(Self { particles, weights })
    }

    /// Draws `n` particles from a Gaussian belief.
    pub fn sample<R: Rng + ?Sized>(belief: &GaussianBelief, n: usize, rng: &mut R) -> Result<Self> {
        Self::sample_where(belief, n, rng, |_| true)
    }

    /// Draws `n` particles from a Gaussian belief restricted to `accept`,
    /// by rejection. Fails when fewer than one draw in a thousand passes.
    pub fn sample_where<R: Rng + ?Sized>(
        belief: &GaussianBelief,
        n: usize,
        rng: &mut R,
        accept: impl Fn(&DVector<f64>) -> bool,
    ) -> Result<Self> {
        let mut b = belief.clone();
        b.sanitize();
        let eig = b.cov.clone().symmetric_eigen();
        let root = &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
        let mut particles = Vec::with_capacity(n);
        for _ in 0..n.saturating_mul(1000).max(1000) {
            if particles.len() == n {
                break;
            }
            let z = DVector::from_fn(b.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let p = &b.mean + &root * z;
            if accept(&p) {
                particles.push(p);
            }
        }
        if particles.len() < n {
            return Err(BaselineError::Invalid("the sampling constraint rejects almost every draw".into()));
        }
        Self::uniform(particles)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.particles[0].len());
        for (p, w) in self.particles.iter().zip(&self.weights).filter(|(_, w)| **w > 0.0) {
            m += p * *w;
        }
        m
    }

    /// Systematic resampling: one uniform offset, N evenly spaced pointers.
    pub fn resample_systematic<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let n = self.len();
        let step = 1.0 / n as f64;
        let u0: f64 = rng.gen::<f64>() * step;
        let mut out = Vec::with_capacity(n);
        let mut cumulative = self.weights[0];
        let mut i = 0;
        for k in 0..n {
            let u = u0 + k as f64 * step;
            while u > cumulative && i + 1 < n {
                i += 1;
                cumulative += self.weights[i];
            }
            out.push(self.particles[i].clone());
        }
        Self { particles: out, weights: vec![step; n] }
    }
}

/// Result of one particle filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct PfStep {
    /// Resampled, equally weighted particles for the next step.
    pub particles: ParticleSet,
    /// Weighted mean before resampling.
    pub estimate: DVector<f64>,
    pub degenerate: bool,
}

/// Propagate every particle, weight against scalar `y`, resample.
pub fn pf_step<R, P, O>(
    set: &ParticleSet,
    mut propagate: P,
    observe: O,
    y: f64,
    likelihood: Likelihood,
    rng: &mut R,
) -> PfStep
where
    R: Rng + ?Sized,
    P: FnMut(&DVector<f64>, &mut R) -> DVector<f64>,
    O: Fn(&DVector<f64>) -> f64,
{
    let particles: Vec<DVector<f64>> = set.particles.iter().map(|p| propagate(p, rng)).collect();
    let residuals: Vec<f64> = particles.iter().map(|p| y - observe(p)).collect();
    let (weights, degenerate) = likelihood.weights(&residuals);
    let weighted = ParticleSet { particles, weights };
    let estimate = weighted.mean();
    PfStep { particles: weighted.resample_systematic(rng), estimate, degenerate }
}
