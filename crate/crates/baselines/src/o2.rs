//! Observation-only inference: project each measurement straight into
//! state space without any motion model.

use rand::Rng;
use rand_distr::StandardNormal;

pub const DEFAULT_DEBIAS_SAMPLES: usize = 100;

/// Which side of the sensor altitude the target is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulation {
    pub altitude: f64,
    /// Set when the range was shorter than the horizontal offset.
    pub clamped: bool,
}

/// Altitude from a range `y` to a target directly above a point at
/// horizontal distance `m` from a sensor at altitude `h`.
pub fn o2_triangulate(y: f64, m: f64, h: f64, branch: Branch) -> Triangulation {
    let clamped = y < m;
    let leg = (y.max(m).powi(2) - m * m).sqrt();
    let altitude = match branch {
        Branch::Above => h + leg,
        Branch::Below => h - leg,
    };
    Triangulation { altitude, clamped }
}

/// Monte-Carlo debiasing of a nonlinear projection `g`: the bias is
/// estimated around the measured value and subtracted.
pub fn o2_debias<R: Rng + ?Sized>(g: impl Fn(f64) -> f64, y: f64, variance: f64, n_samples: usize, rng: &mut R) -> f64 {
    let base = g(y);
    if n_samples == 0 {
        return base;
    }
    let sd = variance.max(0.0).sqrt();
    let bias: f64 =
        (0..n_samples).map(|_| g(y + sd * rng.sample::<f64, _>(StandardNormal)) - base).sum::<f64>() / n_samples as f64;
    base - bias
}

/// Sequential altitude estimator for a falling target. Starts on the upper
/// branch and switches once to the lower branch when staying would break
/// the falling constraint or the lower branch explains the motion better.
#[derive(Debug, Clone)]
pub struct FallingTriangulator {
    pub m: f64,
    pub h: f64,
    pub branch: Branch,
    history: Vec<(f64, f64)>,
}

impl FallingTriangulator {
    pub fn new(m: f64, h: f64) -> Self {
        Self { m, h, branch: Branch::Above, history: Vec::new() }
    }

    /// Feeds the range at `time` (or a debiased leg via `project`) and
    /// returns the altitude estimate.
    pub fn push(&mut self, time: f64, y: f64, mut project: impl FnMut(f64, Branch) -> f64) -> f64 {
        if self.branch == Branch::Above {
            if let Some(&(t_prev, h_prev)) = self.history.last() {
                let above = project(y, Branch::Above);
                let below = project(y, Branch::Below);
                let dt = (time - t_prev).max(f64::EPSILON);
                let rises = above >= h_prev;
                let flip = rises
                    || match self.history.len() {
                        1 => false,
                        _ => {
                            let (t_pp, h_pp) = self.history[self.history.len() - 2];
                            let speed_prev = (h_pp - h_prev) / (t_prev - t_pp).max(f64::EPSILON);
                            let speed_above = (h_prev - above) / dt;
                            let speed_below = (h_prev - below) / dt;
                            (speed_below - speed_prev).abs() < (speed_above - speed_prev).abs()
                        }
                    };
                if flip {
                    self.branch = Branch::Below;
                }
            }
        }
        let est = project(y, self.branch);
        self.history.push((time, est));
        est
    }
}
