//! Parabolic comparison against a stationary solution.
//!
//! For a solution `psi` of the critical equation and `eps > 0`,
//! `M(t) = sup_X (phi(t) - psi) - eps t` attains its maximum over time at
//! `t = 0`; symmetrically `m(t) = inf_X (phi(t) - psi) + eps t` attains its
//! minimum at `t = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ScalarField;

pub const DEFAULT_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HEpsilonReport {
    pub epsilon: f64,
    pub slack: f64,
    /// `M(0)`.
    pub upper_initial: f64,
    pub upper_max: f64,
    pub upper_max_time: f64,
    /// `m(0)`.
    pub lower_initial: f64,
    pub lower_min: f64,
    pub lower_min_time: f64,
    pub samples: usize,
}

impl HEpsilonReport {
    pub fn upper_holds(&self) -> bool {
        self.upper_max <= self.upper_initial + self.slack
    }

    pub fn lower_holds(&self) -> bool {
        self.lower_min >= self.lower_initial - self.slack
    }

    pub fn passed(&self) -> bool {
        self.upper_holds() && self.lower_holds()
    }
}

/// Streaming evaluation of `M(t)` and `m(t)`.
#[derive(Debug, Clone)]
pub struct HEpsilonTracker {
    psi: ScalarField,
    epsilon: f64,
    slack: f64,
    state: Option<HEpsilonReport>,
}

impl HEpsilonTracker {
    pub fn new(psi: ScalarField, epsilon: f64, slack: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Precondition(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self {
            psi,
            epsilon,
            slack,
            state: None,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Feeds `phi` at time `t` and returns `M(t)`. Times must be fed in
    /// increasing order, starting at the initial time.
    pub fn observe(&mut self, t: f64, phi: &ScalarField) -> Result<f64> {
        phi.grid().check_same(self.psi.grid())?;
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for (a, b) in phi.values().iter().zip(self.psi.values()) {
            let d = a - b;
            hi = hi.max(d);
            lo = lo.min(d);
        }
        let upper = hi - self.epsilon * t;
        let lower = lo + self.epsilon * t;
        match &mut self.state {
            None => {
                self.state = Some(HEpsilonReport {
                    epsilon: self.epsilon,
                    slack: self.slack,
                    upper_initial: upper,
                    upper_max: upper,
                    upper_max_time: t,
                    lower_initial: lower,
                    lower_min: lower,
                    lower_min_time: t,
                    samples: 1,
                })
            }
            Some(r) => {
                r.samples += 1;
                if upper > r.upper_max {
                    r.upper_max = upper;
                    r.upper_max_time = t;
                }
                if lower < r.lower_min {
                    r.lower_min = lower;
                    r.lower_min_time = t;
                }
            }
        }
        Ok(upper)
    }

    pub fn report(&self) -> Option<HEpsilonReport> {
        self.state.clone()
    }
}

/// `M(t)` and its mirror along a sampled trajectory.
pub fn comparison_h_epsilon<'a>(
    samples: impl IntoIterator<Item = (f64, &'a ScalarField)>,
    psi: &ScalarField,
    epsilon: f64,
    slack: f64,
) -> Result<HEpsilonReport> {
    let mut tracker = HEpsilonTracker::new(psi.clone(), epsilon, slack)?;
    for (t, phi) in samples {
        tracker.observe(t, phi)?;
    }
    tracker
        .report()
        .ok_or_else(|| Error::Precondition("trajectory has no samples".into()))
}
