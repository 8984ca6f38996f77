//! Gain sequences `{γᵢ}` and their Robbins-Monro conditions
//! `0 ≤ γᵢ ≤ 1`, `Σ γᵢ = ∞`, `Σ γᵢ² < ∞`.
//!
//! Conditions are decided from the decay exponent: `Σ i^-α` diverges iff
//! `α ≤ 1` and `Σ i^-2α` converges iff `α > 1/2`.

use alloc::format;


use crate::error::{Result, SaemError};
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainKind {
    /// `γᵢ = min(1, c · i^-α)`.
    Polynomial,
    /// `γᵢ = 1` for `i ≤ K`, then `(i − K)^-α`.
    ConstantThenDecay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSchedule {
    kind: GainKind,
    burn_in: u64,
    alpha: f64,
    scale: f64,
}

impl Default for GainSchedule {
    /// Constant-then-decay with `K = 200`, `α = 1`.
    fn default() -> Self {
        Self {
            kind: GainKind::ConstantThenDecay,
            burn_in: 200,
            alpha: 1.0,
            scale: 1.0,
        }
    }
}

impl GainSchedule {
    /// Builds a schedule. Only structurally invalid input is rejected here
    /// (non-positive or non-finite `α` or `c`); whether the schedule meets the
    /// Robbins-Monro conditions is answered by [`check_conditions`].
    pub fn new(kind: GainKind, burn_in: u64, alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(SaemError::InvalidGain(format!("alpha must be positive, got {alpha}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(SaemError::InvalidGain(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { kind, burn_in, alpha, scale })
    }

    pub fn polynomial(scale: f64, alpha: f64) -> Result<Self> {
        Self::new(GainKind::Polynomial, 0, alpha, scale)
    }

    pub fn constant_then_decay(burn_in: u64, alpha: f64) -> Result<Self> {
        Self::new(GainKind::ConstantThenDecay, burn_in, alpha, 1.0)
    }

    pub fn kind(&self) -> GainKind {
        self.kind
    }

    pub fn burn_in(&self) -> u64 {
        match self.kind {
            GainKind::Polynomial => 0,
            GainKind::ConstantThenDecay => self.burn_in,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `γᵢ` for `i ≥ 1`; `i = 0` is treated as `i = 1`.
    pub fn gamma(&self, i: u64) -> f64 {
        let i = i.max(1);
        match self.kind {
            GainKind::Polynomial => (self.scale * (i as f64).powf(-self.alpha)).min(1.0),
            GainKind::ConstantThenDecay => {
                if i <= self.burn_in {
                    1.0
                } else {
                    ((i - self.burn_in) as f64).powf(-self.alpha)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    /// The exponent every condition is decided on.
    pub alpha: f64,
    /// `0 ≤ γᵢ ≤ 1`.
    pub bounded: bool,
    /// `Σ γᵢ = ∞`, i.e. `α ≤ 1`.
    pub sum_diverges: bool,
    /// `Σ γᵢ² < ∞`, i.e. `2α > 1`.
    pub squares_summable: bool,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.bounded && self.sum_diverges && self.squares_summable
    }

    /// Name of the first failing condition, if any.
    pub fn first_failure(&self) -> Option<&'static str> {
        if !self.bounded {
            Some("bounded")
        } else if !self.sum_diverges {
            Some("sum_diverges")
        } else if !self.squares_summable {
            Some("squares_summable")
        } else {
            None
        }
    }
}

/// Decides the three conditions symbolically from the schedule's exponent.
pub fn check_conditions(schedule: &GainSchedule) -> ConditionReport {
    let alpha = schedule.alpha;
    ConditionReport {
        alpha,
        // both kinds are clamped or decay from 1, so every γᵢ lies in (0, 1]
        bounded: alpha > 0.0,
        sum_diverges: alpha <= 1.0,
        squares_summable: 2.0 * alpha > 1.0,
    }
}
