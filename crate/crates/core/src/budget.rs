//! Structural score to per-chunk token budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "")]
pub struct AllocationConfig<T: Scalar> {
    #[serde(rename = "multiplier_min")]
    pub m_min: T,
    #[serde(rename = "multiplier_max")]
    pub m_max: T,
    #[serde(rename = "capacity_ratio")]
    pub r: T,
    #[serde(rename = "capacity_ratio_max")]
    pub r_max: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for AllocationConfig<T> {
    fn default() -> Self {
        Self {
            m_min: T::lit(0.5),
            m_max: T::lit(1.5),
            r: T::lit(0.4),
            r_max: T::one(),
            epsilon: T::lit(1e-8),
        }
    }
}

impl<T: Scalar> AllocationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: T| v > T::zero() && v <= T::one();
        if !unit(self.r) {
            return Err(Error::Config(format!("capacity_ratio must be in (0, 1], got {}", self.r)));
        }
        if !unit(self.r_max) {
            return Err(Error::Config(format!("capacity_ratio_max must be in (0, 1], got {}", self.r_max)));
        }
        if self.r > self.r_max {
            return Err(Error::Config("capacity_ratio must not exceed capacity_ratio_max".into()));
        }
        if !(self.m_min > T::zero() && self.m_min <= self.m_max && self.m_max.is_finite()) {
            return Err(Error::Config(format!(
                "multipliers require 0 < min ({}) <= max ({})",
                self.m_min, self.m_max
            )));
        }
        if !(self.epsilon > T::zero() && self.epsilon.is_finite()) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }

    /// Multipliers pinned to 1: every chunk gets `floor(len * r)`.
    pub fn uniform(self) -> Self {
        Self {
            m_min: T::one(),
            m_max: T::one(),
            ..self
        }
    }
}

/// Min-max normalization across the selected chunks; all 0.5 when every
/// score is equal.
pub fn normalize_scores<T: Scalar>(sigmas: &[T], cfg: &AllocationConfig<T>) -> Result<Vec<T>> {
    if sigmas.is_empty() {
        return Err(Error::Parameter("cannot normalize an empty score list".into()));
    }
    if sigmas.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("structural scores"));
    }
    let lo = sigmas.iter().copied().fold(T::infinity(), T::min);
    let hi = sigmas.iter().copied().fold(T::neg_infinity(), T::max);
    if hi == lo {
        return Ok(vec![T::lit(0.5); sigmas.len()]);
    }
    let span = cfg.epsilon.max(hi - lo);
    Ok(sigmas.iter().map(|&s| (s - lo) / span).collect())
}

/// `m = m_min + (m_max - m_min) * clip(s, 0, 1)`.
pub fn multiplier<T: Scalar>(s: T, cfg: &AllocationConfig<T>) -> T {
    let s = s.max(T::zero()).min(T::one());
    cfg.m_min + (cfg.m_max - cfg.m_min) * s
}

/// `B = floor(len * min(r_max, r * m))`, never above `len`.
pub fn budget<T: Scalar>(chunk_len: usize, m: T, cfg: &AllocationConfig<T>) -> usize {
    let ratio = cfg.r_max.min(cfg.r * m).max(T::zero());
    let b = (T::from_usize_lossy(chunk_len) * ratio).snapped_floor();
    b.to_usize().unwrap_or(0).min(chunk_len)
}
