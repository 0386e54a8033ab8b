//! Weighted multi-dimensional reward.
//!
//! The step reward combines six component rewards with an offset:
//!
//! ```text
//! reward = β + λ1·portrait + λ2·clicks + λ3·text + λ4·image
//!            + λ5·labels + λ6·item
//! ```
//!
//! Component rewards are supplied by the environment; this module only
//! combines them. The combination is linear in the λ weights and
//! offset-exact in β.

use crate::error::{Error, Result};

/// The six component rewards, in combination order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RewardComponents {
    pub portrait: f64,
    pub clicks: f64,
    pub text: f64,
    pub image: f64,
    pub labels: f64,
    pub item: f64,
}

impl RewardComponents {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.portrait,
            self.clicks,
            self.text,
            self.image,
            self.labels,
            self.item,
        ]
    }
}

/// β offset and λ1..λ6 weights. Defaults to β = 0, all λ = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights {
    pub beta: f64,
    pub lambdas: [f64; 6],
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            beta: 0.0,
            lambdas: [1.0; 6],
        }
    }
}

/// Combines component rewards: β + Σ λ_j · component_j.
pub fn compute_reward(components: &RewardComponents, weights: &RewardWeights) -> Result<f64> {
    if !weights.beta.is_finite() {
        return Err(Error::NonFiniteInput("beta"));
    }
    if weights.lambdas.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFiniteInput("lambda"));
    }
    if components.as_array().iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFiniteInput("reward component"));
    }
    let mut total = weights.beta;
    for (lambda, component) in weights.lambdas.iter().zip(components.as_array()) {
        total += lambda * component;
    }
    Ok(total)
}
