//! pass^k reliability statistics.
//!
//! For k successes in k Bernoulli trials the one-sided Clopper-Pearson lower
//! bound on the success probability at confidence `1 - alpha` is
//! `alpha^(1/k)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PassKError {
    #[error("probability must lie strictly between 0 and 1, got {0}")]
    Probability(f64),
    #[error("significance must lie strictly between 0 and 1, got {0}")]
    Significance(f64),
    #[error("k must be at least 1")]
    ZeroK,
}

fn open_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

/// Lower confidence bound on the pass probability after k passes out of k runs.
pub fn pass_lower_bound(k: u32, alpha: f64) -> Result<f64, PassKError> {
    if k == 0 {
        return Err(PassKError::ZeroK);
    }
    if !open_unit(alpha) {
        return Err(PassKError::Significance(alpha));
    }
    Ok(alpha.powf(1.0 / f64::from(k)))
}

/// Smallest k with `alpha^(1/k) >= p`.
pub fn min_k_for(p: f64, alpha: f64) -> Result<u32, PassKError> {
    if !open_unit(p) {
        return Err(PassKError::Probability(p));
    }
    if !open_unit(alpha) {
        return Err(PassKError::Significance(alpha));
    }
    let estimate = (alpha.ln() / p.ln()).ceil().max(1.0);
    let mut k = estimate as u32;
    // The logarithm ratio can land a hair on either side of an integer.
    while pass_lower_bound(k, alpha)? < p {
        k += 1;
    }
    while k > 1 && pass_lower_bound(k - 1, alpha)? >= p {
        k -= 1;
    }
    Ok(k)
}

/// Named reliability tiers borrowed from material allowables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    S,
    B,
    A,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassKPolicy {
    pub p: f64,
    pub alpha: f64,
    pub k: u32,
    pub basis: Basis,
}

impl PassKPolicy {
    pub fn new(p: f64, alpha: f64, basis: Basis) -> Result<Self, PassKError> {
        Ok(PassKPolicy {
            p,
            alpha,
            k: min_k_for(p, alpha)?,
            basis,
        })
    }

    /// S, B and A basis at 95 % confidence.
    pub fn basis(basis: Basis) -> Self {
        let p = match basis {
            Basis::S => 0.50,
            Basis::B => 0.90,
            Basis::A | Basis::Custom => 0.99,
        };
        Self::new(p, 0.05, basis).expect("constants are in range")
    }
}

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEVELOPMENT_K: u32 = 3;
pub const DEPLOYMENT_MIN_K: u32 = 10;
