//! Closed-form bound terms and the Branch-&-Bound rejection probabilities
//! for uniform-cube clusters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strategies::CriterionReport;

/// Mean and variance of the L1 distance criterion between uniform points of
/// `[0,1]^p`, scaled by `1/p`: `(p/(p+1), p/((p+1)^2 (p+2)))`.
pub fn uniform_cube_moments(p: usize) -> Result<(f64, f64)> {
    if p == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let p = p as f64;
    Ok((p / (p + 1.0), p / ((p + 1.0) * (p + 1.0) * (p + 2.0))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BbScenario {
    pub cluster_size: usize,
    pub dim: usize,
    pub batch: usize,
    pub eps: f64,
}

impl BbScenario {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.batch == 0 {
            return Err(Error::invalid("dimension and batch must be at least 1"));
        }
        if self.cluster_size < self.batch {
            return Err(Error::invalid("cluster size must be at least the batch size"));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::invalid("eps must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BbRejection {
    /// Probability that one candidate survives its first batch wrongly.
    pub delta: f64,
    /// Probability that the true medoid is pruned.
    pub gamma: f64,
    /// `1 - (1 - delta)^n_c + gamma`, clipped to 1.
    pub reject_prob: f64,
    /// The unclipped expression exceeded 1.
    pub clipped: bool,
}

fn tail(lin: f64, quad: f64) -> f64 {
    let t = ((lin * lin + 4.0 * quad).sqrt() - lin) / 2.0;
    (-t * t).exp()
}

pub fn bb_rejection_bound(s: &BbScenario) -> Result<BbRejection> {
    s.validate()?;
    let (mu, var) = uniform_cube_moments(s.dim)?;
    let sigma = var.sqrt();
    let n = s.batch as f64;
    let a = 1.5 * (2.0 * n).sqrt() * sigma;
    let b = 1.5 * n * (4.0 * sigma / n.sqrt() + 0.75 * s.eps * mu);
    let c = 3.0 * (2.0 * n).sqrt() * sigma;
    let d = 0.75 * n * s.eps * mu;
    let delta = tail(a, b);
    let gamma = tail(c, d);
    // 1 - (1-δ)^n_c without cancellation for tiny δ
    let miss = -((s.cluster_size as f64) * (-delta).ln_1p()).exp_m1();
    let raw = miss + gamma;
    Ok(BbRejection {
        delta,
        gamma,
        reject_prob: raw.min(1.0),
        clipped: raw > 1.0,
    })
}

/// `M sqrt(ln(1/delta) / (2n))`.
pub fn confidence_term(m: f64, delta: f64, n: usize) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid("delta must lie in (0, 1]"));
    }
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if !(m >= 0.0) || !m.is_finite() {
        return Err(Error::invalid("M must be finite and non-negative"));
    }
    Ok(m * ((1.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

/// Whether the envelope gap is dominated by the distance criterion,
/// `gap <= 2 k mu mean_min_dist`, up to `1e-9` relative. The margin is the
/// right side minus the left.
pub fn check_bound_dominance(report: &CriterionReport, k: f64, mu: f64) -> Result<(bool, f64)> {
    let gap = report
        .envelope_gap_mean
        .ok_or_else(|| Error::invalid("report has no envelope term"))?;
    let rhs = 2.0 * k * mu * report.mean_min_dist;
    let margin = rhs - gap;
    let tol = 1e-9 * rhs.abs().max(gap.abs());
    Ok((margin >= -tol, margin))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub epsilon: f64,
    pub k: f64,
    pub mu: f64,
    pub nu: f64,
    pub m: f64,
    pub delta: f64,
    pub n: usize,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let all = [self.epsilon, self.k, self.mu, self.nu, self.m, self.delta];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("bound inputs must be finite"));
        }
        if self.epsilon < 0.0 {
            return Err(Error::invalid("epsilon must be non-negative"));
        }
        if !(self.nu > 0.0) || self.nu > self.mu {
            return Err(Error::invalid("nu must satisfy 0 < nu <= mu"));
        }
        Ok(())
    }
}

/// Distance-based bound on the target risk:
/// `3 eps + 2 k mu mean_min_dist + 2 mu rademacher + confidence`.
pub fn distance_bound(inputs: &BoundInputs, mean_min_dist: f64, rademacher: f64) -> Result<f64> {
    inputs.validate()?;
    let conf = confidence_term(inputs.m, inputs.delta, inputs.n)?;
    Ok(3.0 * inputs.epsilon
        + 2.0 * inputs.k * inputs.mu * mean_min_dist
        + 2.0 * inputs.mu * rademacher
        + conf)
}

/// Envelope-based bound on the target risk:
/// `(1 + 2 mu / nu) eps + gap + 2 mu rademacher + confidence`.
pub fn envelope_bound(inputs: &BoundInputs, envelope_gap_mean: f64, rademacher: f64) -> Result<f64> {
    inputs.validate()?;
    let conf = confidence_term(inputs.m, inputs.delta, inputs.n)?;
    Ok((1.0 + 2.0 * inputs.mu / inputs.nu) * inputs.epsilon
        + envelope_gap_mean
        + 2.0 * inputs.mu * rademacher
        + conf)
}
