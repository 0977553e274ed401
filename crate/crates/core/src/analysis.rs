//! Gaussian-approximation performance of linear fusion statistics.

use crate::detectors::FusionWeights;
use crate::error::{Error, Result};
use crate::model::CodewordDistribution;
use crate::numerics::{q, q_tail_inverse};

/// Mean and variance of a fused statistic under each hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StatisticMoments {
    pub mean_h0: f64,
    pub var_h0: f64,
    pub mean_h1: f64,
    pub var_h1: f64,
}

impl StatisticMoments {
    /// Moments after scaling every weight by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        StatisticMoments {
            mean_h0: c * self.mean_h0,
            var_h0: c * c * self.var_h0,
            mean_h1: c * self.mean_h1,
            var_h1: c * c * self.var_h1,
        }
    }
}

/// Prior probabilities of the two hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Priors {
    pub pi0: f64,
    pub pi1: f64,
}

impl Priors {
    pub fn new(pi0: f64, pi1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi0) || !(0.0..=1.0).contains(&pi1) || (pi0 + pi1 - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("priors must be probabilities summing to 1, got {pi0} and {pi1}")));
        }
        Ok(Priors { pi0, pi1 })
    }

    pub fn equal() -> Self {
        Priors { pi0: 0.5, pi1: 0.5 }
    }

    pub fn error_probability(&self, pd: f64, pf: f64) -> f64 {
        self.pi0 * pf + self.pi1 * (1.0 - pd)
    }
}

impl Default for Priors {
    fn default() -> Self {
        Priors::equal()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformancePoint {
    pub pd: f64,
    pub pf: f64,
    pub pe: f64,
    pub priors: Priors,
}

/// Accumulates per-sensor moments `sum_j P d` and `sum_j P d^2 - (sum_j P d)^2`.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct MomentAccumulator {
    mean: f64,
    var: f64,
}

impl MomentAccumulator {
    #[inline]
    pub(crate) fn add(&mut self, probs: &[f64], weights: &[f64], multiplicity: f64) {
        let (mut m, mut m2) = (0.0, 0.0);
        for (&p, &d) in probs.iter().zip(weights) {
            m += p * d;
            m2 += p * d * d;
        }
        self.mean += multiplicity * m;
        self.var += multiplicity * (m2 - m * m).max(0.0);
    }

    pub(crate) fn finish(self) -> (f64, f64) {
        (self.mean, self.var)
    }
}

/// Moments of `sum_i d_{i, u_i}` for independent reports with the given
/// per-sensor pmfs. Variances add across sensors.
pub fn statistic_moments(
    weights: &FusionWeights,
    pmfs_h0: &[CodewordDistribution],
    pmfs_h1: &[CodewordDistribution],
) -> Result<StatisticMoments> {
    if pmfs_h0.len() != weights.rows() || pmfs_h1.len() != weights.rows() {
        return Err(Error::invalid(format!(
            "weights cover {} sensors but {} / {} pmfs were given",
            weights.rows(),
            pmfs_h0.len(),
            pmfs_h1.len()
        )));
    }
    let mut acc0 = MomentAccumulator::default();
    let mut acc1 = MomentAccumulator::default();
    for (i, (p0, p1)) in pmfs_h0.iter().zip(pmfs_h1).enumerate() {
        if p0.levels() != weights.levels() || p1.levels() != weights.levels() {
            return Err(Error::invalid(format!("pmf of sensor {i} has the wrong number of codewords")));
        }
        acc0.add(p0.probs(), weights.row(i), 1.0);
        acc1.add(p1.probs(), weights.row(i), 1.0);
    }
    let (mean_h0, var_h0) = acc0.finish();
    let (mean_h1, var_h1) = acc1.finish();
    Ok(StatisticMoments {
        mean_h0,
        var_h0,
        mean_h1,
        var_h1,
    })
}

/// `P(L > threshold)` for `L ~ N(mean, var)`; a point mass when `var = 0`.
fn exceedance(threshold: f64, mean: f64, var: f64) -> f64 {
    if var > 0.0 {
        q((threshold - mean) / var.sqrt())
    } else if mean > threshold {
        1.0
    } else {
        0.0
    }
}

pub fn predict_performance(m: &StatisticMoments, threshold: f64, priors: Priors) -> PerformancePoint {
    let pd = exceedance(threshold, m.mean_h1, m.var_h1);
    let pf = exceedance(threshold, m.mean_h0, m.var_h0);
    PerformancePoint {
        pd,
        pf,
        pe: priors.error_probability(pd, pf),
        priors,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveThreshold {
    pub value: f64,
    /// Set when the H0 variance vanished and the threshold fell back to the mean.
    pub degenerate: bool,
}

/// Threshold hitting `target_pfa` under the Gaussian approximation:
/// `Q^{-1}(PFA) sqrt(Var(L|H0)) + E(L|H0)`.
pub fn adaptive_threshold(m: &StatisticMoments, target_pfa: f64) -> Result<AdaptiveThreshold> {
    let z = q_tail_inverse(target_pfa)?;
    Ok(threshold_from_h0(m.mean_h0, m.var_h0, z))
}

#[inline]
pub(crate) fn threshold_from_h0(mean_h0: f64, var_h0: f64, z: f64) -> AdaptiveThreshold {
    if var_h0 > 0.0 {
        AdaptiveThreshold {
            value: z * var_h0.sqrt() + mean_h0,
            degenerate: false,
        }
    } else {
        AdaptiveThreshold {
            value: mean_h0,
            degenerate: true,
        }
    }
}

/// `(E(L|H1) - E(L|H0))^2 / Var(L|H1)`.
pub fn deflection_coefficient(m: &StatisticMoments) -> Result<f64> {
    if !(m.var_h1 > 0.0) {
        return Err(Error::invalid("deflection coefficient needs a positive H1 variance"));
    }
    let d = m.mean_h1 - m.mean_h0;
    Ok(d * d / m.var_h1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crlb {
    pub variance: f64,
    /// `x` sits on the boundary of `[0, 1]`, where the bound is zero.
    pub degenerate: bool,
}

/// Cramér-Rao bound `x (1 - x) / n` for the reference-sensor attack estimate.
pub fn crlb_attack_parameter(x: f64, n_samples: u64) -> Result<Crlb> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("attack parameter must lie in [0, 1], got {x}")));
    }
    if n_samples == 0 {
        return Err(Error::invalid("the bound needs at least one sample"));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(Crlb {
            variance: 0.0,
            degenerate: true,
        });
    }
    Ok(Crlb {
        variance: x * (1.0 - x) / n_samples as f64,
        degenerate: false,
    })
}
