//! Byzantine report channel: codeword flipping, the resulting codeword
//! pmfs, and the attack strength that blinds a linear fusion rule.

use rand::Rng;

use crate::detectors::{FusionWeights, Network};
use crate::error::{Error, Result};
use crate::model::{honest_codeword_pmf, Codeword, CodewordDistribution, Hypothesis, SignalModel};

/// Fraction of Byzantine sensors and their flip probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackParams {
    alpha: f64,
    p_attack: f64,
    x: f64,
}

impl AttackParams {
    pub fn new(alpha: f64, p_attack: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("p_attack", p_attack)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(AttackParams {
            alpha,
            p_attack,
            x: alpha * p_attack,
        })
    }

    pub fn none() -> Self {
        AttackParams {
            alpha: 0.0,
            p_attack: 0.0,
            x: 0.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p_attack(&self) -> f64 {
        self.p_attack
    }

    /// Effective attack parameter `alpha * p_attack`.
    pub fn x(&self) -> f64 {
        self.x
    }
}

/// The two uniforms a Byzantine sensor consumes per report. Keeping them
/// explicit lets the same draw corrupt several quantizer layouts of one
/// observation consistently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipDraw {
    pub flip: f64,
    pub pick: f64,
}

impl FlipDraw {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        FlipDraw {
            flip: rng.random(),
            pick: rng.random(),
        }
    }

    /// Keeps `z` unless `flip < p_attack`, in which case one of the other
    /// `levels - 1` codewords is chosen uniformly via `pick`.
    pub fn apply(self, z: Codeword, levels: usize, p_attack: f64) -> Codeword {
        if self.flip >= p_attack {
            return z;
        }
        let others = levels - 1;
        let k = ((self.pick * others as f64) as usize).min(others - 1);
        let slot = if k >= z.slot() { k + 1 } else { k };
        Codeword::from_slot(slot)
    }
}

/// Codeword a Byzantine sensor actually sends when its quantizer produced `z`.
pub fn byzantine_report<R: Rng + ?Sized>(z: Codeword, levels: usize, p_attack: f64, rng: &mut R) -> Codeword {
    FlipDraw::sample(rng).apply(z, levels, p_attack)
}

/// Pmf of a Byzantine sensor's report: `A_j (1 - P_A) + (1 - A_j) P_A / (2^q - 1)`.
pub fn byzantine_codeword_pmf(honest: &CodewordDistribution, p_attack: f64) -> CodewordDistribution {
    let spread = p_attack / (honest.levels() - 1) as f64;
    CodewordDistribution::from_vec_unchecked(
        honest
            .probs()
            .iter()
            .map(|&a| a * (1.0 - p_attack) + (1.0 - a) * spread)
            .collect(),
    )
}

/// Report pmf of a sensor that is Byzantine with probability `alpha`.
pub fn mixture_codeword_pmf(honest: &CodewordDistribution, attack: &AttackParams) -> CodewordDistribution {
    let byz = byzantine_codeword_pmf(honest, attack.p_attack);
    CodewordDistribution::from_vec_unchecked(
        honest
            .probs()
            .iter()
            .zip(byz.probs())
            .map(|(&h, &b)| (1.0 - attack.alpha) * h + attack.alpha * b)
            .collect(),
    )
}

/// The same mixture written in terms of `x = alpha * p_attack` alone.
pub fn mixture_codeword_pmf_x(honest: &CodewordDistribution, x: f64) -> CodewordDistribution {
    CodewordDistribution::from_vec_unchecked(mix_probs(honest.probs(), x))
}

pub(crate) fn mix_probs(honest: &[f64], x: f64) -> Vec<f64> {
    let k1 = (honest.len() - 1) as f64;
    honest.iter().map(|&a| mix_one(a, x, k1)).collect()
}

#[inline]
pub(crate) fn mix_one(a: f64, x: f64, k_minus_1: f64) -> f64 {
    a + x * (1.0 / k_minus_1 - a - a / k_minus_1)
}

/// Attack strength `alpha * P_A` at which the expected fused statistic is the
/// same under both hypotheses.
///
/// Under the flip channel every mixture cell moves by
/// `(A1 - A0) * (1 - x * 2^q / (2^q - 1))`, so the mean separation is
/// `sum (A1 - A0) d` scaled by that factor; the root is the ratio of
/// `sum (A1 - A0) d` to `sum 2^q / (2^q - 1) * (A1 - A0) d`.
pub fn blinding_product(net: &Network, model: &SignalModel, weights: &FusionWeights) -> Result<f64> {
    if weights.rows() != net.len() || weights.levels() != net.levels() {
        return Err(Error::invalid("weights do not match the network"));
    }
    let (mut num, mut den, mut scale) = (0.0, 0.0, 0.0);
    for (i, sensor) in net.sensors().iter().enumerate() {
        let a0 = honest_codeword_pmf(model, sensor, Hypothesis::H0);
        let a1 = honest_codeword_pmf(model, sensor, Hypothesis::H1);
        let k = sensor.levels() as f64;
        for (j, &d) in weights.row(i).iter().enumerate() {
            let diff = (a1.probs()[j] - a0.probs()[j]) * d;
            num += diff;
            den += k / (k - 1.0) * diff;
            scale += (k / (k - 1.0) * diff).abs();
        }
    }
    if den == 0.0 || den.abs() <= 64.0 * f64::EPSILON * scale {
        return Err(Error::OrthogonalWeights);
    }
    Ok(num / den)
}
