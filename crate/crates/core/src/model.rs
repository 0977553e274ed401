//! Signal and sensing model: Bernoulli-Gaussian sparse signals, compressed
//! observations, q-bit quantizers and honest-sensor codeword probabilities.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{q, q_tail_inverse};

/// Largest supported quantizer resolution in bits.
pub const MAX_BITS: u32 = 8;

/// Probability tolerance used when validating a pmf built from outside data.
const PMF_TOLERANCE: f64 = 1e-9;

/// Mass a reference sensor must put on its anchor codeword under both
/// hypotheses for the reference assumption to count as satisfied.
pub const ASSUMPTION_MASS: f64 = 1.0 - 1e-6;

/// Default gap between regular and reference quantizer thresholds.
pub const DEFAULT_REFERENCE_OFFSET: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub const BOTH: [Hypothesis; 2] = [Hypothesis::H0, Hypothesis::H1];
}

/// Bernoulli-Gaussian signal parameters.
///
/// `p` is the sparsity degree in force under H1; under H0 the signal is
/// absent regardless of `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalModel {
    p: f64,
    sigma_x2: f64,
    sigma_n2: f64,
    dim: usize,
}

impl SignalModel {
    pub fn new(p: f64, sigma_x2: f64, sigma_n2: f64, dim: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("sparsity degree must lie in [0, 1], got {p}")));
        }
        if !(sigma_x2 > 0.0 && sigma_x2.is_finite()) {
            return Err(Error::invalid(format!("signal variance must be positive, got {sigma_x2}")));
        }
        if !(sigma_n2 > 0.0 && sigma_n2.is_finite()) {
            return Err(Error::invalid(format!("noise variance must be positive, got {sigma_n2}")));
        }
        if dim == 0 {
            return Err(Error::invalid("signal dimension must be at least 1"));
        }
        Ok(SignalModel {
            p,
            sigma_x2,
            sigma_n2,
            dim,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn sigma_x2(&self) -> f64 {
        self.sigma_x2
    }

    pub fn sigma_n2(&self) -> f64 {
        self.sigma_n2
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Same model with a different sparsity degree.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        SignalModel::new(p, self.sigma_x2, self.sigma_n2, self.dim)
    }

    /// Observation variance under H1 at sparsity `p` for a sensor with
    /// squared channel gain `gain2`.
    pub(crate) fn variance_h1_at(&self, p: f64, gain2: f64) -> f64 {
        self.sigma_n2 + p * self.sigma_x2 * gain2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Honest,
    Byzantine,
}

/// Quantizer thresholds `tau_0 = -inf < tau_1 < ... < tau_{2^q} = +inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds(Vec<f64>);

impl Thresholds {
    /// Builds thresholds from the full list including both infinite ends.
    pub fn new(full: Vec<f64>) -> Result<Self> {
        let levels = full.len().saturating_sub(1);
        if levels < 2 || !levels.is_power_of_two() || levels > 1 << MAX_BITS {
            return Err(Error::invalid(format!(
                "threshold list must have 2^q + 1 entries with 1 <= q <= {MAX_BITS}, got {}",
                full.len()
            )));
        }
        if full[0] != f64::NEG_INFINITY || full[levels] != f64::INFINITY {
            return Err(Error::invalid("outer thresholds must be -inf and +inf"));
        }
        if full[1..levels].iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("inner thresholds must be finite"));
        }
        if full.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("thresholds must be strictly increasing"));
        }
        Ok(Thresholds(full))
    }

    /// Builds thresholds from the `2^q - 1` finite cut points.
    pub fn from_finite(cuts: &[f64]) -> Result<Self> {
        let mut full = Vec::with_capacity(cuts.len() + 2);
        full.push(f64::NEG_INFINITY);
        full.extend_from_slice(cuts);
        full.push(f64::INFINITY);
        Thresholds::new(full)
    }

    /// Cut points equiprobable under H0, i.e. quantiles of N(0, sigma_n2).
    pub fn equiprobable_h0(bits: u32, sigma_n2: f64) -> Result<Self> {
        check_bits(bits)?;
        let levels = 1usize << bits;
        let sd = sigma_n2.sqrt();
        let cuts = (1..levels)
            .map(|k| q_tail_inverse(1.0 - k as f64 / levels as f64).map(|z| z * sd))
            .collect::<Result<Vec<_>>>()?;
        Thresholds::from_finite(&cuts)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Finite cut points `tau_1 .. tau_{2^q - 1}`.
    pub fn finite(&self) -> &[f64] {
        &self.0[1..self.0.len() - 1]
    }

    /// Number of codewords `2^q`.
    pub fn levels(&self) -> usize {
        self.0.len() - 1
    }

    pub fn bits(&self) -> u32 {
        self.levels().trailing_zeros()
    }
}

pub(crate) fn check_bits(bits: u32) -> Result<()> {
    if bits == 0 || bits > MAX_BITS {
        return Err(Error::invalid(format!("q must lie in 1..={MAX_BITS}, got {bits}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub id: usize,
    /// Squared channel gain `||h_i||_2^2`.
    pub gain2: f64,
    pub thresholds: Thresholds,
    pub is_reference: bool,
    pub role: Role,
}

impl SensorSpec {
    pub fn new(id: usize, gain2: f64, thresholds: Thresholds) -> Result<Self> {
        if !(gain2 >= 0.0 && gain2.is_finite()) {
            return Err(Error::invalid(format!("squared gain must be finite and nonnegative, got {gain2}")));
        }
        Ok(SensorSpec {
            id,
            gain2,
            thresholds,
            is_reference: false,
            role: Role::Honest,
        })
    }

    pub fn reference(mut self) -> Self {
        self.is_reference = true;
        self
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn levels(&self) -> usize {
        self.thresholds.levels()
    }

    /// Whether two sensors share the quantizer and gain, so share every pmf.
    pub fn same_quantizer(&self, other: &SensorSpec) -> bool {
        self.gain2 == other.gain2 && self.thresholds == other.thresholds
    }
}

/// One quantizer output symbol `v_j`, indexed `1..=2^q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Codeword(u16);

impl Codeword {
    pub fn new(index: usize, levels: usize) -> Result<Self> {
        if index == 0 || index > levels {
            return Err(Error::invalid(format!("codeword index {index} outside 1..={levels}")));
        }
        Ok(Codeword(index as u16))
    }

    /// Zero-based slot, `index() - 1`.
    pub fn from_slot(slot: usize) -> Self {
        Codeword(slot as u16 + 1)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    /// Bit pattern `v_j` of a `bits`-bit quantizer, most significant first.
    pub fn bit_pattern(self, bits: u32) -> String {
        format!("{:0width$b}", self.slot(), width = bits as usize)
    }
}

/// Probability vector over the `2^q` codewords.
#[derive(Debug, Clone, PartialEq)]
pub struct CodewordDistribution(Vec<f64>);

impl CodewordDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 || !probs.len().is_power_of_two() {
            return Err(Error::invalid(format!("pmf length must be 2^q, got {}", probs.len())));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("pmf entries must lie in [0, 1]"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::invalid(format!("pmf sums to {total}, not 1")));
        }
        Ok(CodewordDistribution(probs))
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        CodewordDistribution(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn levels(&self) -> usize {
        self.0.len()
    }

    pub fn prob(&self, c: Codeword) -> f64 {
        self.0[c.slot()]
    }

    /// Total-variation distance.
    pub fn total_variation(&self, other: &CodewordDistribution) -> f64 {
        0.5 * self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// Standard deviation `beta_{i,h}` of an observation under hypothesis `h`.
pub fn beta_h(model: &SignalModel, sensor: &SensorSpec, h: Hypothesis) -> f64 {
    match h {
        Hypothesis::H0 => model.sigma_n2.sqrt(),
        Hypothesis::H1 => model.variance_h1_at(model.p, sensor.gain2).sqrt(),
    }
}

/// Draws a Bernoulli-Gaussian signal vector: each of the `dim` components is
/// active with probability `p` and then `N(0, sigma_x2)`, otherwise zero.
pub fn sample_bg_signal<R: Rng + ?Sized>(model: &SignalModel, rng: &mut R) -> Vec<f64> {
    let sx = model.sigma_x2.sqrt();
    (0..model.dim)
        .map(|_| {
            if rng.random::<f64>() < model.p {
                rng.sample::<f64, _>(StandardNormal) * sx
            } else {
                0.0
            }
        })
        .collect()
}

/// Draws one observation from the exact Bernoulli-Gaussian model with a
/// fresh random linear operator of norm `sqrt(gain2)`.
pub fn sample_sparse_observation<R: Rng + ?Sized>(
    model: &SignalModel,
    sensor: &SensorSpec,
    h: Hypothesis,
    rng: &mut R,
) -> f64 {
    let noise: f64 = rng.sample::<f64, _>(StandardNormal) * model.sigma_n2.sqrt();
    if h == Hypothesis::H0 {
        return noise;
    }
    let signal = sample_bg_signal(model, rng);
    let mut norm2 = 0.0;
    let mut dot = 0.0;
    for x in signal {
        let hm: f64 = StandardNormal.sample(rng);
        norm2 += hm * hm;
        dot += hm * x;
    }
    let scale = if norm2 > 0.0 {
        (sensor.gain2 / norm2).sqrt()
    } else {
        0.0
    };
    dot * scale + noise
}

/// Draws `N(0, beta_{i,h}^2)`, the large-dimension surrogate of the exact model.
pub fn sample_asymptotic_observation<R: Rng + ?Sized>(
    model: &SignalModel,
    sensor: &SensorSpec,
    h: Hypothesis,
    rng: &mut R,
) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * beta_h(model, sensor, h)
}

/// Quantizes with left-closed cells: `tau_{j-1} <= y < tau_j` maps to `v_j`.
pub fn quantize(y: f64, sensor: &SensorSpec) -> Codeword {
    quantize_with(y, &sensor.thresholds)
}

pub(crate) fn quantize_with(y: f64, thresholds: &Thresholds) -> Codeword {
    let t = thresholds.as_slice();
    let above = t[1..t.len() - 1].partition_point(|&tau| tau <= y);
    Codeword::from_slot(above)
}

/// Probability that a N(0, sd^2) variable falls in `[a, b)`, evaluated on
/// whichever tail keeps the subtraction well conditioned.
pub(crate) fn cell_mass(a: f64, b: f64, sd: f64) -> f64 {
    let (za, zb) = (a / sd, b / sd);
    let m = if za + zb < 0.0 {
        q(-zb) - q(-za)
    } else {
        q(za) - q(zb)
    };
    m.max(0.0)
}

/// Cell probabilities of a quantizer for a zero-mean Gaussian input.
pub(crate) fn gaussian_cell_probs(thresholds: &Thresholds, sd: f64) -> Vec<f64> {
    thresholds
        .as_slice()
        .windows(2)
        .map(|w| cell_mass(w[0], w[1], sd))
        .collect()
}

/// Honest-sensor codeword pmf `A_{i,j,h}`.
pub fn honest_codeword_pmf(model: &SignalModel, sensor: &SensorSpec, h: Hypothesis) -> CodewordDistribution {
    CodewordDistribution(gaussian_cell_probs(&sensor.thresholds, beta_h(model, sensor, h)))
}

/// Honest pmf under H1 at an arbitrary sparsity degree.
#[cfg(test)]
pub(crate) fn honest_probs_h1_at(model: &SignalModel, sensor: &SensorSpec, p: f64) -> Vec<f64> {
    gaussian_cell_probs(&sensor.thresholds, model.variance_h1_at(p, sensor.gain2).sqrt())
}

/// Which codeword the reference quantizer pins its output to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceSide {
    /// Reference cuts sit below every regular cut; output pinned to `v_{2^q}`.
    #[default]
    Low,
    /// Mirror image; output pinned to `v_1`.
    High,
}

impl ReferenceSide {
    pub fn anchor(self, levels: usize) -> Codeword {
        match self {
            ReferenceSide::Low => Codeword::from_slot(levels - 1),
            ReferenceSide::High => Codeword::from_slot(0),
        }
    }
}

/// Shifts a regular quantizer so that it becomes a reference quantizer: on
/// the low side the top finite cut ends up `offset` below the regular
/// quantizer's lowest finite cut.
pub fn make_reference_thresholds(base: &SensorSpec, offset: f64, side: ReferenceSide) -> Result<Thresholds> {
    if !(offset >= 0.0 && offset.is_finite()) {
        return Err(Error::invalid(format!("reference offset must be finite and nonnegative, got {offset}")));
    }
    let cuts = base.thresholds.finite();
    let (lowest, highest) = (cuts[0], cuts[cuts.len() - 1]);
    let shift = match side {
        ReferenceSide::Low => (lowest - offset) - highest,
        ReferenceSide::High => (highest + offset) - lowest,
    };
    let shifted: Vec<f64> = cuts.iter().map(|t| t + shift).collect();
    Thresholds::from_finite(&shifted)
}

/// Smallest (over hypotheses) mass the sensor puts on its most likely
/// codeword, and whether that reaches [`ASSUMPTION_MASS`].
pub fn assumption_check(model: &SignalModel, sensor: &SensorSpec) -> (bool, f64) {
    let mass = Hypothesis::BOTH
        .iter()
        .map(|&h| {
            honest_codeword_pmf(model, sensor, h)
                .probs()
                .iter()
                .copied()
                .fold(0.0, f64::max)
        })
        .fold(1.0, f64::min);
    (mass >= ASSUMPTION_MASS, mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::q_tail;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(p: f64) -> SignalModel {
        SignalModel::new(p, 5.0, 1.0, 100).unwrap()
    }

    fn sensor(cuts: &[f64]) -> SensorSpec {
        SensorSpec::new(0, 1.0, Thresholds::from_finite(cuts).unwrap()).unwrap()
    }

    #[test]
    fn model_validation() {
        assert!(SignalModel::new(-0.1, 5.0, 1.0, 10).is_err());
        assert!(SignalModel::new(0.1, 0.0, 1.0, 10).is_err());
        assert!(SignalModel::new(0.1, 5.0, -1.0, 10).is_err());
        assert!(SignalModel::new(0.1, 5.0, 1.0, 0).is_err());
    }

    #[test]
    fn threshold_validation() {
        assert!(Thresholds::from_finite(&[0.0]).is_ok());
        assert!(Thresholds::from_finite(&[-1.0, 0.0, 1.0]).is_ok());
        assert!(Thresholds::from_finite(&[-1.0, 1.0]).is_err());
        assert!(Thresholds::from_finite(&[1.0, 0.0, 2.0]).is_err());
        assert!(Thresholds::from_finite(&[0.0, 0.0, 2.0]).is_err());
        assert!(Thresholds::new(vec![0.0, 1.0, f64::INFINITY]).is_err());
        assert!(Thresholds::from_finite(&[f64::NAN]).is_err());
    }

    #[test]
    fn equiprobable_thresholds() {
        let t = Thresholds::equiprobable_h0(1, 1.0).unwrap();
        assert_eq!(t.finite(), &[0.0]);
        let t = Thresholds::equiprobable_h0(2, 4.0).unwrap();
        let pmf = gaussian_cell_probs(&t, 2.0);
        for p in pmf {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_examples() {
        let s = sensor(&[0.0]);
        assert_eq!(beta_h(&model(0.0), &s, Hypothesis::H1), 1.0);
        assert!((beta_h(&model(0.1), &s, Hypothesis::H1) - 1.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(beta_h(&model(0.7), &s, Hypothesis::H0), 1.0);
    }

    #[test]
    fn beta_h1_dominates_h0() {
        let s = sensor(&[0.0]);
        for p in [0.0, 0.01, 0.3] {
            let m = model(p);
            let (b0, b1) = (beta_h(&m, &s, Hypothesis::H0), beta_h(&m, &s, Hypothesis::H1));
            assert!(b1 >= b0);
            assert_eq!(b1 == b0, p == 0.0);
        }
        let mut dead = s.clone();
        dead.gain2 = 0.0;
        let m = model(0.3);
        assert_eq!(beta_h(&m, &dead, Hypothesis::H1), beta_h(&m, &dead, Hypothesis::H0));
    }

    #[test]
    fn quantize_boundaries() {
        let s1 = sensor(&[0.0]);
        assert_eq!(quantize(0.3, &s1).index(), 2);
        assert_eq!(quantize(0.0, &s1).index(), 2);
        assert_eq!(quantize(-0.1, &s1).index(), 1);
        let s2 = sensor(&[-1.0, 0.0, 1.0]);
        assert_eq!(quantize(-5.0, &s2).index(), 1);
        assert_eq!(quantize(-1.0, &s2).index(), 2);
        assert_eq!(quantize(0.5, &s2).index(), 3);
        assert_eq!(quantize(1.0, &s2).index(), 4);
        assert_eq!(quantize(f64::INFINITY, &s2).index(), 4);
        assert_eq!(Codeword::new(3, 4).unwrap().bit_pattern(2), "10");
        assert!(Codeword::new(0, 4).is_err());
        assert!(Codeword::new(5, 4).is_err());
    }

    #[test]
    fn honest_pmf_examples() {
        let s1 = sensor(&[0.0]);
        for p in [0.0, 0.2] {
            let pmf = honest_codeword_pmf(&model(p), &s1, Hypothesis::H1);
            assert_eq!(pmf.probs(), &[0.5, 0.5]);
        }
        let s = sensor(&[0.5]);
        assert_eq!(
            honest_codeword_pmf(&model(0.0), &s, Hypothesis::H1),
            honest_codeword_pmf(&model(0.0), &s, Hypothesis::H0)
        );
        let s2 = sensor(&[-1.0, 0.0, 1.0]);
        let pmf = honest_codeword_pmf(&model(0.0), &s2, Hypothesis::H0);
        let want = [0.15866, 0.34134, 0.34134, 0.15866];
        for (g, w) in pmf.probs().iter().zip(want) {
            assert!((g - w).abs() < 1e-5);
        }
    }

    #[test]
    fn reference_thresholds() {
        let s = sensor(&[0.0]);
        let t = make_reference_thresholds(&s, 6.0, ReferenceSide::Low).unwrap();
        assert_eq!(t.finite(), &[-6.0]);
        let r = SensorSpec::new(1, 1.0, t).unwrap().reference();
        let pmf = honest_codeword_pmf(&model(0.1), &r, Hypothesis::H0);
        assert!(pmf.probs()[1] > 1.0 - 1e-8);
        assert_eq!(pmf.probs()[1], q_tail(-6.0).unwrap());

        let s2 = sensor(&[-1.0, 0.0, 1.0]);
        let t2 = make_reference_thresholds(&s2, 6.0, ReferenceSide::Low).unwrap();
        assert!(t2.finite().iter().all(|&c| c <= -6.0));
        let r2 = SensorSpec::new(2, 1.0, t2).unwrap().reference();
        for h in Hypothesis::BOTH {
            assert!(honest_codeword_pmf(&model(0.1), &r2, h).probs()[3] > 1.0 - 1e-8);
        }
        let hi = make_reference_thresholds(&s2, 6.0, ReferenceSide::High).unwrap();
        assert_eq!(hi.finite(), &[7.0, 8.0, 9.0]);
        let rh = SensorSpec::new(3, 1.0, hi).unwrap().reference();
        assert!(honest_codeword_pmf(&model(0.1), &rh, Hypothesis::H1).probs()[0] > 1.0 - 1e-8);
        assert!(make_reference_thresholds(&s2, f64::NAN, ReferenceSide::Low).is_err());
    }

    #[test]
    fn assumption_examples() {
        let m = SignalModel::new(0.01, 5.0, 1.0, 100).unwrap();
        let base = sensor(&[0.0]);
        let r6 = SensorSpec::new(1, 1.0, make_reference_thresholds(&base, 6.0, ReferenceSide::Low).unwrap())
            .unwrap()
            .reference();
        assert!(assumption_check(&m, &r6).0);
        let (holds, mass) = assumption_check(&m, &base);
        assert!(!holds);
        assert_eq!(mass, 0.5);

        let m0 = SignalModel::new(0.0, 5.0, 1.0, 100).unwrap();
        let r3 = SensorSpec::new(1, 1.0, make_reference_thresholds(&base, 3.0, ReferenceSide::Low).unwrap())
            .unwrap()
            .reference();
        let (holds, mass) = assumption_check(&m0, &r3);
        assert!(!holds);
        assert!((mass - q_tail(-3.0).unwrap()).abs() < 1e-15);
        assert!((mass - 0.99865).abs() < 1e-5);

        let r0 = SensorSpec::new(1, 1.0, make_reference_thresholds(&base, 0.0, ReferenceSide::Low).unwrap())
            .unwrap()
            .reference();
        assert!(!assumption_check(&m, &r0).0);
    }

    #[test]
    fn empirical_codewords_match_pmf() {
        let m = model(0.1);
        let s = sensor(&[-1.0, 0.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mut counts = [0u64; 4];
        for _ in 0..n {
            let y = sample_asymptotic_observation(&m, &s, Hypothesis::H1, &mut rng);
            counts[quantize(y, &s).slot()] += 1;
        }
        let emp = CodewordDistribution::new(counts.iter().map(|&c| c as f64 / n as f64).collect()).unwrap();
        assert!(emp.total_variation(&honest_codeword_pmf(&m, &s, Hypothesis::H1)) < 0.01);
    }

    #[test]
    fn asymptotic_moments_under_h0() {
        let m = model(0.3);
        let s = sensor(&[0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let y = sample_asymptotic_observation(&m, &s, Hypothesis::H0, &mut rng);
            sum += y;
            sum2 += y * y;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.01);
    }

    #[test]
    fn exact_sampler_without_signal_is_noise() {
        // p = 0 consumes the same draws but never adds signal.
        let m = model(0.0);
        let s = sensor(&[0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let var = (0..n)
            .map(|_| sample_sparse_observation(&m, &s, Hypothesis::H1, &mut rng).powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn pmf_validation() {
        assert!(CodewordDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(CodewordDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(CodewordDistribution::new(vec![1.0, 0.0, 0.0]).is_err());
        assert!(CodewordDistribution::new(vec![-0.1, 1.1]).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]
            #[test]
            fn pmf_is_normalized(bits in 1u32..=4, seed_cuts in proptest::collection::vec(-4.0f64..4.0, 15), sd in 0.05f64..20.0) {
                let levels = 1usize << bits;
                let mut cuts: Vec<f64> = seed_cuts[..levels - 1].to_vec();
                cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                cuts.dedup();
                prop_assume!(cuts.len() == levels - 1);
                let t = Thresholds::from_finite(&cuts).unwrap();
                let probs = gaussian_cell_probs(&t, sd);
                prop_assert!(probs.iter().all(|&p| p >= 0.0));
                prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
