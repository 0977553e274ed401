//! Fusion rules: the clairvoyant LRT benchmark, GLRT and quantized LMPT,
//! their reference-sensor counterparts, and the reputation-filtered
//! enhanced variants.

use std::fmt;
use std::str::FromStr;

use crate::analysis::{threshold_from_h0, AdaptiveThreshold, MomentAccumulator};
use crate::channel::mix_one;
use crate::error::{Error, Result};
use crate::model::{cell_mass, gaussian_cell_probs, Codeword, SensorSpec, SignalModel};
use crate::numerics::{maximize_scalar, q_tail_inverse, Interval};

mod enhanced;
mod glrt;
mod lmpt;
mod lrt;
mod reference;

pub use enhanced::{
    enhanced_decide, honest_flag_probability, reputation_filter, AlphaUpdate, BaseDetector, EnhancedConfig, FilterHistory, ReputationState,
    DEFAULT_FILTER_P_NOMINAL,
};
pub use glrt::{glrt_decide, glrt_estimate_p, glrt_weights};
pub use lmpt::{lmpt_decide, lmpt_threshold, lmpt_weights};
pub use lrt::{lrt_decide, lrt_statistic, lrt_weights, LrtThreshold};
pub use reference::{
    estimate_attack_parameter, estimate_from_counts, glrtrs_decide, glrtrs_estimate_p, glrtrs_weights,
    lmptrs_decide, lmptrs_weights, reference_anchor_counts,
};

/// A set of sensors sharing one quantizer resolution.
///
/// Sensors with the same gain and thresholds are grouped into classes so
/// that likelihood and moment evaluations cost one pmf per class rather than
/// one per sensor.
#[derive(Debug, Clone)]
pub struct Network {
    sensors: Vec<SensorSpec>,
    levels: usize,
    class_of: Vec<usize>,
    class_rep: Vec<usize>,
    reference: Vec<bool>,
    n_reference: usize,
    regular_mult: Vec<f64>,
}

impl Network {
    pub fn new(sensors: Vec<SensorSpec>) -> Result<Self> {
        let Some(first) = sensors.first() else {
            return Err(Error::invalid("a network needs at least one sensor"));
        };
        let levels = first.levels();
        let mut class_of = Vec::with_capacity(sensors.len());
        let mut class_rep: Vec<usize> = Vec::new();
        for (i, s) in sensors.iter().enumerate() {
            if s.levels() != levels {
                return Err(Error::invalid(format!(
                    "sensor {i} has {} codewords, expected {levels}",
                    s.levels()
                )));
            }
            let c = match class_rep.iter().position(|&r| sensors[r].same_quantizer(s)) {
                Some(c) => c,
                None => {
                    class_rep.push(i);
                    class_rep.len() - 1
                }
            };
            class_of.push(c);
        }
        let reference: Vec<bool> = sensors.iter().map(|s| s.is_reference).collect();
        let n_reference = reference.iter().filter(|&&r| r).count();
        let mut regular_mult = vec![0.0; class_rep.len()];
        for (i, &c) in class_of.iter().enumerate() {
            if !reference[i] {
                regular_mult[c] += 1.0;
            }
        }
        Ok(Network {
            sensors,
            levels,
            class_of,
            class_rep,
            reference,
            n_reference,
            regular_mult,
        })
    }

    pub fn sensors(&self) -> &[SensorSpec] {
        &self.sensors
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    /// Number of codewords `2^q`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn n_reference(&self) -> usize {
        self.n_reference
    }

    pub fn is_reference(&self, i: usize) -> bool {
        self.reference[i]
    }

    /// `true` for every regular sensor.
    pub(crate) fn regular_mask(&self) -> Vec<bool> {
        self.reference.iter().map(|r| !r).collect()
    }

    /// Regular sensors per class.
    pub(crate) fn regular_multiplicities(&self) -> &[f64] {
        &self.regular_mult
    }

    pub fn n_regular(&self) -> usize {
        self.len() - self.n_reference()
    }

    pub(crate) fn n_classes(&self) -> usize {
        self.class_rep.len()
    }

    pub(crate) fn class_of(&self, i: usize) -> usize {
        self.class_of[i]
    }

    pub(crate) fn class_sensor(&self, c: usize) -> &SensorSpec {
        &self.sensors[self.class_rep[c]]
    }

    pub(crate) fn check_reports(&self, reports: &[Codeword]) -> Result<()> {
        if reports.len() != self.len() {
            return Err(Error::invalid(format!(
                "expected {} reports, got {}",
                self.len(),
                reports.len()
            )));
        }
        if let Some(i) = reports.iter().position(|c| c.slot() >= self.levels) {
            return Err(Error::invalid(format!("report of sensor {i} is not a valid codeword")));
        }
        Ok(())
    }

    /// Per-class multiplicities of the selected sensors.
    pub(crate) fn multiplicities(&self, select: impl Fn(usize) -> bool) -> Vec<f64> {
        let mut m = vec![0.0; self.n_classes()];
        for i in (0..self.len()).filter(|&i| select(i)) {
            m[self.class_of[i]] += 1.0;
        }
        m
    }

    /// Per-class codeword counts of the selected sensors, flattened as
    /// `class * levels + slot`.
    pub(crate) fn class_counts(&self, reports: &[Codeword], select: impl Fn(usize) -> bool) -> Vec<f64> {
        let mut n = vec![0.0; self.n_classes() * self.levels];
        for (i, c) in reports.iter().enumerate().filter(|(i, _)| select(*i)) {
            n[self.class_of[i] * self.levels + c.slot()] += 1.0;
        }
        n
    }

    /// Honest per-class pmfs at sparsity `p` (H0 when `p = 0`).
    pub(crate) fn class_probs_at(&self, model: &SignalModel, p: f64) -> Vec<Vec<f64>> {
        (0..self.n_classes())
            .map(|c| {
                let s = self.class_sensor(c);
                gaussian_cell_probs(&s.thresholds, model.variance_h1_at(p, s.gain2).sqrt())
            })
            .collect()
    }
}

/// Per-sensor, per-codeword fusion weights `d_{i,j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    rows: usize,
    levels: usize,
    data: Vec<f64>,
}

impl FusionWeights {
    pub fn zeros(rows: usize, levels: usize) -> Self {
        FusionWeights {
            rows,
            levels,
            data: vec![0.0; rows * levels],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let levels = rows.first().map_or(0, Vec::len);
        if levels < 2 {
            return Err(Error::invalid("weights need at least one row of two codewords"));
        }
        if rows.iter().any(|r| r.len() != levels) {
            return Err(Error::invalid("weight rows differ in length"));
        }
        if rows.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weights must be finite"));
        }
        Ok(FusionWeights {
            rows: rows.len(),
            levels,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Expands per-class rows to sensors; unselected sensors get zero rows.
    pub(crate) fn from_classes(net: &Network, class_w: &[Vec<f64>], select: impl Fn(usize) -> bool) -> Self {
        let mut w = FusionWeights::zeros(net.len(), net.levels());
        for i in (0..net.len()).filter(|&i| select(i)) {
            w.row_mut(i).copy_from_slice(&class_w[net.class_of(i)]);
        }
        w
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.levels..(i + 1) * self.levels]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.levels..(i + 1) * self.levels]
    }

    pub fn weight(&self, i: usize, c: Codeword) -> f64 {
        self.row(i)[c.slot()]
    }

    /// `sum_i d_{i, u_i}`.
    pub fn statistic(&self, reports: &[Codeword]) -> Result<f64> {
        if reports.len() != self.rows {
            return Err(Error::invalid(format!(
                "expected {} reports, got {}",
                self.rows,
                reports.len()
            )));
        }
        let mut s = 0.0;
        for (i, c) in reports.iter().enumerate() {
            if c.slot() >= self.levels {
                return Err(Error::invalid(format!("report of sensor {i} is not a valid codeword")));
            }
            s += self.data[i * self.levels + c.slot()];
        }
        Ok(s)
    }
}

/// Outcome of one fusion decision. `decide_h1` is `statistic > threshold`,
/// so a tie decides H0.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorVerdict {
    pub statistic: f64,
    pub threshold: f64,
    pub decide_h1: bool,
    pub p_hat: Option<f64>,
    pub x_hat: Option<f64>,
    /// Attack parameter actually plugged into the weights by the enhanced rules.
    pub x_eff: Option<f64>,
    pub keep_mask: Option<Vec<bool>>,
    /// The adaptive threshold fell back to the H0 mean (zero variance).
    pub threshold_degenerate: bool,
}

impl DetectorVerdict {
    pub fn new(statistic: f64, threshold: f64) -> Self {
        DetectorVerdict {
            statistic,
            threshold,
            decide_h1: statistic > threshold,
            p_hat: None,
            x_hat: None,
            x_eff: None,
            keep_mask: None,
            threshold_degenerate: false,
        }
    }

    pub(crate) fn adaptive(statistic: f64, t: AdaptiveThreshold) -> Self {
        DetectorVerdict {
            threshold_degenerate: t.degenerate,
            ..DetectorVerdict::new(statistic, t.value)
        }
    }
}

/// How a GLRT-style rule picks its threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    Fixed(f64),
    /// Gaussian-approximation threshold for the target false-alarm rate.
    Adaptive { target_pfa: f64 },
}

/// Search settings for the sparsity MLE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PSearch {
    pub p_max: f64,
    pub tol: f64,
}

impl Default for PSearch {
    fn default() -> Self {
        PSearch { p_max: 0.5, tol: 1e-6 }
    }
}

impl PSearch {
    fn domain(&self) -> Result<Interval> {
        if !(self.p_max > 0.0 && self.p_max <= 1.0) {
            return Err(Error::invalid(format!("p_max must lie in (0, 1], got {}", self.p_max)));
        }
        Interval::new(0.0, self.p_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorKind {
    Lrt,
    Glrt,
    Lmpt,
    Glrtrs,
    Lmptrs,
    EGlrtrs,
    ELmptrs,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 7] = [
        DetectorKind::Lrt,
        DetectorKind::Glrt,
        DetectorKind::Lmpt,
        DetectorKind::Glrtrs,
        DetectorKind::Lmptrs,
        DetectorKind::EGlrtrs,
        DetectorKind::ELmptrs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Lrt => "LRT",
            DetectorKind::Glrt => "GLRT",
            DetectorKind::Lmpt => "LMPT",
            DetectorKind::Glrtrs => "GLRTRS",
            DetectorKind::Lmptrs => "LMPTRS",
            DetectorKind::EGlrtrs => "E-GLRTRS",
            DetectorKind::ELmptrs => "E-LMPTRS",
        }
    }

    /// Whether the rule reads reference-sensor reports.
    pub fn uses_reference(self) -> bool {
        matches!(
            self,
            DetectorKind::Glrtrs | DetectorKind::Lmptrs | DetectorKind::EGlrtrs | DetectorKind::ELmptrs
        )
    }

    pub fn is_enhanced(self) -> bool {
        matches!(self, DetectorKind::EGlrtrs | DetectorKind::ELmptrs)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace('_', "-");
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name() == key || k.name().replace('-', "") == key)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown detector '{s}' (expected one of {})",
                    DetectorKind::ALL.map(|k| k.name()).join(", ")
                ))
            })
    }
}

// Shared machinery for the per-class rules below.

/// Mixture pmf of a class at attack strength `x`.
pub(crate) fn mix_class(a: &[f64], x: f64) -> Vec<f64> {
    let k1 = (a.len() - 1) as f64;
    a.iter().map(|&v| mix_one(v, x, k1)).collect()
}

/// MLE of the sparsity from per-class counts, with reports passed through
/// the flip channel at strength `x`.
pub(crate) fn mle_sparsity(
    net: &Network,
    model: &SignalModel,
    counts: &[f64],
    x: f64,
    search: &PSearch,
) -> Result<f64> {
    let k = net.levels();
    let k1 = (k - 1) as f64;
    let loglik = |p: f64| -> f64 {
        let mut ll = 0.0;
        for c in 0..net.n_classes() {
            let n = &counts[c * k..(c + 1) * k];
            if n.iter().all(|&v| v == 0.0) {
                continue;
            }
            let s = net.class_sensor(c);
            let sd = model.variance_h1_at(p, s.gain2).sqrt();
            let t = s.thresholds.as_slice();
            for (j, &nj) in n.iter().enumerate() {
                if nj > 0.0 {
                    ll += nj * mix_one(cell_mass(t[j], t[j + 1], sd), x, k1).ln();
                }
            }
        }
        ll
    };
    Ok(maximize_scalar(loglik, search.domain()?, search.tol)?.0)
}

/// Adaptive threshold from H0-only moments of a per-class statistic.
pub(crate) fn class_threshold(class_w: &[Vec<f64>], probs_h0: &[Vec<f64>], mult: &[f64], target_pfa: f64) -> Result<AdaptiveThreshold> {
    let z = q_tail_inverse(target_pfa)?;
    let mut acc = MomentAccumulator::default();
    for c in 0..class_w.len() {
        if mult[c] > 0.0 {
            acc.add(&probs_h0[c], &class_w[c], mult[c]);
        }
    }
    let (m, v) = acc.finish();
    Ok(threshold_from_h0(m, v, z))
}

/// `sum_i w[class(i)][u_i]` over the selected sensors.
pub(crate) fn class_statistic(
    net: &Network,
    class_w: &[Vec<f64>],
    reports: &[Codeword],
    select: impl Fn(usize) -> bool,
) -> f64 {
    let mut s = 0.0;
    for (i, c) in reports.iter().enumerate() {
        if select(i) {
            s += class_w[net.class_of(i)][c.slot()];
        }
    }
    s
}

pub(crate) fn check_x(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("attack parameter must lie in [0, 1], got {x}")));
    }
    Ok(())
}
