use super::{class_threshold, DetectorVerdict, FusionWeights, Network};
use crate::analysis::AdaptiveThreshold;
use crate::error::{Error, Result};
use crate::model::{gaussian_cell_probs, Codeword, SensorSpec, SignalModel};
use crate::numerics::normal_pdf;

/// `tau * phi(tau / beta)`, zero at infinite `tau`.
fn edge(tau: f64, beta: f64) -> f64 {
    if tau.is_finite() {
        tau * normal_pdf(tau / beta)
    } else {
        0.0
    }
}

/// `dA_{i,j,1} / dp` at sparsity `p`.
pub(crate) fn cell_derivative(model: &SignalModel, sensor: &SensorSpec, p: f64) -> Vec<f64> {
    let beta = model.variance_h1_at(p, sensor.gain2).sqrt();
    let scale = model.sigma_x2() * sensor.gain2 / (2.0 * beta.powi(3));
    sensor
        .thresholds
        .as_slice()
        .windows(2)
        .map(|t| scale * (edge(t[0], beta) - edge(t[1], beta)))
        .collect()
}

pub(crate) fn lmpt_class_weights(net: &Network, model: &SignalModel, at_p: f64) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut w = Vec::with_capacity(net.n_classes());
    let mut probs = Vec::with_capacity(net.n_classes());
    for c in 0..net.n_classes() {
        let s = net.class_sensor(c);
        let a = gaussian_cell_probs(&s.thresholds, model.variance_h1_at(at_p, s.gain2).sqrt());
        let d = cell_derivative(model, s, at_p);
        let mut row = Vec::with_capacity(a.len());
        for (j, (&aj, &dj)) in a.iter().zip(&d).enumerate() {
            if !(aj > 0.0) {
                return Err(Error::ZeroProbability {
                    sensor: s.id,
                    codeword: j + 1,
                });
            }
            row.push(dj / aj);
        }
        w.push(row);
        probs.push(a);
    }
    Ok((w, probs))
}

/// Score weights `d ln P(u_i = v_j | H1; p) / dp` at `at_p`; the LMPT uses
/// `at_p = 0`.
pub fn lmpt_weights(net: &Network, model: &SignalModel, at_p: f64) -> Result<FusionWeights> {
    if !(0.0..=1.0).contains(&at_p) {
        return Err(Error::invalid(format!("sparsity must lie in [0, 1], got {at_p}")));
    }
    let (w, _) = lmpt_class_weights(net, model, at_p)?;
    Ok(FusionWeights::from_classes(net, &w, |_| true))
}

/// Attack-free adaptive threshold for the given weights.
pub fn lmpt_threshold(
    net: &Network,
    model: &SignalModel,
    weights: &FusionWeights,
    target_pfa: f64,
) -> Result<AdaptiveThreshold> {
    if weights.rows() != net.len() || weights.levels() != net.levels() {
        return Err(Error::invalid("weights do not match the network"));
    }
    let a0: Vec<Vec<f64>> = net
        .sensors()
        .iter()
        .map(|s| gaussian_cell_probs(&s.thresholds, model.sigma_n2().sqrt()))
        .collect();
    let rows: Vec<Vec<f64>> = (0..net.len()).map(|i| weights.row(i).to_vec()).collect();
    class_threshold(&rows, &a0, &vec![1.0; net.len()], target_pfa)
}

pub fn lmpt_decide(weights: &FusionWeights, reports: &[Codeword], threshold: f64) -> Result<DetectorVerdict> {
    Ok(DetectorVerdict::new(weights.statistic(reports)?, threshold))
}
