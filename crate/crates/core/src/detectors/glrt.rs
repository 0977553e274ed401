use super::{class_statistic, class_threshold, mle_sparsity, DetectorVerdict, FusionWeights, Network, PSearch, ThresholdRule};
use crate::error::{Error, Result};
use crate::model::{Codeword, SignalModel};

/// Attack-free sparsity MLE over every sensor of the network.
pub fn glrt_estimate_p(net: &Network, model: &SignalModel, reports: &[Codeword], search: &PSearch) -> Result<f64> {
    net.check_reports(reports)?;
    let counts = net.class_counts(reports, |_| true);
    mle_sparsity(net, model, &counts, 0.0, search)
}

pub(crate) fn glrt_class_weights(net: &Network, model: &SignalModel, p_hat: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let a0 = net.class_probs_at(model, 0.0);
    let a1 = net.class_probs_at(model, p_hat);
    let g = a1
        .iter()
        .zip(&a0)
        .map(|(x1, x0)| x1.iter().zip(x0).map(|(u, v)| u - v).collect())
        .collect();
    (g, a0)
}

/// Weights `g_{i,j} = A_{i,j,1}(p_hat) - A_{i,j,0}`.
pub fn glrt_weights(net: &Network, model: &SignalModel, p_hat: f64) -> Result<FusionWeights> {
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(Error::invalid(format!("sparsity estimate must lie in [0, 1], got {p_hat}")));
    }
    let (g, _) = glrt_class_weights(net, model, p_hat);
    Ok(FusionWeights::from_classes(net, &g, |_| true))
}

/// Attack-unaware GLRT: plug the sparsity MLE into the honest pmfs and
/// compare `sum_i g_{i,u_i}` with the threshold. The adaptive threshold is
/// computed from the honest H0 pmfs, as the rule has no notion of an attack.
pub fn glrt_decide(
    net: &Network,
    model: &SignalModel,
    reports: &[Codeword],
    rule: ThresholdRule,
    search: &PSearch,
) -> Result<DetectorVerdict> {
    let p_hat = glrt_estimate_p(net, model, reports, search)?;
    let (g, a0) = glrt_class_weights(net, model, p_hat);
    let stat = class_statistic(net, &g, reports, |_| true);
    let mut v = match rule {
        ThresholdRule::Fixed(t) => DetectorVerdict::new(stat, t),
        ThresholdRule::Adaptive { target_pfa } => {
            DetectorVerdict::adaptive(stat, class_threshold(&g, &a0, &net.multiplicities(|_| true), target_pfa)?)
        }
    };
    v.p_hat = Some(p_hat);
    Ok(v)
}
