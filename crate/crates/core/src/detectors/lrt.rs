use super::{class_threshold, mix_class, DetectorVerdict, FusionWeights, Network};
use crate::analysis::Priors;
use crate::channel::AttackParams;
use crate::error::{Error, Result};
use crate::model::{Codeword, SignalModel};

/// Threshold of the clairvoyant LRT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrtThreshold {
    /// Gaussian-approximation threshold calibrated to the target PFA.
    Adaptive { target_pfa: f64 },
    /// `ln(pi0 / pi1)`.
    Bayes(Priors),
}

/// Per-class mixture pmfs under both hypotheses at the true parameters.
fn mixture_tables(net: &Network, model: &SignalModel, attack: &AttackParams) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let f0 = net.class_probs_at(model, 0.0).iter().map(|a| mix_class(a, attack.x())).collect();
    let f1 = net.class_probs_at(model, model.p()).iter().map(|a| mix_class(a, attack.x())).collect();
    (f0, f1)
}

/// Log-likelihood-ratio weights `ln f1 / f0` per class.
fn class_llr(net: &Network, f0: &[Vec<f64>], f1: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    f0.iter()
        .zip(f1)
        .enumerate()
        .map(|(c, (p0, p1))| {
            p0.iter()
                .zip(p1)
                .enumerate()
                .map(|(j, (&a, &b))| match (a > 0.0, b > 0.0) {
                    (true, true) => Ok((b / a).ln()),
                    (false, false) => Ok(0.0),
                    _ => Err(Error::ZeroProbability {
                        sensor: net.class_sensor(c).id,
                        codeword: j + 1,
                    }),
                })
                .collect()
        })
        .collect()
}

/// Per-sensor weights `ln P(u_i = v_j | H1) / P(u_i = v_j | H0)` with the
/// attack-aware pmfs at the true `p`, `alpha` and `P_A`.
pub fn lrt_weights(net: &Network, model: &SignalModel, attack: &AttackParams) -> Result<FusionWeights> {
    let (f0, f1) = mixture_tables(net, model, attack);
    let w = class_llr(net, &f0, &f1)?;
    Ok(FusionWeights::from_classes(net, &w, |_| true))
}

pub fn lrt_statistic(net: &Network, model: &SignalModel, attack: &AttackParams, reports: &[Codeword]) -> Result<f64> {
    net.check_reports(reports)?;
    lrt_weights(net, model, attack)?.statistic(reports)
}

pub fn lrt_decide(
    net: &Network,
    model: &SignalModel,
    attack: &AttackParams,
    reports: &[Codeword],
    rule: LrtThreshold,
) -> Result<DetectorVerdict> {
    net.check_reports(reports)?;
    let (f0, f1) = mixture_tables(net, model, attack);
    let w = class_llr(net, &f0, &f1)?;
    let stat = super::class_statistic(net, &w, reports, |_| true);
    match rule {
        LrtThreshold::Adaptive { target_pfa } => {
            let t = class_threshold(&w, &f0, &net.multiplicities(|_| true), target_pfa)?;
            Ok(DetectorVerdict::adaptive(stat, t))
        }
        LrtThreshold::Bayes(pr) => Ok(DetectorVerdict::new(stat, (pr.pi0 / pr.pi1).ln())),
    }
}
