use super::lmpt::cell_derivative;
use super::{
    check_x, class_statistic, class_threshold, mix_class, mle_sparsity, DetectorVerdict, FusionWeights, Network,
    PSearch,
};
use crate::error::{Error, Result};
use crate::model::{Codeword, SignalModel};

/// `x_hat = 1 - anchor_count / total`, clamped to `[0, 1]`.
pub fn estimate_from_counts(anchor_count: u64, total: u64) -> Result<f64> {
    if total == 0 {
        return Err(Error::invalid("attack estimate needs at least one reference report"));
    }
    if anchor_count > total {
        return Err(Error::invalid(format!("{anchor_count} anchor reports out of {total}")));
    }
    Ok((1.0 - anchor_count as f64 / total as f64).clamp(0.0, 1.0))
}

/// MLE of `alpha * P_A` from reference-sensor reports: an honest reference
/// sensor always sends `anchor`, so every other codeword is a flip.
pub fn estimate_attack_parameter(reference_reports: &[Codeword], anchor: Codeword) -> Result<f64> {
    let hits = reference_reports.iter().filter(|&&c| c == anchor).count();
    estimate_from_counts(hits as u64, reference_reports.len() as u64)
}

/// Anchor hits and total among the reference sensors of one report vector.
pub fn reference_anchor_counts(net: &Network, reports: &[Codeword], anchor: Codeword) -> Result<(u64, u64)> {
    net.check_reports(reports)?;
    let mut hits = 0;
    let mut total = 0;
    for (s, c) in net.sensors().iter().zip(reports) {
        if s.is_reference {
            total += 1;
            hits += u64::from(*c == anchor);
        }
    }
    Ok((hits, total))
}

fn regular(net: &Network) -> impl Fn(usize) -> bool + '_ {
    move |i| !net.is_reference(i)
}

/// Sparsity MLE over the regular sensors with reports passed through the
/// flip channel at strength `x_hat`.
pub fn glrtrs_estimate_p(
    net: &Network,
    model: &SignalModel,
    reports: &[Codeword],
    x_hat: f64,
    search: &PSearch,
) -> Result<f64> {
    net.check_reports(reports)?;
    check_x(x_hat)?;
    let counts = net.class_counts(reports, regular(net));
    mle_sparsity(net, model, &counts, x_hat, search)
}

/// `F = f1(p_hat, x) - f0(x)` per class, and `f0(x)`.
pub(crate) fn glrtrs_class_weights(
    net: &Network,
    model: &SignalModel,
    p_hat: f64,
    x: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let f0: Vec<Vec<f64>> = net.class_probs_at(model, 0.0).iter().map(|a| mix_class(a, x)).collect();
    let f1: Vec<Vec<f64>> = net.class_probs_at(model, p_hat).iter().map(|a| mix_class(a, x)).collect();
    let w = f1
        .iter()
        .zip(&f0)
        .map(|(u, v)| u.iter().zip(v).map(|(a, b)| a - b).collect())
        .collect();
    (w, f0)
}

/// Weights `F_{i,j} = f_{i,j,1} - f_{i,j,0}` on regular sensors; reference
/// rows are zero.
pub fn glrtrs_weights(net: &Network, model: &SignalModel, p_hat: f64, x_hat: f64) -> Result<FusionWeights> {
    check_x(x_hat)?;
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(Error::invalid(format!("sparsity estimate must lie in [0, 1], got {p_hat}")));
    }
    let (w, _) = glrtrs_class_weights(net, model, p_hat, x_hat);
    Ok(FusionWeights::from_classes(net, &w, regular(net)))
}

/// GLRTRS on the sensors picked by `select`, at attack strength `x`.
pub(crate) fn glrtrs_on(
    net: &Network,
    model: &SignalModel,
    reports: &[Codeword],
    x: f64,
    target_pfa: f64,
    search: &PSearch,
    mask: &[bool],
) -> Result<DetectorVerdict> {
    let select = |i: usize| mask[i];
    let counts = net.class_counts(reports, select);
    // with nobody left the likelihood is flat; report p = 0 rather than the
    // midpoint of the search domain
    let p_hat = if counts.iter().all(|&n| n == 0.0) {
        0.0
    } else {
        mle_sparsity(net, model, &counts, x, search)?
    };
    let (w, f0) = glrtrs_class_weights(net, model, p_hat, x);
    let stat = class_statistic(net, &w, reports, select);
    let t = class_threshold(&w, &f0, &net.multiplicities(select), target_pfa)?;
    let mut v = DetectorVerdict::adaptive(stat, t);
    v.p_hat = Some(p_hat);
    Ok(v)
}

/// GLRT with reference sensors: the attack estimate enters both the sparsity
/// MLE and the fusion weights, and the threshold is calibrated under the
/// estimated H0 mixture.
pub fn glrtrs_decide(
    net: &Network,
    model: &SignalModel,
    reports: &[Codeword],
    x_hat: f64,
    target_pfa: f64,
    search: &PSearch,
) -> Result<DetectorVerdict> {
    net.check_reports(reports)?;
    check_x(x_hat)?;
    let mut v = glrtrs_on(net, model, reports, x_hat, target_pfa, search, &net.regular_mask())?;
    v.x_hat = Some(x_hat);
    Ok(v)
}

/// `d ln f_j(p, x) / dp` at `p = 0` per class, and `f0(x)`.
pub(crate) fn lmptrs_class_weights(
    net: &Network,
    model: &SignalModel,
    x: f64,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let k = net.levels() as f64;
    let shrink = 1.0 - x * k / (k - 1.0);
    let a0 = net.class_probs_at(model, 0.0);
    let mut w = Vec::with_capacity(net.n_classes());
    let mut f0 = Vec::with_capacity(net.n_classes());
    for (c, a) in a0.iter().enumerate() {
        let s = net.class_sensor(c);
        let f = mix_class(a, x);
        if s.is_reference {
            // never scored; the anchor cell can hit zero mass at x = 1
            w.push(vec![0.0; f.len()]);
            f0.push(f);
            continue;
        }
        let core = cell_derivative(model, s, 0.0);
        let mut row = Vec::with_capacity(f.len());
        for (j, (&fj, &dj)) in f.iter().zip(&core).enumerate() {
            if !(fj > 0.0) {
                return Err(Error::ZeroProbability {
                    sensor: s.id,
                    codeword: j + 1,
                });
            }
            row.push(dj * shrink / fj);
        }
        w.push(row);
        f0.push(f);
    }
    Ok((w, f0))
}

/// Score weights of the mixture pmf at `p = 0`:
/// `dA/dp * (1 - x 2^q / (2^q - 1)) / f(x)`, zero on reference rows. At
/// `x_hat = 0` this is exactly the LMPT weight.
pub fn lmptrs_weights(net: &Network, model: &SignalModel, x_hat: f64) -> Result<FusionWeights> {
    check_x(x_hat)?;
    let (w, _) = lmptrs_class_weights(net, model, x_hat)?;
    Ok(FusionWeights::from_classes(net, &w, regular(net)))
}

pub(crate) fn lmptrs_on(
    net: &Network,
    model: &SignalModel,
    reports: &[Codeword],
    x: f64,
    target_pfa: f64,
    mask: &[bool],
) -> Result<DetectorVerdict> {
    let select = |i: usize| mask[i];
    let (w, f0) = lmptrs_class_weights(net, model, x)?;
    let stat = class_statistic(net, &w, reports, select);
    let t = class_threshold(&w, &f0, &net.multiplicities(select), target_pfa)?;
    Ok(DetectorVerdict::adaptive(stat, t))
}

pub fn lmptrs_decide(
    net: &Network,
    model: &SignalModel,
    reports: &[Codeword],
    x_hat: f64,
    target_pfa: f64,
) -> Result<DetectorVerdict> {
    net.check_reports(reports)?;
    check_x(x_hat)?;
    let mut v = lmptrs_on(net, model, reports, x_hat, target_pfa, &net.regular_mask())?;
    v.x_hat = Some(x_hat);
    Ok(v)
}
