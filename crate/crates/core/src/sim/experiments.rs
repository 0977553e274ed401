//! The two non-detection experiments: the attack-estimate accuracy study and
//! the blinding sweep.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::seed;
use super::sweep::{assign_roles, mixture_pmfs, observe, Coordinate, SweepRecord};
use crate::analysis::{crlb_attack_parameter, deflection_coefficient, predict_performance, statistic_moments};
use crate::channel::{blinding_product, FlipDraw};
use crate::detectors::{glrt_weights, lmpt_threshold, lmpt_weights, DetectorKind, Network};
use crate::error::{Error, Result};
use crate::model::{make_reference_thresholds, quantize_with, Codeword, Hypothesis, SensorSpec};

/// Estimates `x = alpha * P_A` from reference sensors alone, accumulating
/// reports over time, and compares the spread with the Cramér-Rao bound.
/// Emits one `MLE` record per coordinate and recorded step.
pub fn run_estimator(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    let model = cfg.model()?;
    let steps = cfg.report_steps.steps(cfg.time_steps);
    let mut out = Vec::new();
    for coord in Coordinate::grid(cfg) {
        let regular_t = cfg.thresholds.thresholds(coord.q, cfg.sigma_n2)?;
        let proto = SensorSpec::new(0, 1.0, regular_t.clone())?;
        let ref_spec = SensorSpec::new(0, 1.0, make_reference_thresholds(&proto, cfg.reference_offset, cfg.reference_side)?)?
            .reference();
        let levels = regular_t.levels();
        let anchor = cfg.reference_side.anchor(levels);
        let key = seed::coordinate_key(cfg.seed, &[0xe5, u64::from(coord.q), coord.n_ref as u64, coord.alpha.to_bits(), coord.p_attack.to_bits()]);
        let n_ref = coord.n_ref;

        let estimates: Vec<Vec<f64>> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = seed::stream(&key, trial);
                let h = if trial % 2 == 0 { Hypothesis::H0 } else { Hypothesis::H1 };
                let mut roles = vec![false; n_ref];
                assign_roles(cfg.role_mode, coord.alpha, n_ref, &mut rng, &mut roles);
                let (mut hits, mut total) = (0u64, 0u64);
                let mut xs = Vec::with_capacity(steps.len());
                let mut k = 0;
                for t in 1..=cfg.time_steps {
                    if t > 1 && cfg.role_mode == super::RoleMode::IidPerStep {
                        assign_roles(cfg.role_mode, coord.alpha, n_ref, &mut rng, &mut roles);
                    }
                    for &byz in &roles {
                        let y = observe(cfg, &model, &ref_spec, h, &mut rng);
                        let mut z = quantize_with(y, &ref_spec.thresholds);
                        if byz {
                            z = FlipDraw::sample(&mut rng).apply(z, levels, coord.p_attack);
                        }
                        total += 1;
                        hits += u64::from(z == anchor);
                    }
                    if k < steps.len() && steps[k] == t {
                        xs.push(1.0 - hits as f64 / total as f64);
                        k += 1;
                    }
                }
                xs
            })
            .collect();

        let x = coord.alpha * coord.p_attack;
        for (k, &t) in steps.iter().enumerate() {
            let n = estimates.len() as f64;
            let mean = estimates.iter().map(|v| v[k]).sum::<f64>() / n;
            let var = if estimates.len() > 1 {
                estimates.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                f64::NAN
            };
            let mut r = SweepRecord::blank("MLE", coord.q, n_ref, coord.alpha, coord.p_attack, t);
            r.x_hat_mean = mean;
            r.x_hat_var = var;
            r.crlb = crlb_attack_parameter(x, n_ref as u64 * u64::from(t))?.variance;
            r.trials = cfg.trials;
            out.push(r);
        }
    }
    Ok(out)
}

/// Sweeps the attack strength across the blinding point of each linear
/// rule on a homogeneous all-regular network. The weights are fixed (LMPT at
/// `p = 0`, GLRT at the true `p`) and the threshold is the attack-free one,
/// so the blinding point adds one extra row per `alpha`.
pub fn run_blinding(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    let model = cfg.model()?;
    if let Some(d) = cfg.detectors.iter().find(|d| !matches!(d, DetectorKind::Lmpt | DetectorKind::Glrt)) {
        return Err(Error::config(format!("the blinding experiment supports LMPT and GLRT, not {d}")));
    }
    let n = cfg.n_sensors;
    let mut out = Vec::new();
    for &kind in &cfg.detectors {
        for &q in &cfg.q_bits {
            let t = cfg.thresholds.thresholds(q, cfg.sigma_n2)?;
            let levels = t.levels();
            let net = Network::new((0..n).map(|i| SensorSpec::new(i, 1.0, t.clone())).collect::<Result<_>>()?)?;
            let w = match kind {
                DetectorKind::Lmpt => lmpt_weights(&net, &model, 0.0)?,
                _ => glrt_weights(&net, &model, model.p())?,
            };
            let threshold = lmpt_threshold(&net, &model, &w, cfg.target_pfa)?.value;
            let x_star = blinding_product(&net, &model, &w)?;
            for &alpha in &cfg.alpha {
                let mut xs: Vec<f64> = cfg.p_attack.iter().map(|pa| alpha * pa).collect();
                if alpha > 0.0 && x_star >= 0.0 && x_star <= alpha {
                    xs.push(x_star);
                }
                xs.sort_by(f64::total_cmp);
                xs.dedup();
                for x in xs {
                    let pa = if alpha > 0.0 { (x / alpha).min(1.0) } else { 0.0 };
                    let key = seed::coordinate_key(cfg.seed, &[0xb1, kind as u64, u64::from(q), alpha.to_bits(), x.to_bits()]);
                    let counts: Vec<(bool, bool)> = (0..cfg.trials)
                        .into_par_iter()
                        .map(|trial| {
                            let mut hit = [false; 2];
                            for (hi, h) in Hypothesis::BOTH.into_iter().enumerate() {
                                let mut rng = seed::stream(&key, 2 * trial + hi as u64);
                                let mut roles = vec![false; n];
                                assign_roles(cfg.role_mode, alpha, 0, &mut rng, &mut roles);
                                let mut s = 0.0;
                                for (i, &byz) in roles.iter().enumerate() {
                                    let sensor = &net.sensors()[i];
                                    let y = observe(cfg, &model, sensor, h, &mut rng);
                                    let mut z: Codeword = quantize_with(y, &sensor.thresholds);
                                    if byz {
                                        z = FlipDraw::sample(&mut rng).apply(z, levels, pa);
                                    }
                                    s += w.weight(i, z);
                                }
                                hit[hi] = s > threshold;
                            }
                            (hit[0], hit[1])
                        })
                        .collect();
                    let fa = counts.iter().filter(|c| c.0).count() as u64;
                    let det = counts.iter().filter(|c| c.1).count() as u64;
                    let mut r = SweepRecord::blank(kind.name(), q, 0, alpha, pa, 1);
                    r.trials = cfg.trials;
                    r.pf_emp = fa as f64 / cfg.trials as f64;
                    r.pd_emp = det as f64 / cfg.trials as f64;
                    r.pe_emp = cfg.priors.error_probability(r.pd_emp, r.pf_emp);
                    r.pe_ci = super::ci_half_width(r.pe_emp, cfg.trials);
                    let (f0, f1) = mixture_pmfs(&net, &model, x);
                    let m = statistic_moments(&w, &f0, &f1)?;
                    let pp = predict_performance(&m, threshold, cfg.priors);
                    r.pd_analytic = pp.pd;
                    r.pf_analytic = pp.pf;
                    r.pe_analytic = pp.pe;
                    r.deflection = deflection_coefficient(&m).unwrap_or(f64::NAN);
                    out.push(r);
                }
            }
        }
    }
    Ok(out)
}
