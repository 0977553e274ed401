//! Oracle comparisons shared by `oracle.rs` and the acceptance run.

use qsparse_core::analysis::statistic_moments;
use qsparse_core::channel::AttackParams;
use qsparse_core::detectors::{
    enhanced_decide, estimate_attack_parameter, glrt_decide, glrt_estimate_p, glrt_weights, glrtrs_decide,
    glrtrs_weights, lmpt_decide, lmpt_threshold, lmpt_weights, lmptrs_decide, lmptrs_weights, lrt_statistic,
    BaseDetector, EnhancedConfig, FusionWeights, Network, PSearch, ReputationState, ThresholdRule,
};
use qsparse_core::model::{Codeword, CodewordDistribution, ReferenceSide, SensorSpec, SignalModel, Thresholds};
use rand::Rng;

use super::*;

const PFA: f64 = 0.4;

fn model(par: Params) -> SignalModel {
    SignalModel::new(par.p, par.sx2, par.sn2, 100).unwrap()
}

fn dists(rows: &[Vec<f64>]) -> Vec<CodewordDistribution> {
    rows.iter().map(|r| CodewordDistribution::new(r.clone()).unwrap()).collect()
}

fn rows_of(w: &FusionWeights) -> Vec<Vec<f64>> {
    (0..w.rows()).map(|i| w.row(i).to_vec()).collect()
}

fn random_params(rng: &mut ChaCha8Rng) -> Params {
    Params {
        p: rng.random_range(0.02..0.4),
        sx2: rng.random_range(0.5..6.0),
        sn2: rng.random_range(0.5..2.0),
    }
}

/// Moments of `rows` under `pmfs` restricted to the sensors in `keep`.
fn moments_on(toy: &Toy, rows: &[Vec<f64>], pmfs: &[Vec<f64>], keep: impl Fn(usize) -> bool) -> (f64, f64) {
    let mut mean = 0.0;
    let mut var = 0.0;
    for i in (0..toy.len()).filter(|&i| keep(i)) {
        // exhaustive over this sensor's codewords; sensors are independent
        let m: f64 = rows[i].iter().zip(&pmfs[i]).map(|(w, f)| w * f).sum();
        let v: f64 = rows[i].iter().zip(&pmfs[i]).map(|(w, f)| f * (w - m).powi(2)).sum();
        mean += m;
        var += v;
    }
    (mean, var)
}

/// Exhaustive comparison on every network with `N <= 4` sensors and
/// `q <= 2` bits: statistics of all rules, their thresholds, and the
/// analytic moments of their statistics. Returns the worst relative error.
pub fn enumeration(seed: u64, draws_per_shape: usize) -> Worst {
    let mut rng = rng(seed);
    let mut worst = Worst::default();
    let search = PSearch::default();
    for bits in 1..=2u32 {
        for n in 1..=4usize {
            for _ in 0..draws_per_shape {
                let par = random_params(&mut rng);
                let m = model(par);
                let alpha = rng.random_range(0.0..1.0);
                let p_attack = rng.random_range(0.0..1.0);
                let attack = AttackParams::new(alpha, p_attack).unwrap();
                let x = alpha * p_attack;

                // attack-aware rules, on an all-regular network
                let toy = Toy::random(&mut rng, n, 0, bits);
                let a0 = toy.honest(par, 0.0);
                let a1 = toy.honest(par, par.p);
                let f0: Vec<Vec<f64>> = a0.iter().map(|a| mixture(a, alpha, p_attack)).collect();
                let f1: Vec<Vec<f64>> = a1.iter().map(|a| mixture(a, alpha, p_attack)).collect();

                let lmpt_rows: Vec<Vec<f64>> = (0..toy.len())
                    .map(|i| {
                        let d = d_cells_dp(&toy.cuts[i], par, 0.0, toy.gains[i]);
                        d.iter().zip(&a0[i]).map(|(d, a)| d / a).collect()
                    })
                    .collect();
                let lw = lmpt_weights(&toy.net, &m, 0.0).unwrap();
                let lt = lmpt_threshold(&toy.net, &m, &lw, PFA).unwrap();
                let (m0, v0) = enumerate_moments(&toy, &a0, |u| weighted(&lmpt_rows, u));
                worst.see(lt.value, m0 + q_inv(PFA) * v0.sqrt());

                for u in toy.all_reports() {
                    let llr = (joint(&f1, &u) / joint(&f0, &u)).ln();
                    worst.see(lrt_statistic(&toy.net, &m, &attack, &u).unwrap(), llr);

                    let g = glrt_decide(&toy.net, &m, &u, ThresholdRule::Adaptive { target_pfa: PFA }, &search).unwrap();
                    let p_hat = glrt_estimate_p(&toy.net, &m, &u, &search).unwrap();
                    let a_hat = toy.honest(par, p_hat);
                    let g_rows: Vec<Vec<f64>> =
                        a_hat.iter().zip(&a0).map(|(h, z)| h.iter().zip(z).map(|(h, z)| h - z).collect()).collect();
                    worst.see(g.statistic, weighted(&g_rows, &u));
                    if p_hat > 0.0 {
                        let (m0, v0) = enumerate_moments(&toy, &a0, |v| weighted(&g_rows, v));
                        worst.see(g.threshold, m0 + q_inv(PFA) * v0.sqrt());
                    }
                    worst.see(lmpt_decide(&lw, &u, lt.value).unwrap().statistic, weighted(&lmpt_rows, &u));
                }

                // analytic moments of each weight table under the attacked pmfs
                let p_fix = rng.random_range(0.01..0.3);
                let a_fix = toy.honest(par, p_fix);
                let g_rows: Vec<Vec<f64>> =
                    a_fix.iter().zip(&a0).map(|(h, z)| h.iter().zip(z).map(|(h, z)| h - z).collect()).collect();
                let llr_rows: Vec<Vec<f64>> = f0
                    .iter()
                    .zip(&f1)
                    .map(|(z, o)| z.iter().zip(o).map(|(z, o)| (o / z).ln()).collect())
                    .collect();
                for (w, rows) in [
                    (glrt_weights(&toy.net, &m, p_fix).unwrap(), &g_rows),
                    (lw.clone(), &lmpt_rows),
                    (FusionWeights::from_rows(llr_rows.clone()).unwrap(), &llr_rows),
                ] {
                    let mm = statistic_moments(&w, &dists(&f0), &dists(&f1)).unwrap();
                    let (e0, s0) = enumerate_moments(&toy, &f0, |u| weighted(rows, u));
                    let (e1, s1) = enumerate_moments(&toy, &f1, |u| weighted(rows, u));
                    worst.see(mm.mean_h0, e0);
                    worst.see(mm.var_h0, s0);
                    worst.see(mm.mean_h1, e1);
                    worst.see(mm.var_h1, s1);
                }

                // reference-sensor rules: at least one reference and one regular sensor
                if n >= 2 {
                    let n_ref = rng.random_range(1..n);
                    let toy = Toy::random(&mut rng, n, n_ref, bits);
                    let anchor = ReferenceSide::Low.anchor(toy.levels());
                    let a0 = toy.honest(par, 0.0);
                    let regular = |i: usize| i >= n_ref;
                    for u in toy.all_reports() {
                        let x_hat = estimate_attack_parameter(&u[..n_ref], anchor).unwrap();
                        let f0x: Vec<Vec<f64>> = a0.iter().map(|a| mixture(a, 1.0, x_hat)).collect();

                        let v = glrtrs_decide(&toy.net, &m, &u, x_hat, PFA, &search).unwrap();
                        let p_hat = v.p_hat.unwrap();
                        let f1x: Vec<Vec<f64>> =
                            toy.honest(par, p_hat).iter().map(|a| mixture(a, 1.0, x_hat)).collect();
                        let rows: Vec<Vec<f64>> = (0..toy.len())
                            .map(|i| {
                                if regular(i) {
                                    f1x[i].iter().zip(&f0x[i]).map(|(a, b)| a - b).collect()
                                } else {
                                    vec![0.0; toy.levels()]
                                }
                            })
                            .collect();
                        worst.see(v.statistic, weighted(&rows, &u));
                        if p_hat > 0.0 {
                            let (m0, v0) = moments_on(&toy, &rows, &f0x, regular);
                            worst.see(v.threshold, m0 + q_inv(PFA) * v0.sqrt());
                        }

                        let k = toy.levels() as f64;
                        let rows: Vec<Vec<f64>> = (0..toy.len())
                            .map(|i| {
                                if regular(i) {
                                    let d = d_cells_dp(&toy.cuts[i], par, 0.0, toy.gains[i]);
                                    d.iter()
                                        .zip(&f0x[i])
                                        .map(|(d, f)| d * (1.0 - x_hat * k / (k - 1.0)) / f)
                                        .collect()
                                } else {
                                    vec![0.0; toy.levels()]
                                }
                            })
                            .collect();
                        let v = lmptrs_decide(&toy.net, &m, &u, x_hat, PFA).unwrap();
                        worst.see(v.statistic, weighted(&rows, &u));
                        let (m0, v0) = moments_on(&toy, &rows, &f0x, regular);
                        if v0 > 0.0 {
                            worst.see(v.threshold, m0 + q_inv(PFA) * v0.sqrt());
                        }
                    }

                    // moments of the reference-sensor weight tables, by full enumeration
                    let f0: Vec<Vec<f64>> = a0.iter().map(|a| mixture(a, 1.0, x)).collect();
                    let f1: Vec<Vec<f64>> = toy.honest(par, par.p).iter().map(|a| mixture(a, 1.0, x)).collect();
                    for w in [
                        glrtrs_weights(&toy.net, &m, p_fix, x).unwrap(),
                        lmptrs_weights(&toy.net, &m, x).unwrap(),
                    ] {
                        let rows = rows_of(&w);
                        let mm = statistic_moments(&w, &dists(&f0), &dists(&f1)).unwrap();
                        let (e0, s0) = enumerate_moments(&toy, &f0, |u| weighted(&rows, u));
                        let (e1, s1) = enumerate_moments(&toy, &f1, |u| weighted(&rows, u));
                        worst.see(mm.mean_h0, e0);
                        worst.see(mm.var_h0, s0);
                        worst.see(mm.mean_h1, e1);
                        worst.see(mm.var_h1, s1);
                    }
                }
            }
        }
    }
    worst
}

/// Largest relative error between the library's LMPT / LMPTRS weights and
/// central differences of the log-pmf in `p` at `p = 0`.
pub fn gradients(seed: u64, configs: usize) -> f64 {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    let h = 1e-6;
    for _ in 0..configs {
        let par = random_params(&mut rng);
        let bits = rng.random_range(1..=3u32);
        let toy = Toy::random(&mut rng, 1, 0, bits);
        let m = model(par);
        let x = rng.random_range(0.0..0.45);
        let cuts = &toy.cuts[0];
        let g = toy.gains[0];
        let at = |p: f64, x: f64| mixture(&cells(cuts, beta(par, p, g)), 1.0, x);
        let w = lmpt_weights(&toy.net, &m, 0.0).unwrap();
        let wx = lmptrs_weights(&toy.net, &m, x).unwrap();
        for (lib, x) in [(w.row(0), 0.0), (wx.row(0), x)] {
            let (up, down) = (at(h, x), at(-h, x));
            for j in 0..toy.levels() {
                let fd = (up[j].ln() - down[j].ln()) / (2.0 * h);
                let err = (lib[j] - fd).abs() / fd.abs().max(1e-6);
                worst = worst.max(err);
            }
        }
    }
    worst
}

/// Statistic gaps of the collapse identities on shared report streams:
/// GLRTRS at `x = 0` against GLRT on the regular sensors, LMPTRS at `x = 0`
/// against LMPT, and the enhanced rules with nothing flagged against their
/// base rule.
pub fn collapse(seed: u64, trials: usize) -> Worst {
    let mut rng = rng(seed);
    let mut worst = Worst::default();
    let search = PSearch::default();
    for _ in 0..trials {
        let bits = rng.random_range(1..=2u32);
        let par = random_params(&mut rng);
        let m = model(par);
        let (n_ref, n_reg) = (rng.random_range(1..20), rng.random_range(1..40));
        let k = 1usize << bits;
        let mut finite: Vec<f64> = (0..k - 1).map(|j| -0.6 + 0.5 * j as f64).collect();
        finite[0] += rng.random_range(-0.2..0.2);
        let t = Thresholds::from_finite(&finite).unwrap();
        let proto = SensorSpec::new(0, 1.0, t.clone()).unwrap();
        let rt = qsparse_core::model::make_reference_thresholds(&proto, 6.0, ReferenceSide::Low).unwrap();
        let mut sensors: Vec<SensorSpec> =
            (0..n_ref).map(|i| SensorSpec::new(i, 1.0, rt.clone()).unwrap().reference()).collect();
        sensors.extend((0..n_reg).map(|i| SensorSpec::new(n_ref + i, 1.0, t.clone()).unwrap()));
        let net = Network::new(sensors).unwrap();
        let reg_net = Network::new((0..n_reg).map(|i| SensorSpec::new(i, 1.0, t.clone()).unwrap()).collect()).unwrap();
        let anchor = ReferenceSide::Low.anchor(k);

        let mut state = ReputationState::new(&net, 0.3);
        let mut ref_hits = 0u64;
        for step in 0..4u64 {
            let mut u: Vec<Codeword> = (0..n_ref)
                .map(|_| if rng.random_bool(0.8) { anchor } else { Codeword::from_slot(rng.random_range(0..k)) })
                .collect();
            u.extend((0..n_reg).map(|_| Codeword::from_slot(rng.random_range(0..k))));
            let reg = &u[n_ref..];

            let a = glrtrs_decide(&net, &m, &u, 0.0, PFA, &search).unwrap();
            let b = glrt_decide(&reg_net, &m, reg, ThresholdRule::Adaptive { target_pfa: PFA }, &search).unwrap();
            worst.see(a.statistic, b.statistic);
            worst.see(a.threshold, b.threshold);

            let a = lmptrs_decide(&net, &m, &u, 0.0, PFA).unwrap();
            let w = lmpt_weights(&reg_net, &m, 0.0).unwrap();
            let b = lmpt_decide(&w, reg, lmpt_threshold(&reg_net, &m, &w, PFA).unwrap().value).unwrap();
            worst.see(a.statistic, b.statistic);
            worst.see(a.threshold, b.threshold);

            ref_hits += u[..n_ref].iter().filter(|&&c| c == anchor).count() as u64;
            let x_cum = 1.0 - ref_hits as f64 / ((step + 1) * n_ref as u64) as f64;
            let cfg = EnhancedConfig::new(BaseDetector::Glrtrs, 0.3, f64::INFINITY, PFA, anchor);
            let mut s_l = state.clone();
            let e = enhanced_decide(&net, &m, &mut state, &u, &cfg).unwrap();
            let base = glrtrs_decide(&net, &m, &u, x_cum.max(0.0), PFA, &search).unwrap();
            worst.see(e.statistic, base.statistic);
            worst.see(e.threshold, base.threshold);
            let cfg = EnhancedConfig { base: BaseDetector::Lmptrs, ..cfg };
            let e = enhanced_decide(&net, &m, &mut s_l, &u, &cfg).unwrap();
            let base = lmptrs_decide(&net, &m, &u, x_cum.max(0.0), PFA).unwrap();
            worst.see(e.statistic, base.statistic);
            worst.see(e.threshold, base.threshold);
        }
    }
    worst
}
