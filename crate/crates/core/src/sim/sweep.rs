//! Detection sweeps: one scenario per sweep coordinate, independent trials
//! run in parallel, results reduced in trial order.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, LrtThresholdMode, RoleMode, Surrogate};
use super::{ci_half_width, seed};
use crate::analysis::{
    adaptive_threshold, deflection_coefficient, predict_performance, statistic_moments, PerformancePoint,
};
use crate::channel::{mixture_codeword_pmf_x, AttackParams, FlipDraw};
use crate::detectors::{
    enhanced_decide, estimate_from_counts, glrt_decide, glrt_weights, glrtrs_decide, glrtrs_weights, lmpt_threshold,
    lmpt_weights, lmptrs_decide, lmptrs_weights, lrt_weights, BaseDetector, DetectorKind, EnhancedConfig,
    FusionWeights, Network, ReputationState, ThresholdRule,
};
use crate::error::Result;
use crate::model::{
    honest_codeword_pmf, make_reference_thresholds, quantize_with, sample_asymptotic_observation,
    sample_sparse_observation, Codeword, CodewordDistribution, Hypothesis, SensorSpec, SignalModel, Thresholds,
};

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coordinate {
    pub q: u32,
    pub n_ref: usize,
    pub alpha: f64,
    pub p_attack: f64,
}

impl Coordinate {
    fn key_words(&self) -> [u64; 4] {
        [u64::from(self.q), self.n_ref as u64, self.alpha.to_bits(), self.p_attack.to_bits()]
    }

    /// Every coordinate of the config in sweep order.
    pub fn grid(cfg: &ExperimentConfig) -> Vec<Coordinate> {
        let mut v = Vec::new();
        for &q in &cfg.q_bits {
            for &n_ref in &cfg.n_reference {
                for &alpha in &cfg.alpha {
                    for &p_attack in &cfg.p_attack {
                        v.push(Coordinate {
                            q,
                            n_ref,
                            alpha,
                            p_attack,
                        });
                    }
                }
            }
        }
        v
    }
}

/// One row of experiment output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub detector: String,
    pub q: u32,
    pub alpha: f64,
    pub p_attack: f64,
    pub t: u32,
    pub pe_emp: f64,
    pub pe_ci: f64,
    pub pd_emp: f64,
    pub pf_emp: f64,
    pub pe_analytic: f64,
    pub pd_analytic: f64,
    pub pf_analytic: f64,
    pub x_hat_mean: f64,
    pub p_hat_mean: f64,
    pub n_ref: usize,
    pub tau: f64,
    pub trials: u64,
    pub errors: u64,
    pub x_hat_var: f64,
    pub crlb: f64,
    pub deflection: f64,
}

impl SweepRecord {
    pub(crate) fn blank(detector: &str, q: u32, n_ref: usize, alpha: f64, p_attack: f64, t: u32) -> Self {
        SweepRecord {
            detector: detector.to_string(),
            q,
            alpha,
            p_attack,
            t,
            pe_emp: f64::NAN,
            pe_ci: f64::NAN,
            pd_emp: f64::NAN,
            pf_emp: f64::NAN,
            pe_analytic: f64::NAN,
            pd_analytic: f64::NAN,
            pf_analytic: f64::NAN,
            x_hat_mean: f64::NAN,
            p_hat_mean: f64::NAN,
            n_ref,
            tau: f64::NAN,
            trials: 0,
            errors: 0,
            x_hat_var: f64::NAN,
            crlb: f64::NAN,
            deflection: f64::NAN,
        }
    }
}

/// A detector column of the output: the enhanced rules get one per `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Slot {
    kind: DetectorKind,
    tau: Option<f64>,
}

fn slots(cfg: &ExperimentConfig) -> Vec<Slot> {
    let mut v = Vec::new();
    for &kind in &cfg.detectors {
        if kind.is_enhanced() {
            v.extend(cfg.filter_tau.iter().map(|&t| Slot { kind, tau: Some(t) }));
        } else {
            v.push(Slot { kind, tau: None });
        }
    }
    v
}

/// Verdict of one detector at one recorded step; estimates are NaN when the
/// rule does not produce them.
#[derive(Debug, Clone, Copy)]
pub struct Outcome {
    pub decide_h1: bool,
    pub x_hat: f64,
    pub p_hat: f64,
}

/// Bitwise comparison, so that two NaN estimates compare equal.
impl PartialEq for Outcome {
    fn eq(&self, other: &Self) -> bool {
        self.decide_h1 == other.decide_h1
            && self.x_hat.to_bits() == other.x_hat.to_bits()
            && self.p_hat.to_bits() == other.p_hat.to_bits()
    }
}

/// Verdicts of one trial, indexed `slot * n_steps + step`; `None` marks a
/// detector error.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub h0: Vec<Option<Outcome>>,
    pub h1: Vec<Option<Outcome>>,
}

type Prepared = std::result::Result<(FusionWeights, f64), String>;

/// Everything about a coordinate that does not change between trials.
pub(crate) struct Scenario<'a> {
    cfg: &'a ExperimentConfig,
    coord: Coordinate,
    model: SignalModel,
    attack: AttackParams,
    regular_t: Thresholds,
    reference_t: Thresholds,
    base: Network,
    rs: Network,
    anchor: Codeword,
    slots: Vec<Slot>,
    steps: Vec<u32>,
    lrt: Option<Prepared>,
    lmpt: Option<Prepared>,
    key: [u8; 32],
}

impl<'a> Scenario<'a> {
    pub(crate) fn new(cfg: &'a ExperimentConfig, coord: Coordinate) -> Result<Self> {
        let model = cfg.model()?;
        let attack = AttackParams::new(coord.alpha, coord.p_attack)?;
        let regular_t = cfg.thresholds.thresholds(coord.q, cfg.sigma_n2)?;
        let proto = SensorSpec::new(0, 1.0, regular_t.clone())?;
        let reference_t = make_reference_thresholds(&proto, cfg.reference_offset, cfg.reference_side)?;
        let n = cfg.network_size(coord.n_ref);
        let base = Network::new(
            (0..n)
                .map(|i| SensorSpec::new(i, 1.0, regular_t.clone()))
                .collect::<Result<_>>()?,
        )?;
        let rs = Network::new(
            (0..n)
                .map(|i| {
                    if i < coord.n_ref {
                        SensorSpec::new(i, 1.0, reference_t.clone()).map(SensorSpec::reference)
                    } else {
                        SensorSpec::new(i, 1.0, regular_t.clone())
                    }
                })
                .collect::<Result<_>>()?,
        )?;
        let slots = slots(cfg);
        let has = |k: DetectorKind| slots.iter().any(|s| s.kind == k);
        let lrt = has(DetectorKind::Lrt).then(|| prepare_lrt(cfg, &base, &model, &attack));
        let lmpt = has(DetectorKind::Lmpt).then(|| prepare_lmpt(cfg, &base, &model));
        let mut words = coord.key_words().to_vec();
        words.push(n as u64);
        Ok(Scenario {
            cfg,
            coord,
            model,
            attack,
            anchor: cfg.reference_side.anchor(regular_t.levels()),
            regular_t,
            reference_t,
            base,
            rs,
            slots,
            steps: cfg.report_steps.steps(cfg.time_steps),
            lrt,
            lmpt,
            key: seed::coordinate_key(cfg.seed, &words),
        })
    }
}

fn prepare_lrt(cfg: &ExperimentConfig, net: &Network, model: &SignalModel, attack: &AttackParams) -> Prepared {
    let build = || -> Result<(FusionWeights, f64)> {
        let w = lrt_weights(net, model, attack)?;
        let t = match cfg.lrt_threshold {
            LrtThresholdMode::Bayes => (cfg.priors.pi0 / cfg.priors.pi1).ln(),
            LrtThresholdMode::Adaptive => {
                let (f0, f1) = mixture_pmfs(net, model, attack.x());
                adaptive_threshold(&statistic_moments(&w, &f0, &f1)?, cfg.target_pfa)?.value
            }
        };
        Ok((w, t))
    };
    build().map_err(|e| e.to_string())
}

fn prepare_lmpt(cfg: &ExperimentConfig, net: &Network, model: &SignalModel) -> Prepared {
    let build = || -> Result<(FusionWeights, f64)> {
        let w = lmpt_weights(net, model, 0.0)?;
        let t = lmpt_threshold(net, model, &w, cfg.target_pfa)?.value;
        Ok((w, t))
    };
    build().map_err(|e| e.to_string())
}

/// Per-sensor report pmfs under both hypotheses at attack strength `x`.
pub(crate) fn mixture_pmfs(
    net: &Network,
    model: &SignalModel,
    x: f64,
) -> (Vec<CodewordDistribution>, Vec<CodewordDistribution>) {
    net.sensors()
        .iter()
        .map(|s| {
            (
                mixture_codeword_pmf_x(&honest_codeword_pmf(model, s, Hypothesis::H0), x),
                mixture_codeword_pmf_x(&honest_codeword_pmf(model, s, Hypothesis::H1), x),
            )
        })
        .unzip()
}

fn draw_roles(sc: &Scenario, rng: &mut ChaCha8Rng, roles: &mut [bool]) {
    assign_roles(sc.cfg.role_mode, sc.coord.alpha, sc.coord.n_ref, rng, roles);
}

/// Marks Byzantine sensors; the first `n_ref` entries are reference sensors.
pub(crate) fn assign_roles(mode: RoleMode, alpha: f64, n_ref: usize, rng: &mut ChaCha8Rng, roles: &mut [bool]) {
    let n = roles.len();
    roles.iter_mut().for_each(|r| *r = false);
    match mode {
        RoleMode::Stratified => {
            // the guard keeps products like 0.3 * 80 from rounding down
            let k_ref = ((alpha * n_ref as f64) + 1e-9).floor() as usize;
            let k_reg = ((alpha * (n - n_ref) as f64) + 1e-9).floor() as usize;
            for i in sample(rng, n_ref, k_ref.min(n_ref)) {
                roles[i] = true;
            }
            for i in sample(rng, n - n_ref, k_reg.min(n - n_ref)) {
                roles[n_ref + i] = true;
            }
        }
        RoleMode::Iid | RoleMode::IidPerStep => {
            for r in roles.iter_mut() {
                *r = rng.random::<f64>() < alpha;
            }
        }
    }
}

pub(crate) fn observe(
    cfg: &ExperimentConfig,
    model: &SignalModel,
    sensor: &SensorSpec,
    h: Hypothesis,
    rng: &mut ChaCha8Rng,
) -> f64 {
    match cfg.surrogate {
        Surrogate::Asymptotic => sample_asymptotic_observation(model, sensor, h, rng),
        Surrogate::ExactBg => sample_sparse_observation(model, sensor, h, rng),
    }
}

fn run_hypothesis(sc: &Scenario, h: Hypothesis, rng: &mut ChaCha8Rng) -> Vec<Option<Outcome>> {
    let cfg = sc.cfg;
    let n = sc.base.len();
    let n_ref = sc.coord.n_ref;
    let levels = sc.regular_t.levels();
    let pa = sc.coord.p_attack;
    let n_steps = sc.steps.len();
    let mut out = vec![None; sc.slots.len() * n_steps];

    let mut roles = vec![false; n];
    draw_roles(sc, rng, &mut roles);
    let mut enhanced: Vec<Option<(ReputationState, EnhancedConfig)>> = sc
        .slots
        .iter()
        .map(|s| {
            let base = match s.kind {
                DetectorKind::EGlrtrs => BaseDetector::Glrtrs,
                DetectorKind::ELmptrs => BaseDetector::Lmptrs,
                _ => return None,
            };
            let mut ec = EnhancedConfig::new(base, sc.coord.alpha, s.tau?, cfg.target_pfa, sc.anchor);
            ec.p_nominal = cfg.filter_p_nominal;
            ec.alpha_update = cfg.alpha_update;
            ec.history = cfg.filter_history;
            ec.search = cfg.p_search;
            Some((ReputationState::new(&sc.rs, sc.coord.alpha), ec))
        })
        .collect();

    let mut base_r = vec![Codeword::from_slot(0); n];
    let mut rs_r = base_r.clone();
    let (mut ref_hits, mut ref_total) = (0u64, 0u64);
    let mut k = 0;
    for t in 1..=cfg.time_steps {
        if t > 1 && cfg.role_mode == RoleMode::IidPerStep {
            draw_roles(sc, rng, &mut roles);
        }
        for i in 0..n {
            let y = observe(cfg, &sc.model, &sc.base.sensors()[i], h, rng);
            let zb = quantize_with(y, &sc.regular_t);
            let zr = if i < n_ref { quantize_with(y, &sc.reference_t) } else { zb };
            if roles[i] {
                let d = FlipDraw::sample(rng);
                base_r[i] = d.apply(zb, levels, pa);
                rs_r[i] = d.apply(zr, levels, pa);
            } else {
                base_r[i] = zb;
                rs_r[i] = zr;
            }
        }
        for c in &rs_r[..n_ref] {
            ref_total += 1;
            ref_hits += u64::from(*c == sc.anchor);
        }
        let record = k < n_steps && sc.steps[k] == t;
        for (si, slot) in sc.slots.iter().enumerate() {
            let res = if let Some((state, ec)) = enhanced[si].as_mut() {
                enhanced_decide(&sc.rs, &sc.model, state, &rs_r, ec).ok().map(|v| Outcome {
                    decide_h1: v.decide_h1,
                    x_hat: v.x_hat.unwrap_or(f64::NAN),
                    p_hat: v.p_hat.unwrap_or(f64::NAN),
                })
            } else if record {
                evaluate(sc, slot.kind, &base_r, &rs_r, ref_hits, ref_total)
            } else {
                None
            };
            if record {
                out[si * n_steps + k] = res;
            }
        }
        if record {
            k += 1;
        }
    }
    out
}

fn fixed(prep: &Option<Prepared>, reports: &[Codeword]) -> Option<Outcome> {
    let (w, t) = prep.as_ref()?.as_ref().ok()?;
    let s = w.statistic(reports).ok()?;
    Some(Outcome {
        decide_h1: s > *t,
        x_hat: f64::NAN,
        p_hat: f64::NAN,
    })
}

fn evaluate(
    sc: &Scenario,
    kind: DetectorKind,
    base_r: &[Codeword],
    rs_r: &[Codeword],
    ref_hits: u64,
    ref_total: u64,
) -> Option<Outcome> {
    let cfg = sc.cfg;
    let pfa = cfg.target_pfa;
    let v = match kind {
        DetectorKind::Lrt => return fixed(&sc.lrt, base_r),
        DetectorKind::Lmpt => return fixed(&sc.lmpt, base_r),
        DetectorKind::Glrt => glrt_decide(
            &sc.base,
            &sc.model,
            base_r,
            ThresholdRule::Adaptive { target_pfa: pfa },
            &cfg.p_search,
        ),
        DetectorKind::Glrtrs => estimate_from_counts(ref_hits, ref_total)
            .and_then(|x| glrtrs_decide(&sc.rs, &sc.model, rs_r, x, pfa, &cfg.p_search)),
        DetectorKind::Lmptrs => {
            estimate_from_counts(ref_hits, ref_total).and_then(|x| lmptrs_decide(&sc.rs, &sc.model, rs_r, x, pfa))
        }
        DetectorKind::EGlrtrs | DetectorKind::ELmptrs => return None,
    }
    .ok()?;
    Some(Outcome {
        decide_h1: v.decide_h1,
        x_hat: v.x_hat.unwrap_or(f64::NAN),
        p_hat: v.p_hat.unwrap_or(f64::NAN),
    })
}

/// Runs trial `trial` of a coordinate under both hypotheses.
pub(crate) fn run_trial_in(sc: &Scenario, trial: u64) -> TrialOutcome {
    let mut h0_rng = seed::stream(&sc.key, 2 * trial);
    let h0 = run_hypothesis(sc, Hypothesis::H0, &mut h0_rng);
    let mut h1_rng = seed::stream(&sc.key, if sc.cfg.crn { 2 * trial } else { 2 * trial + 1 });
    let h1 = run_hypothesis(sc, Hypothesis::H1, &mut h1_rng);
    TrialOutcome { h0, h1 }
}

/// One trial at `coord`, deterministic in `(cfg.seed, coord, trial)`.
pub fn run_trial(cfg: &ExperimentConfig, coord: Coordinate, trial: u64) -> Result<TrialOutcome> {
    let sc = Scenario::new(cfg, coord)?;
    Ok(run_trial_in(&sc, trial))
}

/// Gaussian-approximation prediction of a detector at the true parameters.
/// Rules whose weights depend on estimates are evaluated with the true `p`
/// and `x` plugged in; the enhanced rules have no prediction.
fn analytic(sc: &Scenario, kind: DetectorKind) -> Option<(PerformancePoint, f64)> {
    let cfg = sc.cfg;
    let x = sc.attack.x();
    let p = sc.model.p();
    let (net, w, t) = match kind {
        DetectorKind::Lrt => {
            let (w, t) = sc.lrt.as_ref()?.as_ref().ok()?.clone();
            (&sc.base, w, t)
        }
        DetectorKind::Lmpt => {
            let (w, t) = sc.lmpt.as_ref()?.as_ref().ok()?.clone();
            (&sc.base, w, t)
        }
        DetectorKind::Glrt => {
            let w = glrt_weights(&sc.base, &sc.model, p).ok()?;
            let t = lmpt_threshold(&sc.base, &sc.model, &w, cfg.target_pfa).ok()?.value;
            (&sc.base, w, t)
        }
        DetectorKind::Glrtrs | DetectorKind::Lmptrs => {
            let w = if kind == DetectorKind::Glrtrs {
                glrtrs_weights(&sc.rs, &sc.model, p, x).ok()?
            } else {
                lmptrs_weights(&sc.rs, &sc.model, x).ok()?
            };
            let (f0, f1) = mixture_pmfs(&sc.rs, &sc.model, x);
            let m = statistic_moments(&w, &f0, &f1).ok()?;
            let t = adaptive_threshold(&m, cfg.target_pfa).ok()?.value;
            (&sc.rs, w, t)
        }
        DetectorKind::EGlrtrs | DetectorKind::ELmptrs => return None,
    };
    let (f0, f1) = mixture_pmfs(net, &sc.model, x);
    let m = statistic_moments(&w, &f0, &f1).ok()?;
    let d = deflection_coefficient(&m).unwrap_or(f64::NAN);
    Some((predict_performance(&m, t, cfg.priors), d))
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    n0: u64,
    fa: u64,
    n1: u64,
    det: u64,
    errors: u64,
    x_sum: f64,
    x_n: u64,
    p_sum: f64,
    p_n: u64,
}

impl Tally {
    fn add(&mut self, o: &Option<Outcome>, h1: bool) {
        let Some(o) = o else {
            self.errors += 1;
            return;
        };
        if h1 {
            self.n1 += 1;
            self.det += u64::from(o.decide_h1);
        } else {
            self.n0 += 1;
            self.fa += u64::from(o.decide_h1);
        }
        if o.x_hat.is_finite() {
            self.x_sum += o.x_hat;
            self.x_n += 1;
        }
        if o.p_hat.is_finite() {
            self.p_sum += o.p_hat;
            self.p_n += 1;
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

fn run_coordinate(cfg: &ExperimentConfig, coord: Coordinate) -> Result<Vec<Vec<SweepRecord>>> {
    let sc = Scenario::new(cfg, coord)?;
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| run_trial_in(&sc, trial))
        .collect();

    let n_steps = sc.steps.len();
    let mut per_slot = Vec::with_capacity(sc.slots.len());
    for (si, slot) in sc.slots.iter().enumerate() {
        let pred = analytic(&sc, slot.kind);
        let mut rows = Vec::with_capacity(n_steps);
        for (k, &t) in sc.steps.iter().enumerate() {
            let mut tally = Tally::default();
            for o in &outcomes {
                tally.add(&o.h0[si * n_steps + k], false);
                tally.add(&o.h1[si * n_steps + k], true);
            }
            let mut r = SweepRecord::blank(slot.kind.name(), coord.q, coord.n_ref, coord.alpha, coord.p_attack, t);
            r.pf_emp = ratio(tally.fa, tally.n0);
            r.pd_emp = ratio(tally.det, tally.n1);
            r.pe_emp = cfg.priors.error_probability(r.pd_emp, r.pf_emp);
            r.trials = tally.n0.min(tally.n1);
            r.pe_ci = ci_half_width(r.pe_emp, r.trials);
            r.errors = tally.errors;
            if tally.x_n > 0 {
                r.x_hat_mean = tally.x_sum / tally.x_n as f64;
            }
            if tally.p_n > 0 {
                r.p_hat_mean = tally.p_sum / tally.p_n as f64;
            }
            r.tau = slot.tau.unwrap_or(f64::NAN);
            if let Some((pp, d)) = pred {
                r.pd_analytic = pp.pd;
                r.pf_analytic = pp.pf;
                r.pe_analytic = pp.pe;
                r.deflection = d;
            }
            rows.push(r);
        }
        per_slot.push(rows);
    }
    Ok(per_slot)
}

/// Runs a detection sweep. Records are grouped by detector, then by
/// coordinate in config order, then by time step.
pub fn run_detection(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    let grid = Coordinate::grid(cfg);
    let per_coord = grid
        .iter()
        .map(|&c| run_coordinate(cfg, c))
        .collect::<Result<Vec<_>>>()?;
    let n_slots = slots(cfg).len();
    let mut out = Vec::new();
    for si in 0..n_slots {
        for coord_rows in &per_coord {
            out.extend(coord_rows[si].iter().cloned());
        }
    }
    Ok(out)
}
