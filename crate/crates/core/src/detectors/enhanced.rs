use super::reference::{glrtrs_on, lmptrs_on};
use super::{DetectorVerdict, Network, PSearch};
use crate::error::{Error, Result};
use crate::model::{Codeword, CodewordDistribution, SignalModel};

/// Sparsity used for the H1 pmf inside the LMPTRS reputation benchmark.
pub const DEFAULT_FILTER_P_NOMINAL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseDetector {
    Glrtrs,
    Lmptrs,
}

/// How the residual Byzantine fraction follows the filter:
/// `alpha_t = max(0, alpha * N_reg - dropped) / (N_reg - flagged at t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaUpdate {
    /// Counts the sensors flagged at this step, less the number of honest
    /// sensors expected to fail the test by chance under H0.
    #[default]
    Debiased,
    /// Counts the sensors flagged at this step.
    PerStep,
    /// Counts every sensor flagged at any step so far.
    Cumulative,
}

/// Which report history the reputation test scores at step `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterHistory {
    /// Steps `1..t-1`; nobody is dropped at `t = 1`. The current reports are
    /// independent of the mask, so the surviving statistic stays calibrated.
    #[default]
    Lagged,
    /// Steps `1..=t`, current reports included.
    Inclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhancedConfig {
    pub base: BaseDetector,
    /// Known Byzantine fraction.
    pub alpha: f64,
    /// Reputation threshold; a sensor whose empirical pmf deviates by more
    /// than `tau` is dropped.
    pub tau: f64,
    pub target_pfa: f64,
    /// Codeword honest reference sensors always send.
    pub anchor: Codeword,
    pub p_nominal: f64,
    pub alpha_update: AlphaUpdate,
    pub history: FilterHistory,
    pub search: PSearch,
}

impl EnhancedConfig {
    pub fn new(base: BaseDetector, alpha: f64, tau: f64, target_pfa: f64, anchor: Codeword) -> Self {
        EnhancedConfig {
            base,
            alpha,
            tau,
            target_pfa,
            anchor,
            p_nominal: DEFAULT_FILTER_P_NOMINAL,
            alpha_update: AlphaUpdate::default(),
            history: FilterHistory::default(),
            search: PSearch::default(),
        }
    }
}

/// Per-sensor report history of one detection run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReputationState {
    levels: usize,
    counts: Vec<u32>,
    t: u32,
    alpha_t: f64,
    flagged_ever: Vec<bool>,
    ref_hits: u64,
    ref_total: u64,
}

impl ReputationState {
    pub fn new(net: &Network, alpha: f64) -> Self {
        ReputationState {
            levels: net.levels(),
            counts: vec![0; net.len() * net.levels()],
            t: 0,
            alpha_t: alpha,
            flagged_ever: vec![false; net.len()],
            ref_hits: 0,
            ref_total: 0,
        }
    }

    /// Records one time step of reports.
    pub fn observe(&mut self, net: &Network, reports: &[Codeword], anchor: Codeword) -> Result<()> {
        net.check_reports(reports)?;
        if self.counts.len() != net.len() * net.levels() {
            return Err(Error::invalid("reputation state belongs to a different network"));
        }
        for (i, c) in reports.iter().enumerate() {
            self.counts[i * self.levels + c.slot()] += 1;
            if net.is_reference(i) {
                self.ref_total += 1;
                self.ref_hits += u64::from(*c == anchor);
            }
        }
        self.t += 1;
        Ok(())
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn alpha_t(&self) -> f64 {
        self.alpha_t
    }

    pub fn flagged_ever(&self) -> &[bool] {
        &self.flagged_ever
    }

    pub fn counts(&self, i: usize) -> &[u32] {
        &self.counts[i * self.levels..(i + 1) * self.levels]
    }

    /// Anchor hits and total over every reference report seen so far.
    pub fn reference_counts(&self) -> (u64, u64) {
        (self.ref_hits, self.ref_total)
    }

    pub fn x_hat(&self) -> Result<f64> {
        super::estimate_from_counts(self.ref_hits, self.ref_total)
    }

    /// `sum_j |r_j - count_j / t|` for sensor `i`.
    fn deviation(&self, i: usize, r: &[f64]) -> f64 {
        let t = f64::from(self.t);
        self.counts(i)
            .iter()
            .zip(r)
            .map(|(&n, &rj)| (rj - f64::from(n) / t).abs())
            .sum()
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("reputation threshold must be positive, got {tau}")));
    }
    Ok(())
}

/// Keep mask of the reputation test: sensor `i` stays iff
/// `sum_j |R_{i,j} - p~_t(i, j)| <= tau` with `R = min(A_0, A_1)` per cell.
pub fn reputation_filter(
    state: &ReputationState,
    pmfs_h0: &[CodewordDistribution],
    pmfs_h1: &[CodewordDistribution],
    tau: f64,
) -> Result<Vec<bool>> {
    check_tau(tau)?;
    let n = state.flagged_ever.len();
    if pmfs_h0.len() != n || pmfs_h1.len() != n {
        return Err(Error::invalid(format!("expected {n} pmfs per hypothesis")));
    }
    if state.t == 0 {
        return Err(Error::invalid("reputation filter needs at least one time step"));
    }
    Ok((0..n)
        .map(|i| {
            let r: Vec<f64> = pmfs_h0[i]
                .probs()
                .iter()
                .zip(pmfs_h1[i].probs())
                .map(|(a, b)| a.min(*b))
                .collect();
            state.deviation(i, &r) <= tau
        })
        .collect())
}

/// Largest number of count vectors enumerated by [`honest_flag_probability`].
const MAX_COMPOSITIONS: f64 = 2e5;

/// Probability that a sensor reporting i.i.d. from `pmf` for `t` steps ends
/// with `sum_j |r_j - count_j / t| > tau`. Exact multinomial enumeration;
/// `None` when `t = 0` or the enumeration would be too large.
pub fn honest_flag_probability(pmf: &[f64], r: &[f64], t: u32, tau: f64) -> Option<f64> {
    let k = pmf.len();
    if t == 0 || k == 0 || r.len() != k {
        return None;
    }
    // C(t + k - 1, k - 1)
    let mut size = 1.0f64;
    for j in 1..k {
        size *= f64::from(t) + j as f64;
        size /= j as f64;
    }
    if size > MAX_COMPOSITIONS {
        return None;
    }
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=t).scan(0.0, |acc, n| {
            *acc += f64::from(n).ln();
            Some(*acc)
        }))
        .collect();
    let tf = f64::from(t);
    let mut kept = 0.0;
    let mut counts = vec![0u32; k];
    // Depth-first over count vectors; the last cell takes the remainder.
    fn walk(
        j: usize,
        left: u32,
        counts: &mut Vec<u32>,
        pmf: &[f64],
        r: &[f64],
        tf: f64,
        tau: f64,
        ln_fact: &[f64],
        kept: &mut f64,
    ) {
        let k = pmf.len();
        if j == k - 1 {
            counts[j] = left;
            let dev: f64 = counts.iter().zip(r).map(|(&n, &rj)| (rj - f64::from(n) / tf).abs()).sum();
            if dev <= tau {
                let mut lp = ln_fact[ln_fact.len() - 1];
                for (&n, &pj) in counts.iter().zip(pmf) {
                    if n > 0 {
                        if pj <= 0.0 {
                            return;
                        }
                        lp += f64::from(n) * pj.ln();
                    }
                    lp -= ln_fact[n as usize];
                }
                *kept += lp.exp();
            }
            return;
        }
        for n in 0..=left {
            counts[j] = n;
            walk(j + 1, left - n, counts, pmf, r, tf, tau, ln_fact, kept);
        }
    }
    walk(0, t, &mut counts, pmf, r, tf, tau, &ln_fact, &mut kept);
    Some((1.0 - kept).clamp(0.0, 1.0))
}

/// One time step of E-GLRTRS / E-LMPTRS.
///
/// Records the reports, estimates `x` from every reference report so far,
/// drops regular sensors whose report history (see [`FilterHistory`])
/// strays from the benchmark pmf, shrinks the Byzantine fraction by the dropped share, and runs the
/// base rule on the surviving sensors with `x_eff = (x_hat / alpha) * alpha_t`.
pub fn enhanced_decide(
    net: &Network,
    model: &SignalModel,
    state: &mut ReputationState,
    reports: &[Codeword],
    cfg: &EnhancedConfig,
) -> Result<DetectorVerdict> {
    check_tau(cfg.tau)?;
    if !(0.0..=1.0).contains(&cfg.alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {}", cfg.alpha)));
    }
    net.check_reports(reports)?;
    state.observe(net, reports, cfg.anchor)?;
    // history the filter scores: the lagged form leaves the current step out
    let (t_scored, lag) = match cfg.history {
        FilterHistory::Lagged => (state.t - 1, 1),
        FilterHistory::Inclusive => (state.t, 0),
    };
    let x_hat = state.x_hat()?;
    if cfg.alpha == 0.0 && x_hat > 0.0 {
        return Err(Error::InconsistentPrior { x_hat });
    }

    let n = net.len();
    let p_bench = match cfg.base {
        BaseDetector::Glrtrs => {
            let counts = net.class_counts(reports, |i| !net.is_reference(i));
            super::mle_sparsity(net, model, &counts, x_hat, &cfg.search)?
        }
        BaseDetector::Lmptrs => cfg.p_nominal,
    };
    let a0 = net.class_probs_at(model, 0.0);
    let bench: Vec<Vec<f64>> = a0
        .iter()
        .zip(net.class_probs_at(model, p_bench))
        .map(|(u0, u1)| u0.iter().zip(&u1).map(|(u, v)| u.min(*v)).collect())
        .collect();

    let levels = state.levels;
    let tf = f64::from(t_scored);
    let mut keep = vec![true; n];
    let mut select = vec![false; n];
    let mut flagged_now = 0usize;
    for i in (0..n).filter(|&i| !net.is_reference(i)) {
        if t_scored > 0 {
            let row = &state.counts[i * levels..(i + 1) * levels];
            let r = &bench[net.class_of(i)];
            let cur = reports[i].slot();
            let mut dev = 0.0;
            for j in 0..levels {
                let nj = row[j] - if j == cur { lag } else { 0 };
                dev += (r[j] - f64::from(nj) / tf).abs();
            }
            if !(dev <= cfg.tau) {
                keep[i] = false;
                state.flagged_ever[i] = true;
                flagged_now += 1;
            }
        }
        select[i] = keep[i];
    }
    let n_regular = net.n_regular() as f64;
    let dropped = match cfg.alpha_update {
        AlphaUpdate::Debiased => {
            let false_flags: Vec<f64> = (0..net.n_classes())
                .map(|c| honest_flag_probability(&a0[c], &bench[c], t_scored, cfg.tau).unwrap_or(0.0))
                .collect();
            let expected: f64 = net
                .regular_multiplicities()
                .iter()
                .zip(&false_flags)
                .map(|(m, f)| m * (1.0 - cfg.alpha) * f)
                .sum();
            (flagged_now as f64 - expected).clamp(0.0, cfg.alpha * n_regular)
        }
        AlphaUpdate::PerStep => flagged_now as f64,
        AlphaUpdate::Cumulative => state.flagged_ever.iter().filter(|&&f| f).count() as f64,
    };
    // Byzantines left after removing the dropped sensors, as a share of the
    // surviving regular sensors; never above alpha.
    let survivors = n_regular - flagged_now as f64;
    state.alpha_t = if survivors > 0.0 {
        ((cfg.alpha * n_regular - dropped) / survivors).max(0.0)
    } else {
        0.0
    };

    let x_eff = if state.alpha_t == cfg.alpha {
        x_hat
    } else {
        x_hat / cfg.alpha * state.alpha_t
    };
    let mut v = match cfg.base {
        BaseDetector::Glrtrs => glrtrs_on(net, model, reports, x_eff, cfg.target_pfa, &cfg.search, &select)?,
        BaseDetector::Lmptrs => lmptrs_on(net, model, reports, x_eff, cfg.target_pfa, &select)?,
    };
    v.x_hat = Some(x_hat);
    v.x_eff = Some(x_eff);
    v.keep_mask = Some(keep);
    Ok(v)
}
