//! Experiment configuration: a flat `key = value` text format.
//!
//! Lines are `key = value`; `#` starts a comment. List-valued keys take
//! comma-separated values and turn into sweep axes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::Priors;
use crate::detectors::{AlphaUpdate, DetectorKind, FilterHistory, PSearch, DEFAULT_FILTER_P_NOMINAL};
use crate::error::{Error, Result};
use crate::model::{check_bits, ReferenceSide, SignalModel, Thresholds, DEFAULT_REFERENCE_OFFSET};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Monte Carlo detection sweep.
    Detection,
    /// Accuracy of the reference-sensor attack estimate against its bound.
    Estimator,
    /// Detection at and around the attack strength that blinds the fusion rule.
    Blinding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surrogate {
    /// `N(0, beta_h^2)` observations.
    Asymptotic,
    /// Bernoulli-Gaussian signal through a random linear operator.
    ExactBg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoleMode {
    /// Exactly `floor(alpha n)` Byzantines among the reference sensors and
    /// among the regular ones, placed at random once per run.
    Stratified,
    /// Each sensor is Byzantine with probability `alpha`, once per run.
    Iid,
    /// Roles redrawn independently for every report.
    IidPerStep,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReportSteps {
    Final,
    All,
    At(Vec<u32>),
}

impl ReportSteps {
    /// The 1-based steps at which verdicts are recorded.
    pub fn steps(&self, time_steps: u32) -> Vec<u32> {
        match self {
            ReportSteps::Final => vec![time_steps],
            ReportSteps::All => (1..=time_steps).collect(),
            ReportSteps::At(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrtThresholdMode {
    Adaptive,
    Bayes,
}

/// Regular-sensor quantizer thresholds: equiprobable under H0 unless an
/// explicit cut list is given for that resolution.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThresholdScheme {
    /// Finite cuts in units of the noise standard deviation, keyed by `q`.
    pub explicit: BTreeMap<u32, Vec<f64>>,
}

impl ThresholdScheme {
    pub fn thresholds(&self, bits: u32, sigma_n2: f64) -> Result<Thresholds> {
        match self.explicit.get(&bits) {
            Some(cuts) => {
                let sd = sigma_n2.sqrt();
                let scaled: Vec<f64> = cuts.iter().map(|c| c * sd).collect();
                Thresholds::from_finite(&scaled)
            }
            None => Thresholds::equiprobable_h0(bits, sigma_n2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n_sensors: usize,
    pub n_reference: Vec<usize>,
    /// When set, the network size follows `n_reference + n_regular_fixed`.
    pub n_regular_fixed: Option<usize>,
    pub q_bits: Vec<u32>,
    pub sigma_n2: f64,
    pub sigma_x2: f64,
    pub p: f64,
    pub signal_dim: usize,
    pub alpha: Vec<f64>,
    pub p_attack: Vec<f64>,
    pub detectors: Vec<DetectorKind>,
    pub target_pfa: f64,
    pub priors: Priors,
    pub trials: u64,
    pub time_steps: u32,
    pub report_steps: ReportSteps,
    pub seed: u64,
    pub thresholds: ThresholdScheme,
    pub reference_offset: f64,
    pub reference_side: ReferenceSide,
    pub filter_tau: Vec<f64>,
    pub filter_p_nominal: f64,
    pub surrogate: Surrogate,
    pub role_mode: RoleMode,
    pub lrt_threshold: LrtThresholdMode,
    pub p_search: PSearch,
    pub alpha_update: AlphaUpdate,
    pub filter_history: FilterHistory,
    /// Share one random stream between the H0 and H1 runs of a trial.
    pub crn: bool,
    /// Worker threads; 0 picks the machine default.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::Detection,
            n_sensors: 280,
            n_reference: vec![80],
            n_regular_fixed: None,
            q_bits: vec![1],
            sigma_n2: 1.0,
            sigma_x2: 5.0,
            p: 0.05,
            signal_dim: 500,
            alpha: vec![0.3],
            p_attack: vec![0.5],
            detectors: vec![DetectorKind::Lrt, DetectorKind::Glrt, DetectorKind::Glrtrs],
            target_pfa: 0.4,
            priors: Priors::equal(),
            trials: 10_000,
            time_steps: 1,
            report_steps: ReportSteps::Final,
            seed: 1,
            thresholds: ThresholdScheme::default(),
            reference_offset: DEFAULT_REFERENCE_OFFSET,
            reference_side: ReferenceSide::Low,
            filter_tau: vec![0.5],
            filter_p_nominal: DEFAULT_FILTER_P_NOMINAL,
            surrogate: Surrogate::Asymptotic,
            role_mode: RoleMode::Stratified,
            lrt_threshold: LrtThresholdMode::Adaptive,
            p_search: PSearch::default(),
            alpha_update: AlphaUpdate::Debiased,
            filter_history: FilterHistory::Lagged,
            crn: false,
            workers: 0,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse '{}'", v.trim())))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let out = v
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(key, s))
        .collect::<Result<Vec<T>>>()?;
    if out.is_empty() {
        return Err(Error::config(format!("{key}: empty list")));
    }
    Ok(out)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(Error::config(format!("{key}: expected a boolean, got '{other}'"))),
    }
}

fn fmt_list<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::parse(&text)
    }

    /// Parses a config on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected 'key = value'", n + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::config(format!("line {}: {}", n + 1, strip_prefix(e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key; used by the parser and by command-line overrides.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "kind" => {
                self.kind = match v {
                    "detection" => ExperimentKind::Detection,
                    "estimator" => ExperimentKind::Estimator,
                    "blinding" => ExperimentKind::Blinding,
                    _ => return Err(Error::config(format!("kind: unknown experiment '{v}'"))),
                }
            }
            "n_sensors" => self.n_sensors = parse_num(key, v)?,
            "n_reference" => self.n_reference = parse_list(key, v)?,
            "n_regular_fixed" => {
                self.n_regular_fixed = if v == "none" { None } else { Some(parse_num(key, v)?) }
            }
            "q_bits" => self.q_bits = parse_list(key, v)?,
            "sigma_n2" => self.sigma_n2 = parse_num(key, v)?,
            "sigma_x2" => self.sigma_x2 = parse_num(key, v)?,
            "p" => self.p = parse_num(key, v)?,
            "signal_dim" => self.signal_dim = parse_num(key, v)?,
            "alpha" => self.alpha = parse_list(key, v)?,
            "p_attack" => self.p_attack = parse_list(key, v)?,
            "detectors" => {
                self.detectors = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.parse::<DetectorKind>().map_err(|e| Error::config(strip_prefix(e))))
                    .collect::<Result<_>>()?
            }
            "target_pfa" => self.target_pfa = parse_num(key, v)?,
            "priors" => {
                let p: Vec<f64> = parse_list(key, v)?;
                if p.len() != 2 {
                    return Err(Error::config("priors: expected 'pi0, pi1'"));
                }
                self.priors = Priors::new(p[0], p[1]).map_err(|e| Error::config(strip_prefix(e)))?;
            }
            "trials" => self.trials = parse_num(key, v)?,
            "time_steps" => self.time_steps = parse_num(key, v)?,
            "report_steps" => {
                self.report_steps = match v {
                    "final" => ReportSteps::Final,
                    "all" => ReportSteps::All,
                    _ => ReportSteps::At(parse_list(key, v)?),
                }
            }
            "seed" => self.seed = parse_num(key, v)?,
            "thresholds" => {
                if v != "equiprobable_h0" {
                    return Err(Error::config(
                        "thresholds: expected 'equiprobable_h0'; give explicit cuts as thresholds.q<bits>",
                    ));
                }
                self.thresholds.explicit.clear();
            }
            _ if key.starts_with("thresholds.q") => {
                let bits: u32 = parse_num(key, &key["thresholds.q".len()..])?;
                self.thresholds.explicit.insert(bits, parse_list(key, v)?);
            }
            "reference_offset" => self.reference_offset = parse_num(key, v)?,
            "reference_side" => {
                self.reference_side = match v {
                    "low" => ReferenceSide::Low,
                    "high" => ReferenceSide::High,
                    _ => return Err(Error::config(format!("reference_side: expected low or high, got '{v}'"))),
                }
            }
            "filter_tau" => self.filter_tau = parse_list(key, v)?,
            "filter_p_nominal" => self.filter_p_nominal = parse_num(key, v)?,
            "surrogate" => {
                self.surrogate = match v {
                    "asymptotic" => Surrogate::Asymptotic,
                    "exact_bg" => Surrogate::ExactBg,
                    _ => return Err(Error::config(format!("surrogate: expected asymptotic or exact_bg, got '{v}'"))),
                }
            }
            "role_mode" => {
                self.role_mode = match v {
                    "stratified" => RoleMode::Stratified,
                    "iid" => RoleMode::Iid,
                    "iid_per_step" => RoleMode::IidPerStep,
                    _ => return Err(Error::config(format!("role_mode: unknown mode '{v}'"))),
                }
            }
            "lrt_threshold" => {
                self.lrt_threshold = match v {
                    "adaptive" => LrtThresholdMode::Adaptive,
                    "bayes" => LrtThresholdMode::Bayes,
                    _ => return Err(Error::config(format!("lrt_threshold: expected adaptive or bayes, got '{v}'"))),
                }
            }
            "p_max" => self.p_search.p_max = parse_num(key, v)?,
            "p_tol" => self.p_search.tol = parse_num(key, v)?,
            "alpha_update" => {
                self.alpha_update = match v {
                    "debiased" => AlphaUpdate::Debiased,
                    "per_step" => AlphaUpdate::PerStep,
                    "cumulative" => AlphaUpdate::Cumulative,
                    _ => return Err(Error::config(format!("alpha_update: expected debiased, per_step or cumulative, got '{v}'"))),
                }
            }
            "filter_history" => {
                self.filter_history = match v {
                    "lagged" => FilterHistory::Lagged,
                    "inclusive" => FilterHistory::Inclusive,
                    _ => return Err(Error::config(format!("filter_history: expected lagged or inclusive, got '{v}'"))),
                }
            }
            "crn" => self.crn = parse_bool(key, v)?,
            "workers" => self.workers = parse_num(key, v)?,
            _ => return Err(Error::config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Network size for a given reference count.
    pub fn network_size(&self, n_ref: usize) -> usize {
        self.n_regular_fixed.map_or(self.n_sensors, |r| n_ref + r)
    }

    pub fn model(&self) -> Result<SignalModel> {
        SignalModel::new(self.p, self.sigma_x2, self.sigma_n2, self.signal_dim)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if let Err(e) = self.model() {
            return bad(strip_prefix(e));
        }
        for &b in &self.q_bits {
            if let Err(e) = check_bits(b) {
                return bad(strip_prefix(e));
            }
            if let Err(e) = self.thresholds.thresholds(b, self.sigma_n2) {
                return bad(format!("thresholds for q={b}: {}", strip_prefix(e)));
            }
        }
        for (&b, cuts) in &self.thresholds.explicit {
            if check_bits(b).is_err() || cuts.len() != (1usize << b) - 1 {
                return bad(format!("thresholds.q{b} needs {} cuts, got {}", (1u64 << b.min(8)) - 1, cuts.len()));
            }
        }
        for &n_ref in &self.n_reference {
            let n = self.network_size(n_ref);
            let needs_regular = self.kind != ExperimentKind::Estimator;
            if n_ref == 0 && self.kind != ExperimentKind::Blinding || (needs_regular && n_ref >= n) {
                return bad(format!("need 0 < n_reference < n_sensors, got {n_ref} of {n}"));
            }
        }
        for (name, list) in [("alpha", &self.alpha), ("p_attack", &self.p_attack)] {
            if list.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return bad(format!("{name} values must lie in [0, 1]"));
            }
        }
        if self.detectors.is_empty() && self.kind != ExperimentKind::Estimator {
            return bad("no detectors selected".into());
        }
        if !(self.target_pfa > 0.0 && self.target_pfa < 1.0) {
            return bad(format!("target_pfa must lie in (0, 1), got {}", self.target_pfa));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.time_steps == 0 {
            return bad("time_steps must be at least 1".into());
        }
        if let ReportSteps::At(v) = &self.report_steps {
            if v.iter().any(|&t| t == 0 || t > self.time_steps) || v.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("report_steps must increase within 1..={}", self.time_steps));
            }
        }
        if !(self.reference_offset >= 0.0 && self.reference_offset.is_finite()) {
            return bad("reference_offset must be finite and nonnegative".into());
        }
        if self.filter_tau.iter().any(|t| !(*t > 0.0)) {
            return bad("filter_tau values must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.filter_p_nominal) {
            return bad("filter_p_nominal must lie in [0, 1]".into());
        }
        if !(self.p_search.p_max > 0.0 && self.p_search.p_max <= 1.0 && self.p_search.tol > 0.0) {
            return bad("p_max must lie in (0, 1] and p_tol must be positive".into());
        }
        if self.detectors.iter().any(|d| d.is_enhanced()) && self.alpha.iter().any(|&a| a == 0.0) {
            return bad("enhanced detectors need a nonzero alpha".into());
        }
        Ok(())
    }

    /// Renders the config in the same format `parse` reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kind = match self.kind {
            ExperimentKind::Detection => "detection",
            ExperimentKind::Estimator => "estimator",
            ExperimentKind::Blinding => "blinding",
        };
        let _ = writeln!(s, "kind = {kind}");
        let _ = writeln!(s, "n_sensors = {}", self.n_sensors);
        let _ = writeln!(s, "n_reference = {}", fmt_list(&self.n_reference));
        if let Some(r) = self.n_regular_fixed {
            let _ = writeln!(s, "n_regular_fixed = {r}");
        }
        let _ = writeln!(s, "q_bits = {}", fmt_list(&self.q_bits));
        let _ = writeln!(s, "sigma_n2 = {}", self.sigma_n2);
        let _ = writeln!(s, "sigma_x2 = {}", self.sigma_x2);
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "signal_dim = {}", self.signal_dim);
        let _ = writeln!(s, "alpha = {}", fmt_list(&self.alpha));
        let _ = writeln!(s, "p_attack = {}", fmt_list(&self.p_attack));
        let names: Vec<&str> = self.detectors.iter().map(|d| d.name()).collect();
        let _ = writeln!(s, "detectors = {}", names.join(", "));
        let _ = writeln!(s, "target_pfa = {}", self.target_pfa);
        let _ = writeln!(s, "priors = {}, {}", self.priors.pi0, self.priors.pi1);
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "time_steps = {}", self.time_steps);
        let steps = match &self.report_steps {
            ReportSteps::Final => "final".to_string(),
            ReportSteps::All => "all".to_string(),
            ReportSteps::At(v) => fmt_list(v),
        };
        let _ = writeln!(s, "report_steps = {steps}");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "thresholds = equiprobable_h0");
        for (b, cuts) in &self.thresholds.explicit {
            let _ = writeln!(s, "thresholds.q{b} = {}", fmt_list(cuts));
        }
        let _ = writeln!(s, "reference_offset = {}", self.reference_offset);
        let side = match self.reference_side {
            ReferenceSide::Low => "low",
            ReferenceSide::High => "high",
        };
        let _ = writeln!(s, "reference_side = {side}");
        let _ = writeln!(s, "filter_tau = {}", fmt_list(&self.filter_tau));
        let _ = writeln!(s, "filter_p_nominal = {}", self.filter_p_nominal);
        let surrogate = match self.surrogate {
            Surrogate::Asymptotic => "asymptotic",
            Surrogate::ExactBg => "exact_bg",
        };
        let _ = writeln!(s, "surrogate = {surrogate}");
        let roles = match self.role_mode {
            RoleMode::Stratified => "stratified",
            RoleMode::Iid => "iid",
            RoleMode::IidPerStep => "iid_per_step",
        };
        let _ = writeln!(s, "role_mode = {roles}");
        let lrt = match self.lrt_threshold {
            LrtThresholdMode::Adaptive => "adaptive",
            LrtThresholdMode::Bayes => "bayes",
        };
        let _ = writeln!(s, "lrt_threshold = {lrt}");
        let _ = writeln!(s, "p_max = {}", self.p_search.p_max);
        let _ = writeln!(s, "p_tol = {}", self.p_search.tol);
        let update = match self.alpha_update {
            AlphaUpdate::Debiased => "debiased",
            AlphaUpdate::PerStep => "per_step",
            AlphaUpdate::Cumulative => "cumulative",
        };
        let _ = writeln!(s, "alpha_update = {update}");
        let history = match self.filter_history {
            FilterHistory::Lagged => "lagged",
            FilterHistory::Inclusive => "inclusive",
        };
        let _ = writeln!(s, "filter_history = {history}");
        let _ = writeln!(s, "crn = {}", self.crn);
        let _ = writeln!(s, "workers = {}", self.workers);
        s
    }
}

/// Drops the variant prefix from an error message so it can be re-wrapped.
fn strip_prefix(e: Error) -> String {
    match e {
        Error::InvalidArgument(m) | Error::Config(m) => m,
        other => other.to_string(),
    }
}
