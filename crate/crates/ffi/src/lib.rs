//! C interface to `qsparse-core`.
//!
//! Objects cross the boundary as opaque handles created by `qs_*_new` and
//! released by the matching `qs_*_free`. Every fallible call returns a
//! [`QsStatus`]; on failure the message is kept per thread and can be read
//! with [`qs_last_error_message`]. Codewords are passed as 1-based indices.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use qsparse_core::channel::{blinding_product, AttackParams};
use qsparse_core::detectors::{
    enhanced_decide, estimate_from_counts, glrt_decide, glrt_weights, glrtrs_decide, lmpt_decide, lmpt_threshold,
    lmpt_weights, lmptrs_decide, lrt_decide, reference_anchor_counts, BaseDetector, DetectorVerdict, EnhancedConfig,
    LrtThreshold, Network, PSearch, ReputationState, ThresholdRule,
};
use qsparse_core::model::{make_reference_thresholds, Codeword, ReferenceSide, SensorSpec, SignalModel, Thresholds};
use qsparse_core::numerics;
use qsparse_core::sim::{preset, run_sweep, write_csv, ExperimentConfig};
use qsparse_core::Error;

/// Result of every fallible call. The first four values match the exit
/// codes of the `qsparse` command.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsStatus {
    Ok = 0,
    ConfigError = 1,
    DetectorError = 2,
    IoError = 3,
    InvalidArgument = 4,
    NullPointer = 5,
    Panic = 6,
}

/// Fusion rules reachable through [`qs_decide`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsDetector {
    Lrt = 0,
    Glrt = 1,
    Lmpt = 2,
    Glrtrs = 3,
    Lmptrs = 4,
}

/// Outcome of one decision. Estimates a rule does not produce are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QsVerdict {
    pub statistic: f64,
    pub threshold: f64,
    /// 1 when the rule decides H1; ties decide H0.
    pub decide_h1: u8,
    pub p_hat: f64,
    pub x_hat: f64,
    /// Sensors that entered the statistic.
    pub kept: usize,
}

/// Signal and noise parameters.
pub struct QsModel(SignalModel);

/// A sensor network: reference sensors first, then regular ones.
pub struct QsNetwork {
    net: Network,
    anchor: Codeword,
}

/// Reputation filter state of one E-GLRTRS or E-LMPTRS run.
pub struct QsFilter {
    state: ReputationState,
    cfg: EnhancedConfig,
    len: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> QsStatus {
    match e {
        Error::Config(_) => QsStatus::ConfigError,
        Error::Io { .. } => QsStatus::IoError,
        Error::InvalidArgument(_) => QsStatus::InvalidArgument,
        _ => QsStatus::DetectorError,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, recording its error and catching panics.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            QsStatus::Ok
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            QsStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".to_string());
            QsStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn text<'a>(ptr: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if ptr.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Fail::Lib(Error::InvalidArgument(format!("{what} is not valid UTF-8"))))
}

unsafe fn out<'a, T>(ptr: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    ptr.as_mut().ok_or(Fail::Null(what))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &'static str) -> Result<&'a T, Fail> {
    ptr.as_ref().ok_or(Fail::Null(what))
}

fn codewords(raw: &[u16], levels: usize) -> Result<Vec<Codeword>, Fail> {
    raw.iter()
        .map(|&c| Codeword::new(usize::from(c), levels).map_err(Fail::from))
        .collect()
}

fn verdict(v: &DetectorVerdict, kept: usize) -> QsVerdict {
    QsVerdict {
        statistic: v.statistic,
        threshold: v.threshold,
        decide_h1: u8::from(v.decide_h1),
        p_hat: v.p_hat.unwrap_or(f64::NAN),
        x_hat: v.x_hat.unwrap_or(f64::NAN),
        kept,
    }
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating if needed. Returns the full message
/// length in bytes, without the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qs_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Gaussian tail probability `Q(z)`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_q_tail(z: f64, out_value: *mut f64) -> QsStatus {
    guard(|| {
        *out(out_value, "out_value")? = numerics::q_tail(z)?;
        Ok(())
    })
}

/// Inverse of [`qs_q_tail`] on `(0, 1)`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_q_tail_inverse(p: f64, out_value: *mut f64) -> QsStatus {
    guard(|| {
        *out(out_value, "out_value")? = numerics::q_tail_inverse(p)?;
        Ok(())
    })
}

/// Creates a model with sparsity `p`, signal variance `sigma_x2`, noise
/// variance `sigma_n2` and signal dimension `dim`.
///
/// # Safety
/// `out_model` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_model_new(
    p: f64,
    sigma_x2: f64,
    sigma_n2: f64,
    dim: usize,
    out_model: *mut *mut QsModel,
) -> QsStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = Box::into_raw(Box::new(QsModel(SignalModel::new(p, sigma_x2, sigma_n2, dim)?)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`qs_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qs_model_free(model: *mut QsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Builds a network of `n_sensors` sensors sharing the finite cuts
/// `cuts[0..n_cuts]` (`n_cuts = 2^q - 1`). The first `n_reference` are
/// reference sensors whose cuts sit `reference_offset` below the regular
/// ones, so honest references always report the top codeword. `gains` holds
/// one squared gain per sensor, or is null for unit gains.
///
/// # Safety
/// `cuts` must point to `n_cuts` values; `gains`, when not null, to
/// `n_sensors` values; `out_network` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_network_new(
    n_sensors: usize,
    n_reference: usize,
    cuts: *const f64,
    n_cuts: usize,
    gains: *const f64,
    reference_offset: f64,
    out_network: *mut *mut QsNetwork,
) -> QsStatus {
    guard(|| {
        let slot = out(out_network, "out_network")?;
        let cuts = slice(cuts, n_cuts, "cuts")?;
        let gains = if gains.is_null() { None } else { Some(slice(gains, n_sensors, "gains")?) };
        if n_reference > n_sensors {
            return Err(Error::InvalidArgument("more reference sensors than sensors".into()).into());
        }
        let t = Thresholds::from_finite(cuts)?;
        let mut sensors = Vec::with_capacity(n_sensors);
        for i in 0..n_sensors {
            let s = SensorSpec::new(i, gains.map_or(1.0, |g| g[i]), t.clone())?;
            sensors.push(if i < n_reference {
                let rt = make_reference_thresholds(&s, reference_offset, ReferenceSide::Low)?;
                SensorSpec::new(i, s.gain2, rt)?.reference()
            } else {
                s
            });
        }
        let anchor = ReferenceSide::Low.anchor(t.levels());
        *slot = Box::into_raw(Box::new(QsNetwork {
            net: Network::new(sensors)?,
            anchor,
        }));
        Ok(())
    })
}

/// # Safety
/// `network` must be null or a handle from [`qs_network_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qs_network_free(network: *mut QsNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// Number of sensors, or 0 for a null handle.
///
/// # Safety
/// `network` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qs_network_len(network: *const QsNetwork) -> usize {
    network.as_ref().map_or(0, |n| n.net.len())
}

/// Codewords per sensor, `2^q`, or 0 for a null handle.
///
/// # Safety
/// `network` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qs_network_levels(network: *const QsNetwork) -> usize {
    network.as_ref().map_or(0, |n| n.net.levels())
}

/// Attack estimate `x_hat` from the reference sensors' reports.
///
/// # Safety
/// `reports` must point to one codeword per sensor.
#[no_mangle]
pub unsafe extern "C" fn qs_estimate_attack(
    network: *const QsNetwork,
    reports: *const u16,
    n_reports: usize,
    out_x_hat: *mut f64,
) -> QsStatus {
    guard(|| {
        let nw = handle(network, "network")?;
        let u = codewords(slice(reports, n_reports, "reports")?, nw.net.levels())?;
        let (hits, total) = reference_anchor_counts(&nw.net, &u, nw.anchor)?;
        *out(out_x_hat, "out_x_hat")? = estimate_from_counts(hits, total)?;
        Ok(())
    })
}

/// One decision of a base fusion rule.
///
/// `alpha` and `p_attack` are the true attack parameters, used only by the
/// LRT. The reference-sensor rules use `x_hat`, or estimate it from the
/// reference reports when `x_hat` is NaN. `target_pfa` calibrates the
/// threshold of every rule.
///
/// # Safety
/// `reports` must point to one codeword per sensor; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn qs_decide(
    network: *const QsNetwork,
    model: *const QsModel,
    detector: QsDetector,
    reports: *const u16,
    n_reports: usize,
    alpha: f64,
    p_attack: f64,
    x_hat: f64,
    target_pfa: f64,
    out_verdict: *mut QsVerdict,
) -> QsStatus {
    guard(|| {
        let nw = handle(network, "network")?;
        let model = &handle(model, "model")?.0;
        let out_verdict = out(out_verdict, "out_verdict")?;
        let net = &nw.net;
        let u = codewords(slice(reports, n_reports, "reports")?, net.levels())?;
        let search = PSearch::default();
        let x = || -> Result<f64, Error> {
            if x_hat.is_nan() {
                let (hits, total) = reference_anchor_counts(net, &u, nw.anchor)?;
                estimate_from_counts(hits, total)
            } else {
                Ok(x_hat)
            }
        };
        let (v, kept) = match detector {
            QsDetector::Lrt => (
                lrt_decide(net, model, &AttackParams::new(alpha, p_attack)?, &u, LrtThreshold::Adaptive { target_pfa })?,
                net.len(),
            ),
            QsDetector::Glrt => (glrt_decide(net, model, &u, ThresholdRule::Adaptive { target_pfa }, &search)?, net.len()),
            QsDetector::Lmpt => {
                let w = lmpt_weights(net, model, 0.0)?;
                let t = lmpt_threshold(net, model, &w, target_pfa)?;
                (lmpt_decide(&w, &u, t.value)?, net.len())
            }
            QsDetector::Glrtrs => (glrtrs_decide(net, model, &u, x()?, target_pfa, &search)?, net.n_regular()),
            QsDetector::Lmptrs => (lmptrs_decide(net, model, &u, x()?, target_pfa)?, net.n_regular()),
        };
        *out_verdict = verdict(&v, kept);
        Ok(())
    })
}

/// Attack product `alpha * P_A` that blinds the LMPT (`detector = Lmpt`,
/// weights at `p = 0`) or GLRT (`detector = Glrt`, weights at the model `p`).
///
/// # Safety
/// Handles must be live; `out_x` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_blinding_point(
    network: *const QsNetwork,
    model: *const QsModel,
    detector: QsDetector,
    out_x: *mut f64,
) -> QsStatus {
    guard(|| {
        let net = &handle(network, "network")?.net;
        let model = &handle(model, "model")?.0;
        let w = match detector {
            QsDetector::Lmpt => lmpt_weights(net, model, 0.0)?,
            QsDetector::Glrt => glrt_weights(net, model, model.p())?,
            other => {
                return Err(Error::InvalidArgument(format!("no blinding point for {other:?}")).into());
            }
        };
        *out(out_x, "out_x")? = blinding_product(net, model, &w)?;
        Ok(())
    })
}

/// Starts a reputation-filtered run on `network`. `base` must be `Glrtrs` or
/// `Lmptrs`; `alpha` is the known Byzantine fraction and `tau` the
/// reputation threshold.
///
/// # Safety
/// `network` must be live; `out_filter` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_filter_new(
    network: *const QsNetwork,
    base: QsDetector,
    alpha: f64,
    tau: f64,
    target_pfa: f64,
    out_filter: *mut *mut QsFilter,
) -> QsStatus {
    guard(|| {
        let nw = handle(network, "network")?;
        let slot = out(out_filter, "out_filter")?;
        let base = match base {
            QsDetector::Glrtrs => BaseDetector::Glrtrs,
            QsDetector::Lmptrs => BaseDetector::Lmptrs,
            other => return Err(Error::InvalidArgument(format!("{other:?} has no filtered variant")).into()),
        };
        *slot = Box::into_raw(Box::new(QsFilter {
            state: ReputationState::new(&nw.net, alpha),
            cfg: EnhancedConfig::new(base, alpha, tau, target_pfa, nw.anchor),
            len: nw.net.len(),
        }));
        Ok(())
    })
}

/// # Safety
/// `filter` must be null or a handle from [`qs_filter_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qs_filter_free(filter: *mut QsFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

/// Feeds one time step of reports and decides. `kept` in the verdict counts
/// the regular sensors that survived the filter.
///
/// # Safety
/// `network` must be the network the filter was created with; `reports`
/// must point to one codeword per sensor.
#[no_mangle]
pub unsafe extern "C" fn qs_filter_step(
    filter: *mut QsFilter,
    network: *const QsNetwork,
    model: *const QsModel,
    reports: *const u16,
    n_reports: usize,
    out_verdict: *mut QsVerdict,
) -> QsStatus {
    guard(|| {
        let f = filter.as_mut().ok_or(Fail::Null("filter"))?;
        let net = &handle(network, "network")?.net;
        let model = &handle(model, "model")?.0;
        let out_verdict = out(out_verdict, "out_verdict")?;
        if net.len() != f.len {
            return Err(Error::InvalidArgument("filter belongs to a different network".into()).into());
        }
        let u = codewords(slice(reports, n_reports, "reports")?, net.levels())?;
        let v = enhanced_decide(net, model, &mut f.state, &u, &f.cfg)?;
        let kept = v.keep_mask.as_ref().map_or(net.n_regular(), |m| {
            m.iter().zip(net.sensors()).filter(|(k, s)| **k && !s.is_reference).count()
        });
        *out_verdict = verdict(&v, kept);
        Ok(())
    })
}

fn sweep_to(cfg: &ExperimentConfig, csv_path: &str) -> Result<(), Fail> {
    cfg.validate()?;
    let records = run_sweep(cfg)?;
    write_csv(&records, Path::new(csv_path))?;
    Ok(())
}

/// Runs a named preset and writes its CSV to `csv_path`. Zero `trials` or
/// `workers` keep the preset's values.
///
/// # Safety
/// `name` and `csv_path` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn qs_run_preset(
    name: *const c_char,
    seed: u64,
    trials: u64,
    workers: usize,
    csv_path: *const c_char,
) -> QsStatus {
    guard(|| {
        let mut cfg = preset(text(name, "name")?)?;
        cfg.seed = seed;
        if trials > 0 {
            cfg.trials = trials;
        }
        if workers > 0 {
            cfg.workers = workers;
        }
        sweep_to(&cfg, text(csv_path, "csv_path")?)
    })
}

/// Runs the experiment described by the config file at `config_path` and
/// writes its CSV to `csv_path`.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn qs_run_config(config_path: *const c_char, csv_path: *const c_char) -> QsStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_file(Path::new(text(config_path, "config_path")?))?;
        sweep_to(&cfg, text(csv_path, "csv_path")?)
    })
}
