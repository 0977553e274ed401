//! Acceptance run: evaluates every acceptance criterion at its stated
//! tolerance and prints one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use common::checks;
use qsparse_core::analysis::{deflection_coefficient, statistic_moments};
use qsparse_core::channel::{blinding_product, mixture_codeword_pmf_x};
use qsparse_core::detectors::{glrt_weights, lmpt_weights, DetectorKind, Network};
use qsparse_core::model::{honest_codeword_pmf, Hypothesis, SensorSpec};
use qsparse_core::sim::{emit_csv, preset, run_sweep, ExperimentConfig, SweepRecord, PRESET_NAMES};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail = format!("{}; {:.1} s", o.detail, took.as_secs_f64());
    if let Some(l) = limit {
        if took > l {
            o.pass = false;
            o.detail = format!("{} exceeds {} s", o.detail, l.as_secs());
        }
    }
    o
}

fn run(cfg: &ExperimentConfig) -> Vec<SweepRecord> {
    run_sweep(cfg).expect("sweep failed")
}

fn find<'a>(records: &'a [SweepRecord], det: &str, q: u32, tau: Option<f64>, pa: f64) -> &'a SweepRecord {
    records
        .iter()
        .find(|r| {
            r.detector == det
                && r.q == q
                && (r.p_attack - pa).abs() < 1e-12
                && tau.map_or(r.tau.is_nan(), |t| (r.tau - t).abs() < 1e-12)
        })
        .unwrap_or_else(|| panic!("no record for {det} q={q} tau={tau:?} P_A={pa}"))
}

fn estimator() -> Outcome {
    let mut cfg = preset("estimator").unwrap();
    cfg.trials = 10_000;
    let records = run(&cfg);
    let mut worst_bias = 0.0f64;
    let mut worst_var = 0.0f64;
    let mut seen = Vec::new();
    for r in &records {
        let x = r.alpha * r.p_attack;
        let n = r.n_ref as f64 * f64::from(r.t);
        let bound = x * (1.0 - x) / n;
        worst_bias = worst_bias.max((r.x_hat_mean - x).abs() / (3.0 * (bound / r.trials as f64).sqrt()));
        worst_var = worst_var.max((r.x_hat_var / bound - 1.0).abs());
        seen.push((format!("{x:.2}"), n as u64));
    }
    let grid_ok = ["0.15", "0.30"]
        .iter()
        .all(|x| [80, 800, 8000].iter().all(|n| seen.contains(&(x.to_string(), *n))));
    outcome(
        grid_ok && worst_bias < 1.0 && worst_var < 0.1 && cfg.trials >= 10_000,
        format!(
            "{} points, worst |bias| / 3 sd = {worst_bias:.3}, worst |var / bound - 1| = {worst_var:.4}",
            records.len()
        ),
    )
}

fn blinding() -> Outcome {
    let mut cfg = preset("blinding").unwrap();
    cfg.trials = 10_000;
    let records = run(&cfg);
    let model = cfg.model().unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for &q in &cfg.q_bits {
        let t = cfg.thresholds.thresholds(q, cfg.sigma_n2).unwrap();
        let proto = SensorSpec::new(0, 1.0, t.clone()).unwrap();
        let net = Network::new((0..cfg.n_sensors).map(|i| SensorSpec::new(i, 1.0, t.clone()).unwrap()).collect())
            .unwrap();
        for kind in [DetectorKind::Lmpt, DetectorKind::Glrt] {
            let w = match kind {
                DetectorKind::Lmpt => lmpt_weights(&net, &model, 0.0).unwrap(),
                _ => glrt_weights(&net, &model, model.p()).unwrap(),
            };
            let x = blinding_product(&net, &model, &w).unwrap();
            let f0 = vec![mixture_codeword_pmf_x(&honest_codeword_pmf(&model, &proto, Hypothesis::H0), x); net.len()];
            let f1 = vec![mixture_codeword_pmf_x(&honest_codeword_pmf(&model, &proto, Hypothesis::H1), x); net.len()];
            let d = deflection_coefficient(&statistic_moments(&w, &f0, &f1).unwrap()).unwrap();
            let r = find(&records, kind.name(), q, None, x);
            let gap = r.pd_emp - r.pf_emp;
            let ok = d.abs() < 1e-10 && r.deflection.abs() < 1e-10 && gap.abs() < 0.02;
            pass &= ok;
            lines.push(format!("{} q={q}: x*={x:.4} D_f={d:.1e} Pd-Pf={gap:+.4}", kind.name()));
        }
    }
    outcome(pass, lines.join(", "))
}

fn gradients() -> Outcome {
    let e = checks::gradients(2024, 50);
    outcome(e < 1e-4, format!("50 configurations, worst relative error {e:.2e}"))
}

/// The 10^4-trial run behind the calibration and reputation criteria:
/// reference rules and their filtered variants at `tau = 0.5`.
fn reference_rules_config() -> ExperimentConfig {
    let mut cfg = preset("fig3").unwrap();
    cfg.detectors = vec![DetectorKind::Glrtrs, DetectorKind::Lmptrs, DetectorKind::EGlrtrs, DetectorKind::ELmptrs];
    cfg.filter_tau = vec![0.5];
    cfg.trials = 10_000;
    cfg
}

/// The looser filter, only where the two thresholds are compared.
fn loose_filter_run() -> Vec<SweepRecord> {
    let mut cfg = reference_rules_config();
    cfg.detectors = vec![DetectorKind::EGlrtrs, DetectorKind::ELmptrs];
    cfg.filter_tau = vec![0.7];
    cfg.p_attack = vec![1.0];
    run(&cfg)
}

fn calibration(records: &[SweepRecord]) -> Outcome {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in records {
        lo = lo.min(r.pf_emp);
        hi = hi.max(r.pf_emp);
    }
    let n = records.len();
    outcome(
        (lo - 0.4).abs() <= 0.02 && (hi - 0.4).abs() <= 0.02 && records.iter().all(|r| r.trials >= 10_000),
        format!("{n} records (GLRTRS, LMPTRS, E-GLRTRS, E-LMPTRS over P_A), Pf in [{lo:.4}, {hi:.4}]"),
    )
}

fn attack_aware() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, plain, aware) in [("fig2", "GLRT", "GLRTRS"), ("fig5", "LMPT", "LMPTRS")] {
        let mut cfg = preset(name).unwrap();
        cfg.trials = 10_000;
        let records = run(&cfg);
        for &q in &cfg.q_bits {
            let mut min_ratio = f64::INFINITY;
            for &pa in cfg.p_attack.iter().filter(|&&pa| pa >= 0.3 - 1e-12) {
                let a = find(&records, plain, q, None, pa);
                let b = find(&records, aware, q, None, pa);
                min_ratio = min_ratio.min((a.pe_emp - b.pe_emp) / (2.0 * a.pe_ci.max(b.pe_ci)));
            }
            pass &= min_ratio > 1.0;
            lines.push(format!("{plain}-{aware} q={q} margin/2CI >= {min_ratio:.2}"));
        }
        if aware == "GLRTRS" {
            let gap = cfg
                .p_attack
                .iter()
                .map(|&pa| (find(&records, "GLRTRS", 1, None, pa).pe_emp - find(&records, "LRT", 1, None, pa).pe_emp).abs())
                .fold(0.0, f64::max);
            pass &= gap <= 0.05;
            lines.push(format!("|GLRTRS-LRT| q=1 <= {gap:.4}"));
        }
    }
    outcome(pass, lines.join(", "))
}

fn reputation(records: &[SweepRecord], loose: &[SweepRecord]) -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let grid: Vec<f64> = (1..=10).map(|k| f64::from(k) / 10.0).collect();
    for (base, enh) in [("GLRTRS", "E-GLRTRS"), ("LMPTRS", "E-LMPTRS")] {
        let mut worst_loss = f64::NEG_INFINITY;
        let mut min_gain = f64::INFINITY;
        for &pa in &grid {
            let b = find(records, base, 1, None, pa);
            let e = find(records, enh, 1, Some(0.5), pa);
            let ci = b.pe_ci.max(e.pe_ci);
            // never significantly worse than the base rule
            worst_loss = worst_loss.max((e.pe_emp - b.pe_emp) / ci);
            // and significantly better once the flips are frequent enough to see
            if pa >= 0.5 - 1e-12 {
                min_gain = min_gain.min((b.pe_emp - e.pe_emp) / ci);
            }
        }
        let t5 = find(records, enh, 1, Some(0.5), 1.0).pe_emp;
        let t7 = find(loose, enh, 1, Some(0.7), 1.0).pe_emp;
        pass &= worst_loss <= 1.0 && min_gain > 1.0 && t7 >= t5;
        lines.push(format!(
            "{enh}: (E-base)/CI <= {worst_loss:.2}, gain/CI for P_A>=0.5 >= {min_gain:.2}, P_A=1 tau 0.7 {t7:.4} vs 0.5 {t5:.4}"
        ));
    }
    outcome(pass, lines.join("; "))
}

fn convergence() -> Outcome {
    let mut cfg = preset("fig4").unwrap();
    cfg.trials = 20_000;
    let records = run(&cfg);
    let mut reach = BTreeMap::new();
    let mut lines = Vec::new();
    let mut pass = true;
    for &n_ref in &cfg.n_reference {
        let mut curve: Vec<&SweepRecord> = records.iter().filter(|r| r.n_ref == n_ref).collect();
        curve.sort_by_key(|r| r.t);
        let worst_rise = curve
            .windows(2)
            .map(|w| (w[1].pe_emp - w[0].pe_emp) / w[0].pe_ci.hypot(w[1].pe_ci))
            .fold(f64::NEG_INFINITY, f64::max);
        let tail = &curve[curve.len() - 5..];
        let floor = tail.iter().map(|r| r.pe_emp).sum::<f64>() / tail.len() as f64;
        let t = curve.iter().find(|r| r.pe_emp <= floor + 0.01).map(|r| r.t).unwrap_or(u32::MAX);
        reach.insert(n_ref, t);
        let first_last = curve[0].pe_emp >= curve[curve.len() - 1].pe_emp;
        pass &= worst_rise <= 1.0 && first_last;
        lines.push(format!(
            "N_ref={n_ref}: Pe {:.4} -> {:.4}, worst step rise {worst_rise:.2} CI, floor {floor:.4} reached at t={t}",
            curve[0].pe_emp,
            curve[curve.len() - 1].pe_emp
        ));
    }
    pass &= reach[&80] < reach[&20];
    outcome(pass, lines.join("; "))
}

fn enumeration() -> Outcome {
    let w = checks::enumeration(7, 4);
    outcome(w.err < 1e-12, format!("{} comparisons, worst relative error {:.2e}", w.cases, w.err))
}

fn collapse() -> Outcome {
    let w = checks::collapse(8, 100);
    outcome(w.err < 1e-12, format!("{} comparisons, worst gap {:.2e}", w.cases, w.err))
}

fn determinism() -> Outcome {
    let mut bad = Vec::new();
    for name in PRESET_NAMES {
        let mut cfg = preset(name).unwrap();
        cfg.trials = 200;
        let mut texts = Vec::new();
        for workers in [1, 4] {
            cfg.workers = workers;
            texts.push(emit_csv(&run(&cfg)));
        }
        if texts[0] != texts[1] {
            bad.push(name);
        }
    }
    outcome(bad.is_empty(), format!("{} presets at workers 1 and 4, mismatches: {bad:?}", PRESET_NAMES.len()))
}

fn main() {
    // libtest passes flags such as --nocapture or a filter; a filter that
    // does not mention this target skips it.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let minute = Duration::from_secs(60);
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "estimator efficiency", timed(Some(minute), estimator)));
    results.push((2, "blinding point", timed(Some(minute), blinding)));
    results.push((3, "score weights vs finite differences", timed(None, gradients)));
    let start = Instant::now();
    let shared = run(&reference_rules_config());
    let shared_time = start.elapsed();
    let mut c4 = calibration(&shared);
    c4.detail = format!("{}; {:.1} s", c4.detail, shared_time.as_secs_f64());
    if shared_time > 5 * minute {
        c4.pass = false;
        c4.detail += " exceeds 300 s";
    }
    results.push((4, "false-alarm calibration", c4));
    results.push((5, "attack-aware rules beat attack-blind ones", timed(Some(10 * minute), attack_aware)));
    results.push((6, "reputation filter", timed(None, || reputation(&shared, &loose_filter_run()))));
    results.push((7, "convergence over time", timed(None, convergence)));
    results.push((8, "exhaustive enumeration", timed(None, enumeration)));
    results.push((9, "collapse identities", timed(None, collapse)));
    results.push((10, "determinism across worker counts", timed(None, determinism)));

    println!();
    for (n, name, o) in &results {
        println!("{} criterion {n:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
