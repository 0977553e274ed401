//! Named experiment presets.
//!
//! All detection presets share one operating point: 280 sensors of which
//! 80 are reference sensors, unit noise, signal variance 5, sparsity 0.2
//! under H1, 30% Byzantines, a 0.4 false-alarm target and equal priors.

use super::config::{ExperimentConfig, ExperimentKind, ReportSteps, RoleMode};
use crate::detectors::DetectorKind;
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 7] = ["fig2", "fig3", "fig4", "fig5", "fig6", "estimator", "blinding"];

/// Sparsity degree in force under H1.
const P_H1: f64 = 0.2;

/// Binary quantizer cut, in noise standard deviations. A cut at zero makes
/// the binary LMPT weights vanish, so the presets move it off center.
const Q1_CUT: f64 = 0.5;

/// Two-bit cuts, in noise standard deviations. Equiprobable cuts make the
/// H0 pmf uniform, which the flip channel leaves unchanged, so they would
/// hide the attack from every rule.
const Q2_CUTS: [f64; 3] = [-0.5, 0.5, 1.5];

/// Reference-threshold shift. At `P_H1` the H1 spread is `sqrt(2)`, so the
/// library default of 6 would leave about 5e-5 of mass off the anchor.
const REFERENCE_OFFSET: f64 = 10.0;

fn attack_grid() -> Vec<f64> {
    (1..=10).map(|k| f64::from(k) / 10.0).collect()
}

fn base() -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        n_sensors: 280,
        n_reference: vec![80],
        q_bits: vec![1],
        sigma_n2: 1.0,
        sigma_x2: 5.0,
        p: P_H1,
        alpha: vec![0.3],
        p_attack: attack_grid(),
        target_pfa: 0.4,
        trials: 10_000,
        reference_offset: REFERENCE_OFFSET,
        ..ExperimentConfig::default()
    };
    cfg.thresholds.explicit.insert(1, vec![Q1_CUT]);
    cfg.thresholds.explicit.insert(2, Q2_CUTS.to_vec());
    cfg
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    use DetectorKind::*;
    let mut cfg = base();
    match name {
        "fig2" => {
            cfg.q_bits = vec![1, 2];
            cfg.detectors = vec![Lrt, Glrt, Glrtrs];
        }
        "fig5" => {
            cfg.q_bits = vec![1, 2];
            cfg.detectors = vec![Lrt, Lmpt, Lmptrs];
        }
        "fig3" => {
            cfg.detectors = vec![Lrt, Glrtrs, EGlrtrs];
            cfg.filter_tau = vec![0.5, 0.7];
            cfg.time_steps = 20;
        }
        "fig6" => {
            cfg.detectors = vec![Lrt, Lmpt, Lmptrs, ELmptrs];
            cfg.filter_tau = vec![0.5, 0.7];
            cfg.time_steps = 20;
        }
        "fig4" => {
            cfg.detectors = vec![Glrtrs];
            cfg.n_reference = vec![20, 40, 80];
            cfg.n_regular_fixed = Some(200);
            cfg.p_attack = vec![0.5];
            cfg.time_steps = 15;
            cfg.report_steps = ReportSteps::All;
        }
        "estimator" => {
            cfg.kind = ExperimentKind::Estimator;
            cfg.detectors = vec![];
            cfg.p_attack = vec![0.5, 1.0];
            cfg.time_steps = 100;
            cfg.report_steps = ReportSteps::At(vec![1, 10, 100]);
            cfg.role_mode = RoleMode::IidPerStep;
        }
        "blinding" => {
            cfg.kind = ExperimentKind::Blinding;
            cfg.q_bits = vec![1, 2];
            cfg.detectors = vec![Lmpt, Glrt];
            cfg.alpha = vec![1.0];
            cfg.p_attack = (0..=10).map(|k| f64::from(k) / 10.0).collect();
        }
        _ => {
            return Err(Error::config(format!(
                "unknown preset '{name}' (expected one of {})",
                PRESET_NAMES.join(", ")
            )))
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
