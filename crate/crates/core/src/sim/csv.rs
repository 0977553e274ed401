//! CSV output with a fixed column order and six significant digits.

use std::fmt::Write as _;
use std::path::Path;

use super::sweep::SweepRecord;
use crate::error::{Error, Result};

/// Column order of every emitted file.
pub const CSV_HEADER: &str = "detector,q,alpha,p_attack,t,pe_emp,pe_ci,pd_emp,pf_emp,pe_analytic,pd_analytic,pf_analytic,x_hat_mean,p_hat_mean,n_ref,tau,trials,errors,x_hat_var,crlb,deflection";

/// Six significant digits in the shortest decimal that reads back to the
/// rounded value; NaN is written `nan`.
fn num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{v:.5e}").parse().unwrap_or(v);
    if rounded == 0.0 {
        "0".into()
    } else {
        format!("{rounded}")
    }
}

/// Renders records as CSV text, header included.
pub fn emit_csv(records: &[SweepRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.detector,
            r.q,
            num(r.alpha),
            num(r.p_attack),
            r.t,
            num(r.pe_emp),
            num(r.pe_ci),
            num(r.pd_emp),
            num(r.pf_emp),
            num(r.pe_analytic),
            num(r.pd_analytic),
            num(r.pf_analytic),
            num(r.x_hat_mean),
            num(r.p_hat_mean),
            r.n_ref,
            num(r.tau),
            r.trials,
            r.errors,
            num(r.x_hat_var),
            num(r.crlb),
            num(r.deflection),
        );
    }
    s
}

pub fn write_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    std::fs::write(path, emit_csv(records)).map_err(|e| Error::io(path, e))
}

fn field<T: std::str::FromStr>(line: usize, name: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::invalid(format!("line {line}: bad {name} value '{v}'")))
}

/// Parses text produced by [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::invalid("missing or unexpected CSV header"));
    }
    let names: Vec<&str> = CSV_HEADER.split(',').collect();
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let ln = n + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != names.len() {
            return Err(Error::invalid(format!("line {ln}: expected {} fields, got {}", names.len(), f.len())));
        }
        let x = |k: usize| field::<f64>(ln, names[k], f[k]);
        out.push(SweepRecord {
            detector: f[0].to_string(),
            q: field(ln, names[1], f[1])?,
            alpha: x(2)?,
            p_attack: x(3)?,
            t: field(ln, names[4], f[4])?,
            pe_emp: x(5)?,
            pe_ci: x(6)?,
            pd_emp: x(7)?,
            pf_emp: x(8)?,
            pe_analytic: x(9)?,
            pd_analytic: x(10)?,
            pf_analytic: x(11)?,
            x_hat_mean: x(12)?,
            p_hat_mean: x(13)?,
            n_ref: field(ln, names[14], f[14])?,
            tau: x(15)?,
            trials: field(ln, names[16], f[16])?,
            errors: field(ln, names[17], f[17])?,
            x_hat_var: x(18)?,
            crlb: x(19)?,
            deflection: x(20)?,
        });
    }
    Ok(out)
}
