use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qsparse_core::channel::blinding_product;
use qsparse_core::detectors::{glrt_weights, lmpt_weights, Network};
use qsparse_core::model::{assumption_check, make_reference_thresholds, SensorSpec};
use qsparse_core::sim::{preset, run_sweep, write_csv, ExperimentConfig, ExperimentKind, SweepRecord, PRESET_NAMES};
use qsparse_core::Error;

/// Monte Carlo experiments for distributed sparse-signal detection under
/// Byzantine attacks.
#[derive(Parser)]
#[command(name = "qsparse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials per sweep point.
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads (0 = all cores); results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Extra `key=value` settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a named preset and write `<name>.csv` (and a gnuplot script).
    Preset {
        name: String,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// List the preset names.
    ListPresets,
    /// Check reference-sensor assumptions and print blinding points.
    Check {
        /// Config file; the fig2 preset when omitted.
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Io { .. } => 3,
        _ => 2,
    }
}

fn apply(cfg: &mut ExperimentConfig, o: &Overrides) -> Result<(), Error> {
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(t) = o.trials {
        cfg.trials = t;
    }
    if let Some(w) = o.workers {
        cfg.workers = w;
    }
    for kv in &o.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()
}

fn report_errors(records: &[SweepRecord]) {
    let failed: u64 = records.iter().map(|r| r.errors).sum();
    if failed > 0 {
        eprintln!("warning: {failed} detector evaluations failed:");
        for r in records.iter().filter(|r| r.errors > 0) {
            eprintln!(
                "  {} q={} alpha={} p_attack={} t={}: {} errors",
                r.detector, r.q, r.alpha, r.p_attack, r.t, r.errors
            );
        }
    }
}

fn gnuplot_script(name: &str, cfg: &ExperimentConfig) -> String {
    // the full config as comments, so the plot carries its settings
    let mut s: String = cfg.to_text().lines().map(|l| format!("# {l}\n")).collect();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set ylabel 'error probability'");
    let x = match cfg.kind {
        ExperimentKind::Detection if cfg.time_steps > 1 && cfg.p_attack.len() == 1 => ("t", 5),
        ExperimentKind::Estimator => ("t", 5),
        _ => ("p_attack", 4),
    };
    let _ = writeln!(s, "set xlabel '{}'", x.0);
    let y = if cfg.kind == ExperimentKind::Estimator { 19 } else { 6 };
    let _ = writeln!(
        s,
        "plot for [d in system(\"tail -n +2 {name}.csv | cut -d, -f1 | sort -u\")] '{name}.csv' using (strcol(1) eq d ? ${} : 1/0):{y} with linespoints title d",
        x.1
    );
    s
}

fn write_out(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn check(cfg: &ExperimentConfig) -> Result<(), Error> {
    let model = cfg.model()?;
    for &q in &cfg.q_bits {
        let t = cfg.thresholds.thresholds(q, cfg.sigma_n2)?;
        let regular = SensorSpec::new(0, 1.0, t.clone())?;
        let reference =
            SensorSpec::new(0, 1.0, make_reference_thresholds(&regular, cfg.reference_offset, cfg.reference_side)?)?
                .reference();
        let (holds, mass) = assumption_check(&model, &reference);
        println!(
            "q={q}: regular cuts {:?}, reference anchor mass {mass:.12} ({})",
            t.finite(),
            if holds { "ok" } else { "VIOLATED" }
        );
        let net = Network::new(vec![regular; cfg.n_sensors.max(1)])?;
        for (name, w) in [
            ("LMPT", lmpt_weights(&net, &model, 0.0)?),
            ("GLRT", glrt_weights(&net, &model, model.p())?),
        ] {
            match blinding_product(&net, &model, &w) {
                Ok(x) => println!("  {name} blinding point alpha*P_A = {x:.6}"),
                Err(Error::OrthogonalWeights) => {
                    println!("  {name}: weights vanish; this quantizer is non-informative for {name}")
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, out, overrides } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            apply(&mut cfg, &overrides)?;
            let records = run_sweep(&cfg)?;
            report_errors(&records);
            match out {
                Some(p) => write_csv(&records, &p)?,
                None => print!("{}", qsparse_core::sim::emit_csv(&records)),
            }
        }
        Command::Preset { name, out, overrides } => {
            let mut cfg = preset(&name)?;
            apply(&mut cfg, &overrides)?;
            let records = run_sweep(&cfg)?;
            report_errors(&records);
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            let csv = out.join(format!("{name}.csv"));
            write_csv(&records, &csv)?;
            write_out(&out.join(format!("{name}.gp")), &gnuplot_script(&name, &cfg))?;
            eprintln!("wrote {} ({} records)", csv.display(), records.len());
        }
        Command::ListPresets => {
            for n in PRESET_NAMES {
                println!("{n}");
            }
        }
        Command::Check { config, preset: name } => {
            let cfg = match (config, name) {
                (Some(p), _) => ExperimentConfig::from_file(&p)?,
                (None, Some(n)) => preset(&n)?,
                (None, None) => preset("fig2")?,
            };
            check(&cfg)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
