//! Command implementations behind the `mwcz` binary.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use mwcz_core::config::{ConfigError, ResolvedDevice, RunConfig};
use mwcz_core::cz::{build_problem, delta_scan, initial_guess, optimize_problem, CzSettings, ScanSettings};
use mwcz_core::device::{build_static_hamiltonian, diagonalize_and_label, DeviceParams};
use mwcz_core::io::{
    create_in, read_records, write_iteration_csv, write_json, write_records, write_scan_csv, write_xeb_csv,
    XebSummaryRow,
};
use mwcz_core::propagation::propagate_computational;
use mwcz_core::pulse::DrivePulse;
use mwcz_core::seed::stream_seed;
use mwcz_core::xeb::{
    apply_confusion, correct_readout, fit_decay, generate_random_circuit, ideal_probs, joint_confusion,
    leak_metric, sample_frequencies, simulate_measured, spb_purity, xeb_alpha, ConfusionMatrix, DecayFit, XebRecord,
};
use mwcz_core::GateResult;
use serde::Serialize;

/// Exit status for configuration problems, reported before any computation.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "mwcz", version, about = "All-microwave CZ gate simulation, optimization and XEB analysis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GlobalArgs {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Global seed; overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Device preset; overrides `[device] preset`.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate the configured pulse; writes the time trace and gate metrics.
    Simulate,
    /// Nelder–Mead optimization of the CZ pulse at the configured device.
    Optimize,
    /// Optimize over a detuning grid and aggregate the best points.
    Scan,
    /// Simulate random-circuit XEB records.
    XebGenerate,
    /// Estimate α, √P and leak per cycle count from XEB records.
    XebAnalyze {
        /// Records file; defaults to `[xeb] records` or `<out>/records.json`.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Correct measured distributions with per-qubit readout matrices.
    ReadoutCorrect {
        /// One distribution per line, comma or whitespace separated.
        #[arg(long)]
        input: PathBuf,
        /// Use the three-level matrices instead of the two-level ones.
        #[arg(long)]
        qutrit: bool,
    },
}

/// Maps an error to the process exit status.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let is_config = err.chain().any(|e| {
        e.downcast_ref::<ConfigError>().is_some()
            || matches!(e.downcast_ref::<mwcz_core::Error>(), Some(mwcz_core::Error::Config(_)))
    });
    if is_config {
        EXIT_CONFIG
    } else {
        EXIT_FAILURE
    }
}

/// Loads the config and applies command-line overrides.
pub fn load_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &global.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(preset) = &global.preset {
        cfg.device.preset = Some(preset.clone());
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    let cfg = load_config(&cli.global)?;
    cfg.validate()?;
    match cli.command {
        Command::Simulate => cmd_simulate(&cfg),
        Command::Optimize => cmd_optimize(&cfg),
        Command::Scan => cmd_scan(&cfg),
        Command::XebGenerate => cmd_xeb_generate(&cfg),
        Command::XebAnalyze { records } => cmd_xeb_analyze(&cfg, records.as_deref()),
        Command::ReadoutCorrect { input, qutrit } => cmd_readout_correct(&cfg, &input, qutrit),
    }
}

/// Device and initial pulse described by `cfg`.
fn initial_setup(cfg: &RunConfig) -> Result<(ResolvedDevice, DrivePulse)> {
    let device = cfg.device.resolve()?;
    let eig = diagonalize_and_label(&build_static_hamiltonian(&device.params)?)?;
    let mut pulse = initial_guess(&eig, cfg.pulse.target, cfg.pulse.amp)?;
    pulse.envelope = cfg.pulse.resolve_envelope(&device.envelope)?;
    pulse.duration = cfg.pulse.duration;
    pulse.target = cfg.pulse.drive;
    pulse.carrier_phase = cfg.pulse.carrier_phase;
    if let Some(wd) = cfg.pulse.carrier_freq {
        pulse.carrier_freq = wd;
    }
    pulse.validate()?;
    Ok((device, pulse))
}

fn cz_settings(cfg: &RunConfig, pulse: &DrivePulse) -> Result<CzSettings> {
    let Some(initial_lambda) = pulse.lambda() else {
        return Err(ConfigError::Invalid("optimization needs a λ envelope".into()).into());
    };
    Ok(CzSettings {
        duration: cfg.pulse.duration,
        drive_target: cfg.pulse.drive,
        initial_lambda,
        free_params: cfg.optimize.free_params.clone(),
        propagation: cfg.propagation.options(),
    })
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    device: &'a DeviceParams,
    pulse: &'a DrivePulse,
    dt_ns: f64,
    steps: usize,
    gate: &'a GateResult,
}

fn write_waveform(dir: &Path, name: &str, pulse: &DrivePulse, samples: usize) -> Result<()> {
    let (_, w) = create_in(dir, name)?;
    pulse.write_waveform_csv(w, samples)?;
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let (device, pulse) = initial_setup(cfg)?;
    let h = build_static_hamiltonian(&device.params)?;
    let eig = diagonalize_and_label(&h)?;
    let evo = propagate_computational(&eig, &h, &pulse, &cfg.propagation.options())?;
    let gate = GateResult::from_evolution(&evo, &eig)?;

    let dir = &cfg.output_dir;
    let (path, w) = create_in(dir, "trace.csv")?;
    evo.trace.write_csv(w)?;
    info!("wrote {}", path.display());
    write_waveform(dir, "waveform.csv", &pulse, cfg.pulse.waveform_samples)?;
    let report = SimulateReport { device: &device.params, pulse: &pulse, dt_ns: evo.dt, steps: evo.steps, gate: &gate };
    write_json(&report, create_in(dir, "gate.json")?.1)?;
    println!(
        "CZ error {:.6e}, conditional phase {:?} rad, mean leakage {:.3e}",
        gate.error(),
        gate.conditional_phase,
        gate.mean_leakage()
    );
    Ok(())
}

pub fn cmd_optimize(cfg: &RunConfig) -> Result<()> {
    let (device, pulse) = initial_setup(cfg)?;
    let mut settings = cz_settings(cfg, &pulse)?;
    settings.initial_lambda = pulse.lambda().unwrap_or(settings.initial_lambda);
    let mut problem = build_problem(&device.params, cfg.pulse.target, cfg.pulse.amp, cfg.optimize.budget, &settings)?;
    if cfg.pulse.carrier_freq.is_some() {
        problem.base_pulse.carrier_freq = pulse.carrier_freq;
    }
    problem.base_pulse.carrier_phase = pulse.carrier_phase;
    let run = optimize_problem(&problem)?;

    let dir = &cfg.output_dir;
    write_iteration_csv(&run.trace, create_in(dir, "iterations.csv")?.1)?;
    write_waveform(dir, "waveform_initial.csv", &run.initial_pulse, cfg.pulse.waveform_samples)?;
    write_waveform(dir, "waveform_optimized.csv", &run.optimized_pulse, cfg.pulse.waveform_samples)?;
    write_json(&run, create_in(dir, "optimize.json")?.1)?;
    println!(
        "CZ error {:.6e} -> {:.6e} after {} iterations ({} evaluations)",
        run.initial_result.error(),
        run.best_error(),
        run.iterations,
        run.evaluations
    );
    Ok(())
}

pub fn cmd_scan(cfg: &RunConfig) -> Result<()> {
    cfg.scan.validate()?;
    let (device, pulse) = initial_setup(cfg)?;
    let settings = ScanSettings {
        target: cfg.pulse.target,
        amp: cfg.pulse.amp,
        budget: cfg.scan.budget.unwrap_or(cfg.optimize.budget),
        k: cfg.scan.k,
        collision_window: cfg.scan.collision_window,
        cz: cz_settings(cfg, &pulse)?,
    };
    let base = device.params;
    let scan = delta_scan(|delta| base.with_dressed_detuning(delta), &cfg.scan.grid(), &settings)?;

    let dir = &cfg.output_dir;
    write_scan_csv(&scan, create_in(dir, "scan.csv")?.1)?;
    let traces = dir.join("traces");
    for (i, p) in scan.points.iter().enumerate() {
        write_iteration_csv(&p.trace, create_in(&traces, &format!("iterations_{i:03}.csv"))?.1)?;
    }
    write_json(&scan, create_in(dir, "scan.json")?.1)?;
    println!("mean of best {} of {} errors: {:.6e}", scan.k, scan.points.len(), scan.aggregate);
    Ok(())
}

fn load_pair(q1: Option<&PathBuf>, q2: Option<&PathBuf>, what: &str) -> Result<Option<ConfusionMatrix>> {
    match (q1, q2) {
        (Some(a), Some(b)) => {
            let m1 = ConfusionMatrix::load("Q1", a)?;
            let m2 = ConfusionMatrix::load("Q2", b)?;
            Ok(Some(joint_confusion(&[m1, m2])?.matrix))
        }
        (None, None) => Ok(None),
        _ => Err(ConfigError::Invalid(format!("{what} readout needs both q1 and q2 matrices")).into()),
    }
}

/// Embeds a two-qubit bitstring distribution into the 3 × 3 outcome space.
fn embed_qutrit(p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 9];
    for (b, v) in p.iter().enumerate() {
        out[3 * (b >> 1) + (b & 1)] = *v;
    }
    out
}

pub fn cmd_xeb_generate(cfg: &RunConfig) -> Result<()> {
    let two = load_pair(cfg.readout.q1.as_ref(), cfg.readout.q2.as_ref(), "two-level")?;
    let three = load_pair(cfg.readout.q1_3level.as_ref(), cfg.readout.q2_3level.as_ref(), "three-level")?;
    let x = &cfg.xeb;
    let mut records = Vec::with_capacity(x.cycles.len() * x.circuits_per_cycle);
    for &m in &x.cycles {
        for i in 0..x.circuits_per_cycle as u64 {
            let circuit_seed = stream_seed(cfg.seed, 2 * m as u64, i);
            let shot_seed = stream_seed(cfg.seed, 2 * m as u64 + 1, i);
            let circuit = generate_random_circuit(2, m, circuit_seed)?;
            let exact = simulate_measured(&circuit, x.p_dep, 0, shot_seed)?;
            let distort = |p: Vec<f64>, m: &Option<ConfusionMatrix>| match m {
                Some(m) => apply_confusion(&p, m),
                None => Ok(p),
            };
            let sample = |p: Vec<f64>| -> Result<Vec<f64>> {
                if x.shots == 0 {
                    return Ok(p);
                }
                Ok(sample_frequencies(&p, x.shots, shot_seed)?)
            };
            let p_measured = sample(distort(exact.clone(), &two)?)?;
            let p_measured_qutrit = match &three {
                Some(_) => Some(sample(distort(embed_qutrit(&exact), &three)?)?),
                None => None,
            };
            records.push(XebRecord {
                cycles: m,
                circuit_seed,
                p_ideal: ideal_probs(&circuit).to_vec(),
                p_measured,
                p_measured_qutrit,
            });
        }
    }
    let (path, w) = create_in(&cfg.output_dir, "records.json")?;
    write_records(&records, w)?;
    println!("wrote {} records to {}", records.len(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct XebReport {
    rows: Vec<XebSummaryRow>,
    alpha_fit: Option<DecayFit>,
}

pub fn cmd_xeb_analyze(cfg: &RunConfig, records: Option<&Path>) -> Result<()> {
    let path = records
        .map(Path::to_path_buf)
        .or_else(|| cfg.xeb.records.clone())
        .unwrap_or_else(|| cfg.output_dir.join("records.json"));
    let records = read_records(&path).with_context(|| format!("reading {}", path.display()))?;
    if records.is_empty() {
        bail!("{} holds no records", path.display());
    }
    let three = load_pair(cfg.readout.q1_3level.as_ref(), cfg.readout.q2_3level.as_ref(), "three-level")?;

    let mut cycles: Vec<usize> = records.iter().map(|r| r.cycles).collect();
    cycles.sort_unstable();
    cycles.dedup();
    let mut rows = Vec::with_capacity(cycles.len());
    for m in cycles {
        let group: Vec<XebRecord> = records.iter().filter(|r| r.cycles == m).cloned().collect();
        let alpha = xeb_alpha(&group).unwrap_or(f64::NAN);
        let sqrt_purity = spb_purity(&group).map(|s| s.sqrt_purity).unwrap_or(f64::NAN);
        let leaks = group
            .iter()
            .filter_map(|r| r.p_measured_qutrit.as_ref())
            .map(|q| {
                let p = match &three {
                    Some(m) => correct_readout(q, m)?.p,
                    None => q.clone(),
                };
                leak_metric(&p)
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let leak = (!leaks.is_empty()).then(|| leaks.iter().sum::<f64>() / leaks.len() as f64);
        rows.push(XebSummaryRow { cycles: m, alpha, sqrt_purity, leak });
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.cycles as f64, r.alpha)).collect();
    let alpha_fit = fit_decay(&points).ok();

    let dir = &cfg.output_dir;
    write_xeb_csv(&rows, create_in(dir, "xeb.csv")?.1)?;
    write_json(&XebReport { rows, alpha_fit }, create_in(dir, "xeb_fit.json")?.1)?;
    if let Some(fit) = alpha_fit {
        println!("per-cycle fidelity {:.6} (amplitude {:.4})", fit.fidelity, fit.amplitude);
    }
    Ok(())
}

fn parse_distributions(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().with_context(|| format!("bad probability `{t}`")))
                .collect()
        })
        .collect()
}

fn outcome_labels(alphabet: &[usize]) -> Vec<String> {
    let total: usize = alphabet.iter().product();
    (0..total)
        .map(|mut idx| {
            let mut digits = vec![0; alphabet.len()];
            for (slot, &base) in alphabet.iter().enumerate().rev() {
                digits[slot] = idx % base;
                idx /= base;
            }
            digits.iter().map(|d| d.to_string()).collect()
        })
        .collect()
}

pub fn cmd_readout_correct(cfg: &RunConfig, input: &Path, qutrit: bool) -> Result<()> {
    let matrix = if qutrit {
        load_pair(cfg.readout.q1_3level.as_ref(), cfg.readout.q2_3level.as_ref(), "three-level")?
    } else {
        load_pair(cfg.readout.q1.as_ref(), cfg.readout.q2.as_ref(), "two-level")?
    };
    let Some(matrix) = matrix else {
        return Err(ConfigError::Invalid("readout-correct needs [readout] matrices".into()).into());
    };
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let rows = parse_distributions(&text)?;

    let labels = outcome_labels(&matrix.alphabet);
    let (path, w) = create_in(&cfg.output_dir, "corrected.csv")?;
    let mut out = csv_writer(w);
    let mut header = vec!["row".to_string()];
    header.extend(labels.iter().map(|l| format!("p_{l}")));
    header.extend(["clipped_mass".into(), "condition_number".into()]);
    out.write_record(&header)?;
    for (i, raw) in rows.iter().enumerate() {
        let c = correct_readout(raw, &matrix)?;
        let mut rec = vec![i.to_string()];
        rec.extend(c.p.iter().map(|v| v.to_string()));
        rec.push(c.clipped_mass.to_string());
        rec.push(c.condition_number.to_string());
        out.write_record(&rec)?;
    }
    out.flush()?;
    println!("corrected {} distributions into {}", rows.len(), path.display());
    Ok(())
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_alphabet() {
        assert_eq!(outcome_labels(&[2, 2]), ["00", "01", "10", "11"]);
        assert_eq!(outcome_labels(&[3, 3])[5], "12");
    }

    #[test]
    fn qutrit_embedding_keeps_mass() {
        let q = embed_qutrit(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(q, vec![0.1, 0.2, 0.0, 0.3, 0.4, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn parses_distribution_lines() {
        let rows = parse_distributions("# raw\n0.5, 0.5\n0.25 0.75\n").unwrap();
        assert_eq!(rows, vec![vec![0.5, 0.5], vec![0.25, 0.75]]);
        assert!(parse_distributions("0.5 x").is_err());
    }
}
