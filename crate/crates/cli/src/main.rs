//! Command-line front end: single-point rate reports, distance sweeps,
//! Monte Carlo validation runs (honest and under attack), and cutoff
//! location.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure,
//! 3 statistical-threshold failure in Monte Carlo mode.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{ConfigError, Format, RunConfig};
use qkd_core as core;
use report::{kv_csv, num, report_json, sci};

#[derive(Parser)]
#[command(
    name = "qkd",
    version,
    about = "BB84 key-rate analysis for a triggered parametric down-conversion source"
)]
struct Cli {
    /// Configuration file: flat `key = value` lines, `#` comments,
    /// comma-separated lists.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Source strength (mean photon-pair rate).
    #[arg(long, global = true)]
    mu: Option<f64>,

    /// Fiber length in km.
    #[arg(long = "length-km", global = true, value_name = "KM")]
    length_km: Option<f64>,

    /// Random seed for Monte Carlo runs.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of simulated pulses.
    #[arg(long, global = true)]
    pulses: Option<u64>,

    /// Fraction of single-photon pulses suppressed in an attack run.
    #[arg(long = "block-fraction", global = true, value_name = "FRACTION")]
    block_fraction: Option<f64>,

    /// Output file (stdout when omitted).
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<String>,

    /// Output format: csv or json.
    #[arg(long, global = true)]
    format: Option<String>,

    /// Significant digits of formatted values.
    #[arg(long, global = true)]
    precision: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Observables and key rates for a single (mu, length) point.
    Rate,
    /// Key-rate-versus-distance table for one protocol.
    Sweep,
    /// Pulse-level simulation of the honest channel, compared to the
    /// analytic observables.
    Montecarlo,
    /// Monte Carlo run under a photon-number-splitting attack.
    Attack,
    /// Largest distance with a positive key rate, by bisection.
    Cutoff,
}

enum CliError {
    Validation(String),
    Numerical(String),
    Statistical(String),
    Io(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.0)
    }
}

impl From<core::Error> for CliError {
    fn from(e: core::Error) -> Self {
        match e {
            core::Error::InvalidParameter { .. }
            | core::Error::InvalidBracket { .. }
            | core::Error::UnboundedOdds { .. } => CliError::Validation(e.to_string()),
            core::Error::DegenerateObservables { .. }
            | core::Error::Truncation { .. }
            | core::Error::AllRatesZero { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Statistical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    // command-line flags override config keys one-for-one
    if let Some(mu) = cli.mu {
        config.mu = Some(mu);
    }
    if let Some(l) = cli.length_km {
        config.length_km = Some(l);
    }
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(pulses) = cli.pulses {
        config.pulses = Some(pulses);
    }
    if let Some(bf) = cli.block_fraction {
        config.block_fraction = Some(bf);
    }
    if let Some(out) = &cli.out {
        config.out = Some(out.clone());
    }
    if let Some(format) = &cli.format {
        config.format = Some(match format.as_str() {
            "csv" => Format::Csv,
            "json" => Format::Json,
            other => {
                return Err(CliError::Validation(format!(
                    "invalid value for 'format': '{other}' (expected csv or json)"
                )))
            }
        });
    }
    if let Some(p) = cli.precision {
        if !(1..=17).contains(&p) {
            return Err(CliError::Validation(format!(
                "invalid value for 'precision': must be in 1..=17, got {p}"
            )));
        }
        config.precision = Some(p);
    }
    Ok(config)
}

fn write_output(config: &RunConfig, content: &str) -> Result<(), CliError> {
    match &config.out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(cli)?;
    match cli.command {
        Command::Rate => cmd_rate(&config),
        Command::Sweep => cmd_sweep(&config),
        Command::Montecarlo => cmd_montecarlo(&config, false),
        Command::Attack => cmd_montecarlo(&config, true),
        Command::Cutoff => cmd_cutoff(&config),
    }
}

fn cmd_rate(config: &RunConfig) -> Result<(), CliError> {
    let mu = config.require("mu")?;
    let length_km = config.require("length_km")?;
    let src = config.source_params(mu)?;
    let ch = config.channel(length_km)?;
    let stats = src.stats(&core::TailPolicy::default())?;
    let summary = core::observables(&stats, &ch)?;
    let result = core::key_rates(
        &summary,
        &stats,
        &config.constants(),
        &core::MinimizerPolicy::default(),
    )?;

    let content = match config.format() {
        Format::Json => {
            let results = json!({
                "summary": report::summary_json(&summary),
                "key_rates": report::key_rates_json(&result),
            });
            let doc = report_json("rate", config.echo("rate"), results);
            format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())
        }
        Format::Csv => {
            let sig = config.precision();
            let mut pairs = vec![
                ("mu".to_string(), sci(mu, sig)),
                ("length_km".to_string(), sci(length_km, sig)),
                ("Q_t".to_string(), sci(summary.gain_triggered, sig)),
                ("E_t".to_string(), sci(summary.qber_triggered, sig)),
                ("Q_nt".to_string(), sci(summary.gain_nontriggered, sig)),
                ("E_nt".to_string(), sci(summary.qber_nontriggered, sig)),
                ("r".to_string(), sci(summary.trigger_ratio, sig)),
                ("R_t".to_string(), sci(result.triggered.rate, sig)),
                ("R_both".to_string(), sci(result.both.rate, sig)),
                ("R_final".to_string(), sci(result.final_rate, sig)),
                (
                    "strategy".to_string(),
                    report::strategy_name(result.selected()).to_string(),
                ),
            ];
            for (tag, point) in [("t", &result.triggered), ("both", &result.both)] {
                pairs.push((format!("x_star_{tag}"), sci(point.x_star, sig)));
                pairs.push((format!("xi_at_min_{tag}"), sci(point.xi_at_min, sig)));
                pairs.push((
                    format!("eps_at_min_{tag}"),
                    point
                        .eps_at_min
                        .map(|e| sci(e, sig))
                        .unwrap_or_else(|| "undefined".into()),
                ));
                pairs.push((format!("ec_cost_{tag}"), sci(point.ec_cost, sig)));
                pairs.push((format!("vacuum_gain_{tag}"), sci(point.vacuum_gain, sig)));
                pairs.push((
                    format!("single_photon_gain_{tag}"),
                    sci(point.single_photon_gain, sig),
                ));
            }
            kv_csv(&pairs)
        }
    };
    write_output(config, &content)
}

fn cmd_sweep(config: &RunConfig) -> Result<(), CliError> {
    let spec = config.sweep_spec()?;
    let rows = core::run_sweep(&spec)?;

    let content = match config.format() {
        Format::Csv => report::sweep_csv(&rows, config.precision()),
        Format::Json => {
            let results = json!({
                "metadata": {
                    "protocol": spec.protocol.name(),
                    "mu_search": {
                        "lo": spec.mu_search.lo,
                        "hi": spec.mu_search.hi,
                        "grid_points": spec.mu_search.grid_points,
                        "rel_tolerance": spec.mu_search.rel_tolerance,
                    },
                },
                "rows": rows.iter().map(report::sweep_row_json).collect::<Vec<_>>(),
            });
            let doc = report_json("sweep", config.echo("sweep"), results);
            format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())
        }
    };
    write_output(config, &content)
}

struct Comparison {
    observable: &'static str,
    empirical: f64,
    analytic: f64,
    se: f64,
}

impl Comparison {
    fn z(&self) -> f64 {
        (self.empirical - self.analytic) / self.se
    }
}

fn cmd_montecarlo(config: &RunConfig, with_attack: bool) -> Result<(), CliError> {
    let mu = config.require("mu")?;
    let length_km = config.require("length_km")?;
    let pulses = config.require_pulses()?;
    let src = config.source_params(mu)?;
    let ch = config.channel(length_km)?;
    let stats = src.stats(&core::TailPolicy::default())?;

    let mut sim_config = core::SimConfig::new(pulses, config.seed(), src, ch);
    let attack = if with_attack {
        let vector = core::pns_attack_vector(&stats, &ch, config.block_fraction())?;
        sim_config.attack = Some(vector.clone());
        Some(vector)
    } else {
        None
    };

    // the analytic reference is the declared scenario: honest channel, or
    // the attack vector itself
    let analytic = match &attack {
        Some(vector) => core::attack_observables(&stats, vector)?,
        None => core::observables(&stats, &ch)?,
    };

    let result = core::simulate(&sim_config)?;
    let emp = result.empirical()?;

    let comparisons = [
        Comparison {
            observable: "Q_t",
            empirical: emp.summary.gain_triggered,
            analytic: analytic.gain_triggered,
            se: emp.se_gain_triggered,
        },
        Comparison {
            observable: "E_t",
            empirical: emp.summary.qber_triggered,
            analytic: analytic.qber_triggered,
            se: emp.se_qber_triggered,
        },
        Comparison {
            observable: "Q_nt",
            empirical: emp.summary.gain_nontriggered,
            analytic: analytic.gain_nontriggered,
            se: emp.se_gain_nontriggered,
        },
        Comparison {
            observable: "E_nt",
            empirical: emp.summary.qber_nontriggered,
            analytic: analytic.qber_nontriggered,
            se: emp.se_qber_nontriggered,
        },
    ];
    let max_abs_z = comparisons
        .iter()
        .map(|c| c.z().abs())
        .fold(0.0f64, f64::max);
    let threshold = config.z_threshold();
    let pass = max_abs_z <= threshold;

    let command = if with_attack { "attack" } else { "montecarlo" };
    let content = match config.format() {
        Format::Json => {
            let mut results = json!({
                "rng": { "algorithm": result.rng_algorithm, "seed": result.seed },
                "pulses": result.pulses,
                "comparison": comparisons.iter().map(|c| json!({
                    "observable": c.observable,
                    "empirical": num(c.empirical),
                    "analytic": num(c.analytic),
                    "se": num(c.se),
                    "z": num(c.z()),
                })).collect::<Vec<_>>(),
                "max_abs_z": num(max_abs_z),
                "z_threshold": num(threshold),
                "pass": pass,
            });
            if let Some(vector) = &attack {
                let [r0, r1, r2] = src.odds_triple();
                results["attack"] = json!({
                    "label": vector.label(),
                    "block_fraction": num(config.block_fraction()),
                    "r_observed": num(emp.summary.trigger_ratio),
                    "r_reference": { "r_0": num(r0), "r_1": num(r1), "r_2": num(r2) },
                });
            }
            let doc = report_json(command, config.echo(command), results);
            format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())
        }
        Format::Csv => {
            let sig = config.precision();
            let mut pairs = vec![
                ("pulses".to_string(), result.pulses.to_string()),
                ("seed".to_string(), result.seed.to_string()),
                ("rng_algorithm".to_string(), result.rng_algorithm.to_string()),
                ("z_threshold".to_string(), sci(threshold, sig)),
                ("max_abs_z".to_string(), sci(max_abs_z, sig)),
                ("pass".to_string(), pass.to_string()),
            ];
            if let Some(vector) = &attack {
                let [r0, r1, r2] = src.odds_triple();
                pairs.push(("attack".to_string(), vector.label().to_string()));
                pairs.push((
                    "block_fraction".to_string(),
                    sci(config.block_fraction(), sig),
                ));
                pairs.push(("r_observed".to_string(), sci(emp.summary.trigger_ratio, sig)));
                pairs.push(("r_0".to_string(), sci(r0, sig)));
                pairs.push(("r_1".to_string(), sci(r1, sig)));
                pairs.push(("r_2".to_string(), sci(r2, sig)));
            }
            let mut out = kv_csv(&pairs);
            out.push('\n');
            out.push_str("observable,empirical,analytic,se,z\n");
            for c in &comparisons {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    c.observable,
                    sci(c.empirical, sig),
                    sci(c.analytic, sig),
                    sci(c.se, sig),
                    sci(c.z(), sig)
                ));
            }
            out
        }
    };
    write_output(config, &content)?;

    if pass {
        Ok(())
    } else {
        Err(CliError::Statistical(format!(
            "max |z| = {max_abs_z:.2} exceeds threshold {threshold}"
        )))
    }
}

fn cmd_cutoff(config: &RunConfig) -> Result<(), CliError> {
    let lo = config.require("cutoff_lo_km")?;
    let hi = config.require("cutoff_hi_km")?;
    let mut spec = {
        // reuse the sweep spec builder with an empty distance list
        let mut with_distances = config.clone();
        with_distances.distances_km = Some(vec![]);
        with_distances.sweep_spec()?
    };
    spec.distances_km = vec![];
    let cutoff_km = core::find_cutoff(&spec, lo, hi)?;

    let content = match config.format() {
        Format::Json => {
            let results = json!({
                "protocol": spec.protocol.name(),
                "bracket_km": [num(lo), num(hi)],
                "cutoff_km": num(cutoff_km),
            });
            let doc = report_json("cutoff", config.echo("cutoff"), results);
            format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())
        }
        Format::Csv => {
            let sig = config.precision();
            kv_csv(&[
                ("protocol".to_string(), spec.protocol.name().to_string()),
                ("cutoff_lo_km".to_string(), sci(lo, sig)),
                ("cutoff_hi_km".to_string(), sci(hi, sig)),
                ("cutoff_km".to_string(), sci(cutoff_km, sig)),
            ])
        }
    };
    write_output(config, &content)
}
