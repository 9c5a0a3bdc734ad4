use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use memlink::calibrate::{calibrate, Targets};
use memlink::config::CampaignConfig;
use memlink::report::{find_summaries, parse_kv, write_failure, write_report, SUMMARY_TXT};
use memlink::scenarios::{run_scenario, Scenario};

#[derive(Parser)]
#[command(name = "memlink", version, about = "Simulate a two-node quantum-memory link")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario, or `all`, and write its tables and summary.
    Run {
        /// lifetime, correlation-sweep, checkpoints, bell, fidelity, budget, mains,
        /// direct-fiber-compare or all
        scenario: String,
        /// Campaign configuration; the calibrated defaults if absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Trials per setting and sweep point.
        #[arg(long)]
        trials: Option<u64>,
        /// Trials per setting for bell, fidelity, checkpoints and budget.
        #[arg(long)]
        bell_trials: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the spin-wave freezing flag.
        #[arg(long)]
        frozen: Option<bool>,
    },
    /// Fit the free noise parameters to figure-of-merit targets.
    Calibrate {
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Where to write the calibrated configuration; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the summaries found in a result directory.
    Report { dir: PathBuf },
}

enum Failure {
    Config(anyhow::Error),
    Other(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Other(e.into())
    }
}

fn load_config(path: Option<&Path>) -> Result<CampaignConfig, Failure> {
    match path {
        Some(p) => CampaignConfig::load(p).map_err(|e| Failure::Config(e.into())),
        None => Ok(CampaignConfig::shipped()),
    }
}

fn run(
    scenario: &str,
    config: Option<&Path>,
    seed: Option<u64>,
    trials: Option<u64>,
    bell_trials: Option<u64>,
    out: Option<PathBuf>,
    frozen: Option<bool>,
) -> Result<bool, Failure> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = trials {
        cfg.trials = n;
    }
    if let Some(n) = bell_trials {
        cfg.bell_trials = n;
    }
    if let Some(f) = frozen {
        cfg.link.geometry.frozen = f;
    }
    cfg.validate().map_err(|e| Failure::Config(e.into()))?;
    let scenarios: Vec<Scenario> = if scenario == "all" {
        Scenario::ALL.to_vec()
    } else {
        vec![Scenario::parse(scenario).ok_or_else(|| Failure::Config(anyhow::anyhow!("unknown scenario {scenario:?}")))?]
    };
    let root = out.unwrap_or_else(|| PathBuf::from(&cfg.out));
    let mut all_passed = true;
    for s in scenarios {
        let dir = if scenario == "all" {
            root.join(s.name())
        } else {
            root.clone()
        };
        match run_scenario(s, &cfg) {
            Ok(report) => {
                write_report(&report, &cfg, &dir)?;
                for v in &report.verdicts {
                    println!("{} {s} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
                }
                all_passed &= report.passed();
            }
            Err(e) => {
                write_failure(s.name(), &cfg, &dir, &e)?;
                eprintln!("error in {s}: {e:#}");
                all_passed = false;
            }
        }
    }
    Ok(all_passed)
}

fn calibrate_cmd(targets: &Path, config: Option<&Path>, out: Option<&Path>) -> Result<bool, Failure> {
    let cfg = load_config(config)?;
    let text = fs::read_to_string(targets)
        .with_context(|| format!("reading {}", targets.display()))
        .map_err(Failure::Config)?;
    let t = Targets::parse(&text).map_err(Failure::Config)?;
    let c = calibrate(&cfg, &t)?;
    eprintln!(
        "{} after {} iterations",
        if c.converged {
            "converged"
        } else {
            "NOT converged, best so far"
        },
        c.iterations
    );
    for (name, v) in &c.fitted {
        eprintln!("  {name:<26} {v:.6e}");
    }
    for r in &c.residuals {
        eprintln!(
            "  {:<14} {:>10.4} target {:>8} ± {:<6} pull {:+.2}",
            r.name,
            r.value,
            r.target,
            r.sigma,
            r.pull()
        );
    }
    let toml = c.config.to_toml();
    match out {
        Some(p) => fs::write(p, toml).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{toml}"),
    }
    Ok(c.converged && c.within_one_sigma())
}

fn report_cmd(dir: &Path) -> Result<bool, Failure> {
    let found = find_summaries(dir).map_err(Failure::Config)?;
    if found.is_empty() {
        return Err(Failure::Config(anyhow::anyhow!("no summaries under {}", dir.display())));
    }
    let mut ok = true;
    for kv in found {
        let text = fs::read_to_string(kv.with_file_name(SUMMARY_TXT)).unwrap_or_default();
        print!("{text}");
        println!();
        let status = parse_kv(&fs::read_to_string(&kv)?).get("status").cloned().unwrap_or_default();
        ok &= status == "pass";
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            config,
            seed,
            trials,
            bell_trials,
            out,
            frozen,
        } => run(&scenario, config.as_deref(), seed, trials, bell_trials, out, frozen),
        Command::Calibrate { targets, config, out } => calibrate_cmd(&targets, config.as_deref(), out.as_deref()),
        Command::Report { dir } => report_cmd(&dir),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
