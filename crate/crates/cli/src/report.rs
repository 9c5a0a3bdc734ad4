//! Output files: CSV tables, `summary.txt` for people and `summary.kv` for scripts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use memlink_core::estimators::format_sig;

use crate::config::CampaignConfig;
use crate::scenarios::ScenarioReport;

pub const SUMMARY_KV: &str = "summary.kv";
pub const SUMMARY_TXT: &str = "summary.txt";

fn header(scenario: &str, cfg: &CampaignConfig) -> Vec<(String, String)> {
    vec![
        ("scenario".into(), scenario.into()),
        ("seed".into(), cfg.seed.to_string()),
        ("config_hash".into(), cfg.hash()),
        ("trials".into(), cfg.trials.to_string()),
        ("bell_trials".into(), cfg.bell_trials.to_string()),
    ]
}

fn kv_text(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Machine-readable summary. Values use the shortest exact decimal form.
pub fn summary_kv(r: &ScenarioReport, cfg: &CampaignConfig) -> String {
    let mut pairs = header(r.scenario.name(), cfg);
    pairs.push(("status".into(), if r.passed() { "pass" } else { "fail" }.into()));
    for (k, v) in &r.values {
        pairs.push((format!("value.{k}"), v.to_string()));
    }
    for v in &r.verdicts {
        pairs.push((format!("verdict.{}", v.name), if v.passed { "pass" } else { "fail" }.into()));
    }
    kv_text(&pairs)
}

pub fn summary_text(r: &ScenarioReport, cfg: &CampaignConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {}", r.scenario);
    let _ = writeln!(s, "config hash {}", cfg.hash());
    let _ = writeln!(s, "seed {}", cfg.seed);
    let _ = writeln!(
        s,
        "trials per setting {} (bell and checkpoints {})",
        cfg.trials, cfg.bell_trials
    );
    let _ = writeln!(s, "\nresults");
    for (k, v) in &r.values {
        if k.ends_with("_sigma") {
            continue;
        }
        match r.value(&format!("{k}_sigma")) {
            Some(sig) => {
                let _ = writeln!(s, "  {k:<36} {} ± {}", format_sig(*v, 6), format_sig(sig, 2));
            }
            None => {
                let _ = writeln!(s, "  {k:<36} {}", format_sig(*v, 6));
            }
        }
    }
    if !r.fits.is_empty() {
        let _ = writeln!(s, "\nfits");
        for (name, fit) in &r.fits {
            let _ = writeln!(s, "  {name}: {}", crate::scenarios::fit_summary(fit));
            if fit.one_over_e_time.is_finite() {
                let _ = writeln!(
                    s,
                    "    1/e time {} ± {} µs, residual norm {}",
                    format_sig(fit.one_over_e_time * 1e6, 6),
                    format_sig(fit.one_over_e_sigma * 1e6, 2),
                    format_sig(fit.residual_norm, 4)
                );
            }
        }
    }
    let _ = writeln!(s, "\nverdicts");
    for v in &r.verdicts {
        let _ = writeln!(s, "  {} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    let _ = writeln!(s, "\nstatus {}", if r.passed() { "pass" } else { "fail" });
    s
}

pub fn write_report(r: &ScenarioReport, cfg: &CampaignConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for t in &r.tables {
        let path = dir.join(&t.file);
        fs::write(&path, t.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    fs::write(dir.join(SUMMARY_KV), summary_kv(r, cfg))?;
    fs::write(dir.join(SUMMARY_TXT), summary_text(r, cfg))?;
    Ok(())
}

/// Summary for a scenario that stopped with an error; tables already written stay.
pub fn write_failure(scenario: &str, cfg: &CampaignConfig, dir: &Path, err: &anyhow::Error) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut pairs = header(scenario, cfg);
    pairs.push(("status".into(), "error".into()));
    pairs.push(("error".into(), format!("{err:#}").replace('\n', " ")));
    fs::write(dir.join(SUMMARY_KV), kv_text(&pairs))?;
    fs::write(
        dir.join(SUMMARY_TXT),
        format!(
            "scenario {scenario}\nconfig hash {}\nseed {}\n\nPARTIAL OUTPUT: {err:#}\n\nstatus error\n",
            cfg.hash(),
            cfg.seed
        ),
    )?;
    Ok(())
}

pub fn parse_kv(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Summaries in `dir` itself and in its immediate subdirectories, sorted by path.
pub fn find_summaries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if dir.join(SUMMARY_KV).is_file() {
        out.push(dir.join(SUMMARY_KV));
    }
    let entries = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    for e in entries {
        let p = e?.path().join(SUMMARY_KV);
        if p.is_file() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}
