//! `rownav sweep`: replicate one config across a seed range and aggregate.

use anyhow::Result;
use rownav_core::config::TrialConfig;
use rownav_core::evaluation::{summarize, Region, TrialSummary};
use rownav_core::simulator::{run_trial, TrialLog};
use std::path::Path;
use std::process::ExitCode;

pub fn run(
    config_path: &Path,
    seeds: u32,
    seed_start: u64,
    out: &Path,
    strict: bool,
) -> Result<ExitCode> {
    let config = TrialConfig::load(config_path)?;
    std::fs::create_dir_all(out)?;
    std::fs::copy(config_path, out.join("config.toml"))?;

    let seed_list: Vec<u64> = (0..seeds.max(1) as u64).map(|k| seed_start + k).collect();
    let mut results: Vec<(u64, TrialLog, TrialSummary)> = Vec::with_capacity(seed_list.len());

    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for &s in &seed_list {
            let config = &config;
            handles.push(scope.spawn(move || -> Result<(u64, TrialLog, TrialSummary)> {
                let setup = config.setup(s, strict)?;
                let log = run_trial(&setup);
                let summary = summarize(&log.rtk, &setup.plan, log.interventions, 10);
                Ok((s, log, summary))
            }));
        }
        for h in handles {
            results.push(h.join().expect("sweep thread")?);
        }
        Ok(())
    })?;
    results.sort_by_key(|(s, _, _)| *s);

    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    w.write_record([
        "seed",
        "completed",
        "rows_completed",
        "interventions",
        "rt_pos_mean",
        "rt_pos_max",
        "rt_head_mean",
    ])?;
    let mut zero_intervention = 0u32;
    for (s, log, summary) in &results {
        if log.completed && log.interventions == 0 {
            zero_intervention += 1;
        }
        let pos = summary.positional_for(Region::RowTracking);
        let head = summary.heading_for(Region::RowTracking);
        w.write_record([
            s.to_string(),
            log.completed.to_string(),
            log.rows_completed.to_string(),
            log.interventions.to_string(),
            pos.map(|p| format!("{:.6}", p.mean_abs)).unwrap_or_default(),
            pos.map(|p| format!("{:.6}", p.signed_max)).unwrap_or_default(),
            head.map(|h| format!("{:.6}", h.mean_abs)).unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    println!(
        "{}/{} runs completed without intervention",
        zero_intervention,
        results.len()
    );
    Ok(ExitCode::SUCCESS)
}
