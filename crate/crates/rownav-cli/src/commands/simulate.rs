//! `rownav simulate`: seeded trial replications from one config.

use anyhow::{Context, Result};
use rownav_core::config::TrialConfig;
use rownav_core::geometry::{CameraId, CameraSpec};
use rownav_core::simulator::{run_trial, write_annotation_log, write_trial_log, TrialLog};
use std::path::Path;
use std::process::ExitCode;

pub fn run(
    config_path: &Path,
    seed: u64,
    out: &Path,
    replications: u32,
    strict: bool,
    record_annotation_log: bool,
) -> Result<ExitCode> {
    let config = TrialConfig::load(config_path)
        .with_context(|| format!("loading {}", config_path.display()))?;
    std::fs::create_dir_all(out)?;
    // Echo the config verbatim for reproducibility.
    std::fs::copy(config_path, out.join("config.toml"))?;

    let seeds: Vec<u64> = (0..replications.max(1) as u64).map(|k| seed + k).collect();
    let mut logs: Vec<(u64, TrialLog, f64)> = Vec::with_capacity(seeds.len());

    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for &s in &seeds {
            let config = &config;
            handles.push((s, scope.spawn(move || -> Result<(TrialLog, f64)> {
                let setup = config.setup(s, strict)?;
                let t0 = std::time::Instant::now();
                let log = run_trial(&setup);
                Ok((log, t0.elapsed().as_secs_f64()))
            })));
        }
        for (s, h) in handles {
            let (log, wall) = h.join().expect("trial thread")?;
            logs.push((s, log, wall));
        }
        Ok(())
    })?;
    logs.sort_by_key(|(s, _, _)| *s);

    let mut any_fault_abort = false;
    for (s, log, wall) in &logs {
        let rep_dir = out.join(format!("rep-{s:04}"));
        let setup = config.setup(*s, strict)?;
        write_trial_log(&rep_dir, log, &setup.plan)?;
        if record_annotation_log {
            write_annotation_log(
                &rep_dir.join("annolog"),
                log,
                &CameraSpec::default_for(CameraId::Front),
                None,
            )?;
        }
        println!(
            "seed {s}: {} rows, {} interventions, completed={} ({:.2}s wall)",
            log.rows_completed, log.interventions, log.completed, wall
        );
        if !log.completed {
            any_fault_abort = true;
        }
    }

    if strict && any_fault_abort {
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}
