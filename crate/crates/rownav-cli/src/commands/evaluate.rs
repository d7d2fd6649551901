//! `rownav evaluate`: trajectory analysis of a trial log.

use anyhow::{Context, Result};
use rownav_core::evaluation::{deviation_samples, render_table, summarize, Region};
use rownav_core::simulator::{read_events_jsonl, read_plan_json, read_rtk_csv, GPS_RATE_HZ};
use std::path::Path;
use std::process::ExitCode;

pub fn run(
    log: &Path,
    plan_path: Option<&Path>,
    out: Option<&Path>,
    downsample_hz: f64,
) -> Result<ExitCode> {
    let (rtk_file, default_plan, events_file) = if log.is_dir() {
        (log.join("rtk.csv"), log.join("plan.json"), Some(log.join("events.jsonl")))
    } else {
        let parent = log.parent().map(|p| p.to_path_buf()).unwrap_or_default();
        (log.to_path_buf(), parent.join("plan.json"), None)
    };

    let fixes = match read_rtk_csv(&rtk_file) {
        Ok(f) if !f.is_empty() => f,
        Ok(_) => {
            eprintln!("fix log {} is empty", rtk_file.display());
            return Ok(ExitCode::from(2));
        }
        Err(err) => {
            eprintln!("cannot read fix log {}: {err}", rtk_file.display());
            return Ok(ExitCode::from(2));
        }
    };
    let plan_file = plan_path.map(Path::to_path_buf).unwrap_or(default_plan);
    let plan = match read_plan_json(&plan_file) {
        Ok(p) => p,
        Err(err) => {
            eprintln!("cannot read plan {}: {err}", plan_file.display());
            return Ok(ExitCode::from(2));
        }
    };

    let interventions = events_file
        .and_then(|p| read_events_jsonl(&p).ok())
        .map(|events| {
            events
                .iter()
                .filter(|e| matches!(e.kind, rownav_core::navigator::EventKind::Intervention))
                .count() as u32
        })
        .unwrap_or(0);

    if downsample_hz <= 0.0 || downsample_hz > GPS_RATE_HZ {
        eprintln!("downsample rate must be in (0, {GPS_RATE_HZ}] Hz");
        return Ok(ExitCode::from(2));
    }
    let stride = (GPS_RATE_HZ / downsample_hz).round().max(1.0) as usize;
    let summary = summarize(&fixes, &plan, interventions, stride);
    print!("{}", render_table("trial", &summary));

    if let Some(out) = out {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

        let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
        w.write_record(["metric", "region", "mean_abs", "std_abs", "signed_max", "count"])?;
        for (metric, stats) in
            [("positional_m", &summary.positional), ("heading_deg", &summary.heading)]
        {
            for region in Region::ALL {
                let s = match region {
                    Region::RowTracking => &stats[0],
                    Region::Exiting => &stats[1],
                    Region::Entering => &stats[2],
                };
                if let Some(s) = s {
                    w.write_record([
                        metric.to_string(),
                        region.label().to_string(),
                        format!("{:.6}", s.mean_abs),
                        format!("{:.6}", s.std_abs),
                        format!("{:.6}", s.signed_max),
                        s.count.to_string(),
                    ])?;
                }
            }
        }
        w.write_record(["interventions", "", &summary.interventions.to_string(), "", "", ""])?;
        w.flush()?;

        let mut w = csv::Writer::from_path(out.join("deviations.csv"))?;
        w.write_record(["time", "positional_m", "heading_deg", "region"])?;
        for s in deviation_samples(&fixes, &plan, stride) {
            w.write_record([
                format!("{:.6}", s.time),
                format!("{:.6}", s.positional),
                s.heading_deg.map(|h| format!("{h:.6}")).unwrap_or_default(),
                s.region.label().to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}
