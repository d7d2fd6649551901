//! `rownav annotate`: automatic ground-truth heatmap generation.

use anyhow::{Context, Result};
use rownav_core::annotation::{
    build_dataset, read_annotation_log, read_path_file, AnnotateConfig, SkipReason,
};
use std::path::Path;
use std::process::ExitCode;

pub fn run(
    log_dir: &Path,
    path_file: &Path,
    out: &Path,
    lookahead: Option<f64>,
    sigma: Option<f64>,
) -> Result<ExitCode> {
    let log = match read_annotation_log(log_dir) {
        Ok(log) => log,
        Err(err) => {
            eprintln!("cannot read log directory {}: {err}", log_dir.display());
            return Ok(ExitCode::from(2));
        }
    };
    let path = match read_path_file(path_file) {
        Ok(p) => p,
        Err(err) => {
            eprintln!("cannot read path file {}: {err}", path_file.display());
            return Ok(ExitCode::from(2));
        }
    };

    let mut cfg = AnnotateConfig::default();
    if let Some(l) = lookahead {
        cfg.lookahead = l;
    }
    if let Some(s) = sigma {
        cfg.sigma = s;
    }

    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    let heatmap_dir = out.join("heatmaps");
    std::fs::create_dir_all(&heatmap_dir)?;

    let manifest = build_dataset(&log.frames, &log.poses, &path, &log.camera, &cfg, |id, hm| {
        let name = format!("heatmap_{id:06}.png");
        hm.save_png(&heatmap_dir.join(&name))?;
        Ok(format!("heatmaps/{name}"))
    })?;

    manifest.write_jsonl(&out.join("manifest.jsonl"))?;
    std::fs::write(
        out.join("annotate_meta.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "schema_version": 1,
            "sigma": cfg.sigma,
            "lookahead": cfg.lookahead,
            "frames": log.frames.len(),
            "annotated": manifest.annotated(),
            "skipped_no_visible_path": manifest.skipped(SkipReason::NoVisiblePath),
            "skipped_clock_skew": manifest.skipped(SkipReason::ClockSkew),
        }))?,
    )?;

    let annotated = manifest.annotated();
    let skew = manifest.skipped(SkipReason::ClockSkew);
    let invisible = manifest.skipped(SkipReason::NoVisiblePath);
    println!(
        "annotated {annotated}/{} frames ({invisible} without visible path, {skew} clock-skewed)",
        manifest.records.len()
    );
    for r in manifest.records.iter().filter(|r| r.skip_reason.is_some()) {
        println!("  skip frame {} at t={:.3}: {:?}", r.frame_id, r.timestamp, r.skip_reason.unwrap());
    }

    if annotated == 0 {
        // Distinguish a fully skewed log (bad input clocks) from a log that
        // simply never saw the path.
        if skew == manifest.records.len() && skew > 0 {
            eprintln!("all frames fall outside the pose/path time span");
            return Ok(ExitCode::from(2));
        }
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}
