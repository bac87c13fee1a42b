use std::fs;
use std::path::Path;

use trajloc::baselines::{RadarKnn, SrlKnn};
use trajloc::config::{DatasetKind, ExperimentConfig};
use trajloc::eval::{
    count_ambiguous_points, count_ambiguous_trajectories, history_noise_sweep, neighbour_threshold, speed_sweep,
    time_slot_correlation,
};
use trajloc::trajgen::build_transition_table;
use trajloc::TrackLocalizer;

use super::{create_dir, load_database, load_models, load_track, prepare};
use crate::error::{CliResult, FileContext};
use crate::manifest::{Manifest, RunRecord};

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    fs::write(path, s).at(path)
}

/// Ambiguous points per RP and the Monte-Carlo ambiguous-trajectory count
/// for each configured trajectory length.
pub fn cmd_ambiguity(config: &ExperimentConfig, data: &Path, out: &Path) -> CliResult<Manifest> {
    let cfg = prepare(config)?;
    let (db_path, db) = load_database(data)?;
    create_dir(out)?;
    let mut rec = RunRecord::new("ambiguity");
    rec.input(data, &db_path)?;
    let amb = &cfg.eval.ambiguity;
    let threshold = if amb.auto_threshold { neighbour_threshold(&db)? } else { amb.threshold };
    rec.extra("threshold", threshold);

    let counts = count_ambiguous_points(&db, amb)?;
    let rows: Vec<Vec<String>> = counts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let l = db.location(i);
            vec![i.to_string(), l.x.to_string(), l.y.to_string(), c.to_string()]
        })
        .collect();
    write_csv(&out.join("ambiguous_points.csv"), &["rp", "x", "y", "ambiguous"], &rows)?;
    rec.extra(
        "mean_ambiguous_points",
        counts.iter().sum::<usize>() as f64 / counts.len() as f64,
    );

    let table = build_transition_table(&db, &cfg.motion)?;
    let rows = cfg
        .eval
        .ambiguity_lengths
        .iter()
        .map(|&t| {
            let n = count_ambiguous_trajectories(&db, &table, t, cfg.eval.ambiguity_samples, amb, cfg.seed)?;
            Ok(vec![t.to_string(), n.to_string()])
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_csv(&out.join("ambiguity.csv"), &["T", "ambiguous_trajectories"], &rows)?;
    rec.finish(out, &cfg)
}

/// Speed sweep, history-noise sweep and time-slot correlation for the
/// first trained fold. The speed and time-slot analyses simulate fresh
/// scans and therefore need a synthetic dataset.
pub fn cmd_sweep(config: &ExperimentConfig, data: &Path, models: &Path, out: &Path) -> CliResult<Manifest> {
    let cfg = prepare(config)?;
    let (db_path, db) = load_database(data)?;
    let (track_path, track) = load_track(data)?;
    let (model_path, model) = load_models(models)?.swap_remove(0);
    model.check_database(&db)?;
    create_dir(out)?;
    let mut rec = RunRecord::new("sweep");
    rec.input(data, &db_path)?;
    rec.input(data, &track_path)?;
    rec.input(models, &model_path)?;

    if cfg.dataset.kind == DatasetKind::Synthetic {
        let env = &cfg.dataset.synthetic;
        let srl = SrlKnn {
            db: &db,
            config: cfg.baselines.knn.clone(),
        };
        let radar = RadarKnn {
            db: &db,
            k: cfg.baselines.knn.k,
        };
        let locs: [&(dyn TrackLocalizer + Sync); 3] = [&model, &srl, &radar];
        let sweep = speed_sweep(
            env,
            &locs,
            &cfg.eval.speeds,
            cfg.eval.speed_points,
            cfg.eval.speed_repeats,
            cfg.seed,
        )?;
        let mut header = vec!["v_max".to_string()];
        header.extend(locs.iter().map(|l| l.name()));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = sweep
            .iter()
            .map(|r| {
                let mut row = vec![r.v_max.to_string()];
                row.extend(r.mean_errors.iter().map(|e| e.to_string()));
                row
            })
            .collect();
        write_csv(&out.join("speed.csv"), &header, &rows)?;

        let corr = time_slot_correlation(env, &db, cfg.eval.time_slots, cfg.seed)?;
        let rows: Vec<Vec<String>> = corr
            .iter()
            .enumerate()
            .map(|(s, c)| vec![s.to_string(), c.to_string()])
            .collect();
        write_csv(&out.join("timeslots.csv"), &["slot", "correlation"], &rows)?;
    } else {
        log::warn!("speed sweep and time-slot correlation need a synthetic dataset; skipped");
    }

    if model.wiring().has_location_channel() {
        let reports = history_noise_sweep(&model, &track, &cfg.eval.history_gammas, cfg.seed)?;
        let mut rows = Vec::new();
        for (g, r) in &reports {
            r.write_cdf_csv(out.join(format!("history_gamma{g}_cdf.csv")))?;
            rows.push(vec![
                g.to_string(),
                r.mean.to_string(),
                r.percentile(50.0).to_string(),
                r.percentile(80.0).to_string(),
            ]);
        }
        write_csv(&out.join("history.csv"), &["gamma_m", "mean_m", "p50_m", "p80_m"], &rows)?;
    } else {
        log::warn!("{} has no location channel; history-noise sweep skipped", model.wiring());
    }
    rec.finish(out, &cfg)
}
