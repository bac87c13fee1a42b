use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use trajloc::baselines::{DenseLocalizer, KalmanTracker, KernelMethod, RadarKnn, SrlKnn};
use trajloc::config::ExperimentConfig;
use trajloc::eval::{error_report, write_comparison_csv, write_points_csv, ErrorReport, ReportSummary};
use trajloc::{FingerprintDatabase, Location, TestTrack, TrackLocalizer};

use super::{create_dir, load_database, load_models, load_track, prepare, slug};
use crate::error::{CliResult, FileContext};
use crate::manifest::{Manifest, RunRecord};

#[derive(Debug, Serialize)]
pub struct EvalOutcome {
    /// Pooled summary per method, sequence model first.
    pub methods: Vec<ReportSummary>,
    /// Sequence-model summary of each fold.
    pub folds: Vec<ReportSummary>,
}

fn run_baseline(name: &str, db: &FingerprintDatabase, track: &TestTrack, cfg: &ExperimentConfig) -> CliResult<(String, Vec<Location>)> {
    let b = &cfg.baselines;
    let loc: Box<dyn TrackLocalizer> = match name {
        "radar" => Box::new(RadarKnn { db, k: b.knn.k }),
        "srlknn" => Box::new(SrlKnn { db, config: b.knn.clone() }),
        "kernel" => Box::new(KernelMethod { db, config: b.kernel.clone() }),
        "kalman" => Box::new(KalmanTracker {
            db,
            k: b.knn.k,
            config: b.kalman.clone(),
        }),
        "mlp" => Box::new(DenseLocalizer::train(db, &b.mlp, "MLP")?),
        "mlnn" => Box::new(DenseLocalizer::train(db, &b.mlnn, "MLNN")?),
        other => {
            return Err(trajloc::Error::Config(format!("unknown baseline '{other}'")).into());
        }
    };
    Ok((loc.name(), loc.localize_track(track)?))
}

/// Evaluates every trained fold plus the configured baselines on the test
/// track and writes per-point, CDF, comparison and summary files.
pub fn cmd_eval(config: &ExperimentConfig, data: &Path, models: &Path, out: &Path) -> CliResult<(Manifest, EvalOutcome)> {
    let cfg = prepare(config)?;
    let (db_path, db) = load_database(data)?;
    let (track_path, track) = load_track(data)?;
    let loaded = load_models(models)?;
    let mut rec = RunRecord::new("eval");
    rec.input(data, &db_path)?;
    rec.input(data, &track_path)?;
    for (p, m) in &loaded {
        rec.input(models, p)?;
        m.check_database(&db)?;
    }
    create_dir(&out.join("points"))?;
    create_dir(&out.join("cdf"))?;
    let truth = track.locations();

    let predictions: Vec<Vec<Location>> = loaded
        .par_iter()
        .map(|(_, m)| m.predict_track(&track))
        .collect::<trajloc::Result<_>>()?;
    let label = loaded[0].1.name();
    let mut fold_summaries = Vec::new();
    let mut pooled = Vec::new();
    for (k, est) in predictions.iter().enumerate() {
        let r = error_report(&truth, est)?;
        write_points_csv(out.join("points").join(format!("{}_fold{k}.csv", slug(&label))), &truth, est)?;
        fold_summaries.push(r.summary(&format!("{label} fold {k}")));
        pooled.extend(r.errors);
    }
    let mut reports = vec![(label, ErrorReport::from_errors(pooled))];

    let baseline_runs: Vec<(String, Vec<Location>)> = cfg
        .eval
        .baselines
        .par_iter()
        .map(|name| run_baseline(name, &db, &track, &cfg))
        .collect::<CliResult<_>>()?;
    for (name, est) in baseline_runs {
        write_points_csv(out.join("points").join(format!("{}.csv", slug(&name))), &truth, &est)?;
        reports.push((name, error_report(&truth, &est)?));
    }

    let mut plot = String::from(
        "# gnuplot script: gnuplot plot.gp\n\
         set datafile separator ','\n\
         set terminal pngcairo size 900,600\n\
         set output 'cdf.png'\n\
         set xlabel 'Localization error (m)'\n\
         set ylabel 'CDF'\n\
         set key bottom right\n\
         set grid\n\
         plot ",
    );
    let mut summaries = Vec::new();
    for (i, (name, r)) in reports.iter().enumerate() {
        let file = format!("cdf/{}.csv", slug(name));
        r.write_cdf_csv(out.join(&file))?;
        summaries.push(r.summary(name));
        if i > 0 {
            plot.push_str(", \\\n     ");
        }
        let _ = write!(plot, "'{file}' using 1:2 skip 1 with lines lw 2 title '{name}'");
    }
    plot.push('\n');
    let plot_path = out.join("plot.gp");
    fs::write(&plot_path, plot).at(&plot_path)?;
    write_comparison_csv(out.join("comparison.csv"), &summaries)?;

    let outcome = EvalOutcome {
        methods: summaries,
        folds: fold_summaries,
    };
    let summary_path = out.join("summary.json");
    let mut json = serde_json::to_string_pretty(&outcome).map_err(trajloc::Error::from)?;
    json.push('\n');
    fs::write(&summary_path, json).at(&summary_path)?;
    let manifest = rec.finish(out, &cfg)?;
    Ok((manifest, outcome))
}
