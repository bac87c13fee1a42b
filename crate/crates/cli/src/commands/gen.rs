use std::path::Path;

use trajloc::config::{DatasetKind, ExperimentConfig};
use trajloc::dataset::{generate_synthetic, load_ujiindoorloc, split_holdout, write_database, write_track};
use trajloc::trajgen::{build_transition_table, walk_track};

use super::{create_dir, prepare, require, DATABASE_FILE, TRACK_FILE};
use crate::error::CliResult;
use crate::manifest::{Manifest, RunRecord};

/// Writes the fingerprint database and test track into `out`.
///
/// For UJIIndoorLoc one scan per RP is held out, and the test track is a
/// random walk over those held-out scans.
pub fn cmd_gen(config: &ExperimentConfig, out: &Path) -> CliResult<Manifest> {
    let cfg = prepare(config)?;
    create_dir(out)?;
    let mut rec = RunRecord::new("gen");
    let (db, track) = match cfg.dataset.kind {
        DatasetKind::Synthetic => generate_synthetic(&cfg.dataset.synthetic, cfg.dataset.scans_per_rp)?,
        DatasetKind::Uji => {
            let src = require(cfg.dataset.uji.path.clone().into(), "a UJIIndoorLoc download")?;
            rec.input(Path::new(""), &src)?;
            let load = load_ujiindoorloc(&src, &cfg.dataset.uji.filter)?;
            log::info!("UJIIndoorLoc: {} rows into {} RPs", load.rows_used, load.db.len());
            rec.extra("origin", [load.origin.x, load.origin.y]);
            rec.extra("wap_columns", &load.wap_columns);
            rec.extra("rows_used", load.rows_used);
            let (db, held) = split_holdout(&load.db, cfg.seed)?;
            let table = build_transition_table(&held, &cfg.motion)?;
            let track = walk_track(&held, &table, cfg.dataset.uji.track_points, cfg.seed)?;
            (db, track)
        }
    };
    write_database(&db, out.join(DATABASE_FILE))?;
    write_track(&track, out.join(TRACK_FILE))?;
    rec.extra("reference_points", db.len());
    rec.extra("features", db.feature_count());
    rec.extra("track_points", track.len());
    rec.finish(out, &cfg)
}
