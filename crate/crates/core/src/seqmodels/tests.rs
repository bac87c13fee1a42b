use proptest::prelude::*;

use super::*;
use crate::dataset::{generate_synthetic, AccessPoint, TrackSpec};
use crate::dataset::{Fingerprint, ReferencePoint, SyntheticEnvironment, TestTrack, TrackPoint};
use crate::nncore::RecurrentLayer;
use crate::rng::stream;
use crate::trajgen::{generate_trajectories, build_transition_table, MotionModel};

pub(crate) fn small_env() -> SyntheticEnvironment {
    let ap = |x, y, dual_band| AccessPoint { x, y, dual_band };
    SyntheticEnvironment {
        width: 6.0,
        height: 5.0,
        aps: vec![ap(0.5, 0.5, true), ap(5.5, 4.0, false), ap(3.0, 2.5, false)],
        track: TrackSpec {
            waypoints: vec![Location::new(0.5, 0.5), Location::new(5.5, 0.5), Location::new(5.5, 4.5)],
            points: 20,
            ..TrackSpec::default()
        },
        ..SyntheticEnvironment::default()
    }
}

fn tiny_config(wiring: Wiring, cell: CellKind, bidirectional: bool) -> ModelConfig {
    ModelConfig {
        wiring,
        cell,
        bidirectional,
        memory_length: 3,
        layers: 2,
        hidden: 4,
        dropout: 0.0,
        trajectories: 40,
        epochs: 2,
        batch_size: 8,
        ..ModelConfig::default()
    }
}

#[test]
fn wiring_names_round_trip() {
    for w in Wiring::ALL {
        assert_eq!(w.name().parse::<Wiring>().unwrap(), w);
        let j = serde_json::to_string(&w).unwrap();
        assert_eq!(serde_json::from_str::<Wiring>(&j).unwrap(), w);
    }
    assert!("siso".parse::<Wiring>().is_err());
    assert_eq!(parse_cell("GRU").unwrap(), CellKind::Gru);
}

#[test]
fn model_defaults() {
    let c = ModelConfig::default();
    assert_eq!((c.wiring, c.cell, c.memory_length), (Wiring::PMimo, CellKind::Lstm, 10));
    assert_eq!((c.layers, c.hidden, c.dropout), (2, 100, 0.2));
    assert_eq!(c.optimizer.learning_rate, 0.001);
    assert_eq!(c.split(), (9000, 1000));
}

#[test]
fn sliding_window_examples() {
    let p = Location::new(1.5, -2.0);
    assert_eq!(sliding_window_average(&[p, p, p]).unwrap(), p);
    let m = sliding_window_average(&[Location::new(1.0, 1.0), Location::new(3.0, 3.0)]).unwrap();
    assert_eq!(m, Location::new(2.0, 2.0));
    assert!(sliding_window_average(&[]).is_err());
}

proptest! {
    #[test]
    fn sliding_average_inside_bounding_box(pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..12)) {
        let locs: Vec<Location> = pts.iter().map(|&(x, y)| Location::new(x, y)).collect();
        let a = sliding_window_average(&locs).unwrap();
        let (lx, hx) = locs.iter().fold((f64::MAX, f64::MIN), |(l, h), p| (l.min(p.x), h.max(p.x)));
        let (ly, hy) = locs.iter().fold((f64::MAX, f64::MIN), |(l, h), p| (l.min(p.y), h.max(p.y)));
        prop_assert!(a.x >= lx - 1e-12 && a.x <= hx + 1e-12);
        prop_assert!(a.y >= ly - 1e-12 && a.y <= hy + 1e-12);
    }
}

fn samples(model: &SequenceModel, db: &FingerprintDatabase, n: usize) -> Vec<TrainingSample> {
    let table = build_transition_table(db, &MotionModel::default()).unwrap();
    generate_trajectories(db, &table, model.config.memory_length, n, 77, crate::rng::Stream::Sweep)
        .unwrap()
        .iter()
        .map(|t| model.sample(db, t))
        .collect()
}

#[test]
fn gradients_match_finite_differences_for_every_wiring() {
    let (db, _) = generate_synthetic(&small_env(), 2).unwrap();
    for wiring in Wiring::ALL {
        for cell in [CellKind::Vanilla, CellKind::Lstm, CellKind::Gru] {
            for bi in [false, true] {
                let model = SequenceModel::init(&db, &tiny_config(wiring, cell, bi)).unwrap();
                for s in samples(&model, &db, 2) {
                    let err = model.gradient_check(&s, 1e-5).unwrap();
                    assert!(err < 1e-4, "{wiring} {cell:?} bi={bi}: {err}");
                }
            }
        }
    }
}

#[test]
fn batch_loss_is_mean_of_sample_losses() {
    let (db, _) = generate_synthetic(&small_env(), 2).unwrap();
    let model = SequenceModel::init(&db, &tiny_config(Wiring::AMimo, CellKind::Gru, false)).unwrap();
    let ss = samples(&model, &db, 5);
    let each: Vec<f64> = ss.iter().map(|s| model.sample_loss(s).unwrap()).collect();
    let mean = model.mean_loss(&ss).unwrap();
    assert!((mean - each.iter().sum::<f64>() / 5.0).abs() < 1e-12);
    // A duplicated sample doubles the summed gradient.
    let (_, g) = model.loss_and_grad(&ss[0], None).unwrap();
    let mut twice = g.clone();
    twice.add_scaled(&g, 1.0);
    let mut doubled = g.clone();
    doubled.scale(2.0);
    assert_eq!(twice, doubled);
}

fn walk_track(env: &SyntheticEnvironment, n: usize) -> TestTrack {
    let locs = env.track_locations();
    env.track_through(&locs[..n], 1, &mut stream(3, crate::rng::Stream::TestNoise))
}

#[test]
fn predictions_are_causal() {
    let env = small_env();
    let (db, _) = generate_synthetic(&env, 2).unwrap();
    let track = walk_track(&env, 12);
    for wiring in Wiring::ALL {
        for bi in [false, true] {
            let model = SequenceModel::init(&db, &tiny_config(wiring, CellKind::Lstm, bi)).unwrap();
            let full = model.predict_track(&track).unwrap();
            assert_eq!(full.len(), 12);
            for n in [1, 4, 7] {
                let part = model.predict_track(&track.truncated(n)).unwrap();
                assert_eq!(&full[..n], &part[..], "{wiring} bi={bi} n={n}");
            }
        }
    }
}

#[test]
fn incremental_matches_explicit_windows() {
    // The streaming path and the rerun-every-window path must agree for
    // causal stacks.
    let env = small_env();
    let (db, _) = generate_synthetic(&env, 2).unwrap();
    let track = walk_track(&env, 9);
    for wiring in Wiring::ALL {
        let model = SequenceModel::init(&db, &tiny_config(wiring, CellKind::Gru, false)).unwrap();
        let feats = model.track_features(&track).unwrap();
        let init = model.frame.to_unit(track.initial_location().unwrap());
        let a = model.predict_incremental(&feats, init, None).unwrap();
        let b = model.predict_windows(&feats, init, None).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!(p.distance(q) < 1e-9, "{wiring}: {p:?} vs {q:?}");
        }
    }
}

#[test]
fn empty_track_gives_empty_result() {
    let (db, _) = generate_synthetic(&small_env(), 1).unwrap();
    let model = SequenceModel::init(&db, &tiny_config(Wiring::PMimo, CellKind::Lstm, false)).unwrap();
    let empty = TestTrack::new(Vec::new(), true).unwrap();
    assert!(model.predict_track(&empty).unwrap().is_empty());
    let mut unknown = walk_track(&small_env(), 3);
    unknown.initial_known = false;
    assert!(model.predict_track(&unknown).is_err());
}

#[test]
fn location_channel_zeroed_matches_miso() {
    let (db, _) = generate_synthetic(&small_env(), 2).unwrap();
    let a = SequenceModel::init(&db, &tiny_config(Wiring::AMiso, CellKind::Lstm, false)).unwrap();
    let mut m = SequenceModel::init(&db, &tiny_config(Wiring::Miso, CellKind::Lstm, false)).unwrap();
    m.stack = a.stack.clone();
    let n = db.feature_count();
    let RecurrentLayer::Uni { cell } = &mut m.stack.layers[0] else { panic!() };
    let rows = cell.w.rows();
    let data: Vec<f64> = (0..rows).flat_map(|r| a_row(&a, r)[..n].to_vec()).collect();
    cell.w = Matrix::from_vec(rows, n, data).unwrap();
    let s = &samples(&a, &db, 1)[0];
    let zeroed = TrainingSample {
        prev: vec![[0.0, 0.0]; s.len()],
        ..s.clone()
    };
    let ta = a.run_sample(&a.stack, &zeroed, None).unwrap();
    let tm = m.run_sample(&m.stack, s, None).unwrap();
    assert_eq!(ta.outputs, tm.outputs);
}

fn a_row(model: &SequenceModel, r: usize) -> Vec<f64> {
    let RecurrentLayer::Uni { cell } = &model.stack.layers[0] else { panic!() };
    cell.w.row(r).to_vec()
}

use crate::nncore::Matrix;

#[test]
fn single_rp_database_learns_constant() {
    let fp = Fingerprint::new(vec![Some(-60.0), Some(-70.0)]).unwrap();
    let at = Location::new(3.0, 4.0);
    let db = FingerprintDatabase::new(
        vec![ReferencePoint {
            location: at,
            scans: vec![fp.clone(), fp.clone()],
        }],
        2,
        1.0,
    )
    .unwrap();
    let mut cfg = tiny_config(Wiring::PMimo, CellKind::Lstm, false);
    cfg.trajectories = 16;
    cfg.epochs = 300;
    cfg.optimizer.learning_rate = 0.01;
    let model = train(&db, &cfg, &MotionModel::default(), |_| {}).unwrap();
    let track = TestTrack::new(
        (0..5).map(|_| TrackPoint { location: at, scans: vec![fp.clone()] }).collect(),
        true,
    )
    .unwrap();
    for p in model.predict_track(&track).unwrap() {
        assert!(p.distance(&at) < 0.05, "{p:?}");
    }
}

#[test]
fn training_is_deterministic_and_resumable() {
    let (db, _) = generate_synthetic(&small_env(), 2).unwrap();
    let mut cfg = tiny_config(Wiring::PMimo, CellKind::Gru, false);
    cfg.dropout = 0.2;
    cfg.epochs = 4;
    let motion = MotionModel::default();
    let a = train(&db, &cfg, &motion, |_| {}).unwrap();
    let b = train(&db, &cfg, &motion, |_| {}).unwrap();
    assert_eq!(a, b);

    let mut c = SequenceModel::init(&db, &cfg).unwrap();
    let data = c.training_data(&db, &motion).unwrap();
    c.train_epochs(&data, 2, |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    c.save(&path).unwrap();
    let mut resumed = SequenceModel::load(&path).unwrap();
    assert_eq!(resumed, c);
    resumed.train_epochs(&data, 2, |_| {}).unwrap();
    assert_eq!(resumed, a);
    assert_eq!(resumed.optimizer.step, a.optimizer.step);
    assert_eq!(a.curve.len(), 4);
    assert!(a.curve.iter().all(|r| r.val_err.is_some()));
}

#[test]
fn zero_epochs_keeps_initial_weights() {
    let (db, _) = generate_synthetic(&small_env(), 1).unwrap();
    let mut cfg = tiny_config(Wiring::Mimo, CellKind::Vanilla, false);
    cfg.epochs = 0;
    let trained = train(&db, &cfg, &MotionModel::default(), |_| {}).unwrap();
    let fresh = SequenceModel::init(&db, &cfg).unwrap();
    assert_eq!(trained, fresh);
}

#[test]
fn learning_curve_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("curve.csv");
    let curve = vec![
        EpochRecord { epoch: 1, train_err: 2.5, val_err: Some(2.0) },
        EpochRecord { epoch: 2, train_err: 1.5, val_err: None },
    ];
    write_learning_curve(&p, &curve).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text, "epoch,train_err,val_err\n1,2.5,2\n2,1.5,\n");
}
