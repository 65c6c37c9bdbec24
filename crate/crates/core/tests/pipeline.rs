use std::path::{Path, PathBuf};

use scenario_mining::cli::config::Config;
use scenario_mining::cli::run;
use scenario_mining::cli::stages::{self, ChangePointRow, DetectionEntry, Variant};
use scenario_mining::dataset::load_dataset;
use scenario_mining::ingest::{generate_synthetic, save_trajectories, InitialState, Maneuver, SyntheticScript};
use scenario_mining::types::DEFAULT_DT;

fn smoke() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

fn cli(dir: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["scenmine".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    argv.extend(["--config".into(), smoke().display().to_string(), "--dir".into(), dir.display().to_string()]);
    run(argv)
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn pipeline_equals_the_composed_subcommands() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(cli(a.path(), &["pipeline"]), 0);
    for step in [
        vec!["synth"],
        vec!["detect"],
        vec!["extract"],
        vec!["augment"],
        vec!["train", "--variant", "no_dk"],
        vec!["train", "--variant", "dk"],
        vec!["cluster"],
        vec!["evaluate"],
        vec!["report"],
    ] {
        assert_eq!(cli(b.path(), &step), 0, "{step:?}");
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.iter().map(|f| &f.0).collect::<Vec<_>>(), fb.iter().map(|f| &f.0).collect::<Vec<_>>());
    for (x, y) in fa.iter().zip(&fb) {
        assert!(x.1 == y.1, "{} differs", x.0);
    }
}

#[test]
fn detect_scores_every_configured_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Config::from_toml(
        "seed = 3\n[synth]\nkind = \"maneuvers\"\ncount = 10\n[detect]\nmethods = [\"rule_based\", \"ema\"]\n",
        &[],
    )
    .unwrap();
    stages::synth(&cfg, dir.path()).unwrap();
    let s = stages::detect(&cfg, dir.path()).unwrap();
    let entries: Vec<DetectionEntry> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(stages::DETECTION)).unwrap()).unwrap();
    assert_eq!(entries.iter().map(|e| e.method.as_str()).collect::<Vec<_>>(), vec!["Rule-based", "EMA"]);
    assert!(entries[0].scores.precision > entries[1].scores.precision);
    assert!(s.get(stages::CHANGE_POINTS).is_some());
}

#[test]
fn lane_change_filter_on_longitudinal_corpus_is_empty_with_notice() {
    let dir = tempfile::tempdir().unwrap();
    let initial = InitialState { x: 0.0, y: 1.875, vx: 28.0, lane: 1 };
    let scripts: Vec<SyntheticScript> = (0..3)
        .map(|i| {
            SyntheticScript::cruise(i, 600, initial)
                .with(150, 150, Maneuver::Accelerate { accel: 0.8 })
                .with(400, 120, Maneuver::Decelerate { accel: 0.7 })
        })
        .collect();
    let (trajs, truths) = generate_synthetic(&scripts, DEFAULT_DT, 1).unwrap();
    save_trajectories(&dir.path().join(stages::TRAJECTORIES), &trajs).unwrap();
    let rows: Vec<ChangePointRow> = trajs
        .iter()
        .zip(&truths)
        .flat_map(|(t, cps)| {
            cps.iter().map(|c| ChangePointRow {
                recording_id: t.recording_id.clone(),
                vehicle_id: t.vehicle_id,
                frame: c.frame,
                before: c.before.to_string(),
                after: c.after.to_string(),
            })
        })
        .collect();
    stages::write_change_points(&dir.path().join(stages::TRUTH_CHANGE_POINTS), &rows).unwrap();
    let cfg = Config::from_toml(
        "[extract]\nanchors = \"truth\"\n[extraction]\nclass_filter = [[\"keep_lane\", \"lane_change\"]]\n",
        &[],
    )
    .unwrap();
    let s = stages::extract(&cfg, dir.path()).unwrap();
    assert_eq!(s.get("records"), Some("0"));
    assert!(s.notice.as_deref().unwrap().starts_with("no scenario extracted"));
    let (_, recs) = load_dataset(&dir.path().join(stages::SCENARIOS)).unwrap();
    assert!(recs.is_empty());
}

#[test]
fn missing_inputs_name_the_expected_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Config::default();
    let err = stages::train(&cfg, Variant::Dk, dir.path()).unwrap_err();
    assert_eq!(err.category(), "stage");
    assert!(err.to_string().contains(&dir.path().join(stages::TRAIN).display().to_string()));
    let err = stages::report(dir.path()).unwrap_err();
    assert!(err.to_string().contains("clustering_dk.json"));
}

#[test]
fn gradcheck_subcommand_checks_toy_and_trained_models() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(dir.path(), &["gradcheck"]), 0);
    assert!(dir.path().join(stages::GRADCHECK).exists());
    assert_eq!(cli(dir.path(), &["gradcheck", "--set", "gradcheck.tolerance=0.0"]), 1);
}

#[test]
fn summaries_carry_seeds_and_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Config::load(Some(&smoke()), &[]).unwrap();
    let s = stages::synth(&cfg, dir.path()).unwrap();
    assert_eq!(s.get("seed"), Some("8"));
    let hash = stages::file_hash(&dir.path().join(stages::TRAJECTORIES)).unwrap();
    assert_eq!(s.get(stages::TRAJECTORIES), Some(&hash[..16]));
    assert!(s.to_string().starts_with("synth: kind=scenes seed=8"));
}
