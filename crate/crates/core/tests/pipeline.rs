//! End-to-end pipeline behavior that sits above single modules: trace
//! consistency, degenerate stimuli, file intake, and export layout.

use sha2::{Digest, Sha256};

use ventral::config::{ExperimentConfig, StimulusSpec};
use ventral::error::Error;
use ventral::experiment::{export, run_experiment, StimulusOutcome};
use ventral::grid::Grid;
use ventral::pgm::{self, Graymap};
use ventral::synthetic::{ShapeKind, ShapeSpec};
use ventral::waves::WaveSchedule;

fn synthetic(kind: ShapeKind) -> StimulusSpec {
    StimulusSpec::Synthetic(ShapeSpec::new(kind))
}

fn config_with(stimuli: Vec<StimulusSpec>) -> ExperimentConfig {
    ExperimentConfig {
        stimuli,
        ..ExperimentConfig::default()
    }
}

#[test]
fn feedback_off_traces_equal_raw_banding() {
    let mut config = config_with(vec![synthetic(ShapeKind::Cup), synthetic(ShapeKind::Cup)]);
    config.feedback = false;
    let report = run_experiment(&config).unwrap();
    let second = &report.traces[1];
    assert!(!second.steps.is_empty(), "second presentation must refine");

    // Without promotion, each step's cumulative count must equal what the
    // plain banding schedule would deliver on its own.
    let mut schedule = WaveSchedule::band(&second.rmap, config.epsilon).unwrap();
    for row in &second.waves {
        let (_, _) = schedule.advance(&second.fmap).unwrap();
        assert_eq!(row.cumulative_fired, schedule.fired().len());
        assert_eq!(row.wave_size, schedule.last_delivered());
    }
    assert!(schedule.is_done());
}

#[test]
fn repeated_identical_stimulus_is_not_reidentified_after_pruning() {
    // Disposal rewrites both the dictionary and the stored map between the
    // presentations, so the second pass regrows features under new ids and
    // the stored hypothesis no longer matches tile for tile.
    let config = config_with(vec![synthetic(ShapeKind::Cup), synthetic(ShapeKind::Cup)]);
    let report = run_experiment(&config).unwrap();
    assert_eq!(report.traces[0].outcome, StimulusOutcome::StoredNew(1));
    assert!(matches!(
        report.traces[1].outcome,
        StimulusOutcome::StoredNew(_) | StimulusOutcome::Recognized(_)
    ));
    assert_eq!(report.survival.rows.len(), 2);
}

#[test]
fn blank_first_stimulus_is_left_unstored() {
    let dir = tempfile::tempdir().unwrap();
    let black = dir.path().join("black.pgm");
    pgm::write(
        &black,
        &Graymap {
            pixels: Grid::filled(100, 100, 0u16),
            maxval: 255,
        },
    )
    .unwrap();
    let config = config_with(vec![
        StimulusSpec::File(black),
        synthetic(ShapeKind::Bar),
    ]);
    let report = run_experiment(&config).unwrap();
    assert_eq!(report.traces[0].outcome, StimulusOutcome::NovelUnstored);
    assert_eq!(report.traces[0].nonblank_tiles, 0);
    assert_eq!(report.survival.rows[0].before, 0);
    assert_eq!(report.survival.rows[0].rate, 1.0);
    // The next real stimulus still bootstraps object 1.
    assert_eq!(report.traces[1].outcome, StimulusOutcome::StoredNew(1));
}

#[test]
fn wrong_size_file_requires_the_resize_flag() {
    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("small.pgm");
    let mut pixels = Grid::filled(50, 60, 0u16);
    for row in 20..30 {
        for col in 5..55 {
            pixels[(row, col)] = 255;
        }
    }
    pgm::write(&small, &Graymap { pixels, maxval: 255 }).unwrap();

    let strict = config_with(vec![StimulusSpec::File(small.clone())]);
    let err = run_experiment(&strict).unwrap_err();
    assert!(matches!(
        err,
        Error::Stage {
            stage: "stimulus",
            index: 1,
            ..
        }
    ));
    assert_eq!(err.exit_code(), 3);

    let mut lenient = config_with(vec![StimulusSpec::File(small)]);
    lenient.resize = true;
    let report = run_experiment(&lenient).unwrap();
    assert_eq!(report.traces[0].retina.dims(), (100, 100));
    assert_eq!(report.traces[0].outcome, StimulusOutcome::StoredNew(1));
}

#[test]
fn missing_stimulus_file_fails_at_the_stimulus_stage() {
    let config = config_with(vec![StimulusSpec::File("/nonexistent/x.pgm".into())]);
    let err = run_experiment(&config).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn trace_row_counts_are_consistent() {
    let config = config_with(
        ventral::synthetic::default_catalog()
            .into_iter()
            .map(StimulusSpec::Synthetic)
            .collect(),
    );
    let report = run_experiment(&config).unwrap();
    assert_eq!(report.traces.len(), 10);
    assert_eq!(report.survival.rows.len(), 10);
    for t in &report.traces {
        if t.index == 1 {
            assert!(t.steps.is_empty());
        } else {
            assert_eq!(t.waves.len(), t.steps.len());
        }
        for pair in t.waves.windows(2) {
            assert!(pair[1].cumulative_fired >= pair[0].cumulative_fired);
        }
        let fired_total = t.waves.last().map_or(0, |w| w.cumulative_fired);
        assert!(fired_total <= t.nonblank_tiles);
    }
}

#[test]
fn export_writes_manifest_covering_every_file() {
    let config = config_with(vec![synthetic(ShapeKind::Bar), synthetic(ShapeKind::Cup)]);
    let report = run_experiment(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let entries = export(&report, dir.path()).unwrap();

    let mut on_disk: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    on_disk.sort();
    let mut listed: Vec<String> = entries.iter().map(|(n, _)| n.clone()).collect();
    listed.push("manifest.txt".into());
    listed.sort();
    assert_eq!(on_disk, listed);

    // Spot-check one digest against the file bytes.
    let features = std::fs::read(dir.path().join("features.txt")).unwrap();
    let digest = Sha256::digest(&features);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    let recorded = entries
        .iter()
        .find(|(n, _)| n == "features.txt")
        .map(|(_, h)| h.clone())
        .unwrap();
    assert_eq!(hex, recorded);

    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert_eq!(manifest.lines().count(), entries.len());
}

#[test]
fn wave_dumps_partition_the_fired_tiles() {
    let config = config_with(vec![synthetic(ShapeKind::Bar), synthetic(ShapeKind::Cup)]);
    let report = run_experiment(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export(&report, dir.path()).unwrap();

    for t in &report.traces {
        let path = dir.path().join(format!("waves_{:03}.txt", t.index));
        if t.waves.is_empty() {
            assert!(!path.exists());
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let blocks: Vec<&str> = text.split("\n\n").filter(|b| !b.is_empty()).collect();
        assert_eq!(blocks.len(), t.waves.len());

        let (h, w) = t.fmap.entries.dims();
        let mut union = std::collections::BTreeSet::new();
        for (block, row) in blocks.iter().zip(&t.waves) {
            let mut lines = block.lines();
            assert_eq!(lines.next().unwrap(), format!("step {}", row.step));
            let grid: Vec<&str> = lines.collect();
            assert_eq!(grid.len(), h);
            let mut ones = 0;
            for (r, line) in grid.iter().enumerate() {
                let cells: Vec<&str> = line.split(' ').collect();
                assert_eq!(cells.len(), w);
                for (c, cell) in cells.iter().enumerate() {
                    match *cell {
                        "1" => {
                            ones += 1;
                            // Every tile fires in exactly one wave.
                            assert!(union.insert((r, c)));
                        }
                        "0" => {}
                        other => panic!("unexpected cell {other:?}"),
                    }
                }
            }
            assert_eq!(ones, row.wave_size);
            assert_eq!(union.len(), row.cumulative_fired);
        }
    }
}

#[test]
fn config_file_round_trips_through_disk() {
    let mut config = config_with(vec![synthetic(ShapeKind::Hand)]);
    config.alpha = 0.5;
    config.seed = 7;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, config.serialize()).unwrap();
    let parsed = ExperimentConfig::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(parsed, config);
}

#[test]
fn identical_specs_render_identical_stimuli_anywhere_in_the_sequence() {
    let config = config_with(vec![
        synthetic(ShapeKind::Composite),
        synthetic(ShapeKind::Bar),
        synthetic(ShapeKind::Composite),
    ]);
    let report = run_experiment(&config).unwrap();
    assert_eq!(
        report.traces[0].retina.levels(),
        report.traces[2].retina.levels()
    );
    assert_ne!(
        report.traces[0].retina.levels(),
        report.traces[1].retina.levels()
    );
}
