//! End-to-end experiment driver: stimulus intake, the per-stimulus stage
//! sequence, and deterministic export of every trace the stages leave behind.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::coding::{run_refinement, CodingParams, Outcome, StepRecord};
use crate::config::{ExperimentConfig, StimulusSpec};
use crate::development::{dispose, substitute, DisposalEvent, SurvivalReport, UsageLedger};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::it::{MapMetric, ObjectRepository};
use crate::pgm;
use crate::retina::Retina;
use crate::synthetic;
use crate::v1::{blank_threshold, inhibit, respond_bank, GaborBank, KernelParams};
use crate::v4::{build_maps, FeatureMap, FeatureRepository, ResponseMap, TileCoord};
use crate::waves::WaveSchedule;

pub const TARGET_HEIGHT: usize = 100;
pub const TARGET_WIDTH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StimulusOutcome {
    /// Stored as a new object (bootstrap, or novel after refinement).
    StoredNew(u32),
    Recognized(u32),
    /// Judged novel but left unstored because its feature map was blank.
    NovelUnstored,
}

#[derive(Debug, Clone)]
pub struct WaveRow {
    pub step: usize,
    pub wave_size: usize,
    pub cumulative_fired: usize,
    /// Tiles that fired in this step's wave.
    pub delivered: BTreeSet<TileCoord>,
}

#[derive(Debug, Clone)]
pub struct StimulusTrace {
    pub index: usize,
    pub source: String,
    pub retina: Retina,
    pub iom: Grid<u8>,
    pub fmap: FeatureMap,
    pub rmap: ResponseMap,
    /// Ids admitted while growing on this stimulus (pre-disposal id space).
    pub admitted: Vec<u32>,
    pub nonblank_tiles: usize,
    pub outcome: StimulusOutcome,
    pub terminated_early: bool,
    pub steps: Vec<StepRecord>,
    pub waves: Vec<WaveRow>,
    /// Snapshot of the object map at storage time, before any disposal.
    pub stored_map: Option<Grid<u32>>,
    pub beta_it_at_storage: Option<f64>,
    pub disposal: Option<DisposalEvent>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub traces: Vec<StimulusTrace>,
    pub survival: SurvivalReport,
    pub features: FeatureRepository,
    pub objects: ObjectRepository,
}

fn stage<T>(result: Result<T>, name: &'static str, index: usize) -> Result<T> {
    result.map_err(|e| e.at_stage(name, index))
}

/// Seed for one synthetic stimulus: the config seed salted with the
/// stimulus descriptor text, so identical descriptors render identically
/// wherever they appear and a re-presented catalog is bit-for-bit the same.
fn stimulus_seed(seed: u64, spec: &StimulusSpec) -> u64 {
    let digest = Sha256::digest(spec.to_string().as_bytes());
    seed ^ u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn load_retina(config: &ExperimentConfig, spec: &StimulusSpec) -> Result<Retina> {
    let retina = match spec {
        StimulusSpec::Synthetic(shape) => {
            synthetic::generate(shape, stimulus_seed(config.seed, spec))
        }
        StimulusSpec::File(path) => {
            let map = pgm::read(path)?;
            let retina = Retina::from_graymap(&map);
            if retina.dims() == (TARGET_HEIGHT, TARGET_WIDTH) {
                retina
            } else if config.resize {
                retina.resize_nearest(TARGET_HEIGHT, TARGET_WIDTH)?
            } else {
                return Err(Error::Dimension(format!(
                    "{} is {}x{}, expected {TARGET_HEIGHT}x{TARGET_WIDTH} (resize is off)",
                    path.display(),
                    retina.dims().0,
                    retina.dims().1,
                )));
            }
        }
    };
    retina.check_min_size(config.kernel_size)?;
    Ok(retina)
}

/// Unfolds the wave schedule with no feedback, for stimuli that bypass
/// predictive coding; returns the per-step log.
fn unfold_waves(fmap: &FeatureMap, rmap: &ResponseMap, epsilon: f64) -> Result<Vec<WaveRow>> {
    let mut schedule = WaveSchedule::band(rmap, epsilon)?;
    let mut rows = Vec::new();
    while !schedule.is_done() {
        let before = schedule.fired().clone();
        schedule.advance(fmap)?;
        rows.push(WaveRow {
            step: schedule.current_step(),
            wave_size: schedule.last_delivered(),
            cumulative_fired: schedule.fired().len(),
            delivered: schedule.fired().difference(&before).cloned().collect(),
        });
    }
    Ok(rows)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    if config.stimuli.is_empty() {
        return Err(Error::Config("no stimuli configured".into()));
    }
    let bank = GaborBank::new(KernelParams {
        sigma: config.sigma,
        lambda: config.lambda,
        gamma: config.gamma,
        size: config.kernel_size,
        zero_mean: config.kernel_zero_mean,
        unit_norm: config.kernel_unit_norm,
    })?;
    let metric = MapMetric::from_flag(config.indicator_metric);
    let mut features = FeatureRepository::new(
        config.novelty_fraction,
        config.var_fraction,
        config.global_beta,
    );
    let mut objects = ObjectRepository::new(config.alpha, metric);
    let mut ledger = UsageLedger::default();
    let mut survival = SurvivalReport::default();
    let mut traces = Vec::with_capacity(config.stimuli.len());
    let params = CodingParams {
        epsilon: config.epsilon,
        alpha: config.alpha,
        radius: config.grid_radius,
        coherence_threshold: config.coherence_threshold,
        feedback: config.feedback,
    };

    for (k, spec) in config.stimuli.iter().enumerate() {
        let index = k + 1;
        let retina = stage(load_retina(config, spec), "stimulus", index)?;

        let (iom, fmap, rmap) = {
            let maps = stage(respond_bank(&retina, &bank), "v1", index)?;
            let threshold = blank_threshold(&maps, config.blank_fraction);
            let iom = stage(inhibit(&maps, threshold), "v1", index)?;
            let built = stage(
                build_maps(&iom, &mut features, config.tile_stride, true),
                "v4",
                index,
            )?;
            (iom, built.0, built.1)
        };
        let admitted: Vec<u32> = ledger_new_ids(&features, &ledger);
        for &id in &admitted {
            ledger.register(id, index);
        }
        let nonblank_tiles = fmap.entries.iter().filter(|&&e| e != 0).count();
        let blank_map = nonblank_tiles == 0;

        let mut stored_map = None;
        let mut beta_it_at_storage = None;
        let mut steps: Vec<StepRecord> = Vec::new();
        let mut terminated_early = false;
        let (outcome, waves) = if objects.is_empty() {
            let waves = stage(unfold_waves(&fmap, &rmap, config.epsilon), "waves", index)?;
            if blank_map {
                (StimulusOutcome::NovelUnstored, waves)
            } else {
                let id = stage(objects.store(fmap.entries.clone()), "it", index)?;
                stored_map = Some(fmap.entries.clone());
                beta_it_at_storage = Some(objects.get(id).unwrap().beta_it);
                (StimulusOutcome::StoredNew(id), waves)
            }
        } else {
            let result = stage(run_refinement(&objects, &fmap, &rmap, &params), "coding", index)?;
            let waves = result
                .steps
                .iter()
                .map(|s| WaveRow {
                    step: s.step,
                    wave_size: s.wave_size,
                    cumulative_fired: s.cumulative_fired,
                    delivered: s.delivered.clone(),
                })
                .collect();
            terminated_early = result.terminated_early;
            steps = result.steps;
            let outcome = match result.outcome {
                Outcome::Recognized(id) => StimulusOutcome::Recognized(id),
                Outcome::Novel if blank_map => StimulusOutcome::NovelUnstored,
                Outcome::Novel => {
                    let id = stage(objects.store(fmap.entries.clone()), "it", index)?;
                    stored_map = Some(fmap.entries.clone());
                    beta_it_at_storage = Some(objects.get(id).unwrap().beta_it);
                    StimulusOutcome::StoredNew(id)
                }
            };
            (outcome, waves)
        };

        let total_tau: u64 = features.prototypes.iter().map(|p| p.tau).sum();
        let disposal = if !features.is_empty() && total_tau > 0 {
            let event = stage(dispose(&mut features, &mut ledger, config.reset_counters), "development", index)?;
            stage(substitute(&mut objects, &event), "development", index)?;
            Some(event)
        } else {
            None
        };
        let (before, survived) = disposal
            .as_ref()
            .map(|e| (e.before, e.survived))
            .unwrap_or((features.len(), features.len()));
        let cohort = ledger.cohort_size(1);
        stage(
            survival.record(index, before, survived, cohort),
            "development",
            index,
        )?;

        traces.push(StimulusTrace {
            index,
            source: spec.to_string(),
            retina,
            iom,
            fmap,
            rmap,
            admitted,
            nonblank_tiles,
            outcome,
            terminated_early,
            steps,
            waves,
            stored_map,
            beta_it_at_storage,
            disposal,
        });
    }

    Ok(RunReport {
        config: config.clone(),
        traces,
        survival,
        features,
        objects,
    })
}

/// Ids present in the repository but not yet in the ledger: the admissions
/// made while growing on the current stimulus.
fn ledger_new_ids(features: &FeatureRepository, ledger: &UsageLedger) -> Vec<u32> {
    features
        .prototypes
        .iter()
        .map(|p| p.id)
        .filter(|id| !ledger.entries.contains_key(id))
        .collect()
}

fn grid_u32_csv(grid: &Grid<u32>) -> String {
    let (h, w) = grid.dims();
    let mut out = String::new();
    for row in 0..h {
        for col in 0..w {
            if col > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", grid[(row, col)]);
        }
        out.push('\n');
    }
    out
}

fn grid_f64_csv(grid: &Grid<f64>) -> String {
    let (h, w) = grid.dims();
    let mut out = String::new();
    for row in 0..h {
        for col in 0..w {
            if col > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", grid[(row, col)]);
        }
        out.push('\n');
    }
    out
}

/// One 0/1 grid per delivered wave, blocks separated by a blank line.
fn dump_waves(trace: &StimulusTrace) -> String {
    let (h, w) = trace.fmap.entries.dims();
    let mut out = String::new();
    for row in &trace.waves {
        let _ = writeln!(out, "step {}", row.step);
        for r in 0..h {
            for c in 0..w {
                if c > 0 {
                    out.push(' ');
                }
                out.push(if row.delivered.contains(&(r, c)) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

fn outcome_fields(outcome: &StimulusOutcome) -> (&'static str, u32) {
    match outcome {
        StimulusOutcome::StoredNew(id) => ("stored", *id),
        StimulusOutcome::Recognized(id) => ("recognized", *id),
        StimulusOutcome::NovelUnstored => ("novel", 0),
    }
}

/// Quotes a CSV field when it contains a separator.
fn csv_field(text: &str) -> String {
    if text.contains(',') || text.contains('"') {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

/// Writes every artifact of the run plus `manifest.txt` with a SHA-256 line
/// per file; returns the manifest entries (name, hex digest) in name order.
pub fn export(report: &RunReport, dir: &Path) -> Result<Vec<(String, String)>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).at_stage("export", 0))?;
    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();

    files.insert("config.txt".into(), report.config.serialize().into_bytes());

    let mut outcomes = String::from("stimulus,source,outcome,object,steps,terminated_early,max_response\n");
    for t in &report.traces {
        let (kind, object) = outcome_fields(&t.outcome);
        let max_response = t
            .steps
            .last()
            .map(|s| s.max_response.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            outcomes,
            "{},{},{},{},{},{},{}",
            t.index,
            csv_field(&t.source),
            kind,
            object,
            t.steps.len(),
            t.terminated_early,
            max_response
        );
    }
    files.insert("outcomes.csv".into(), outcomes.into_bytes());

    let mut survival = String::from("stimulus,before,survived,first_cohort,rate\n");
    for r in &report.survival.rows {
        let _ = writeln!(
            survival,
            "{},{},{},{},{}",
            r.stimulus, r.before, r.survived, r.first_cohort, r.rate
        );
    }
    files.insert("survival.csv".into(), survival.into_bytes());

    let mut waves = String::from("stimulus,step,wave_size,cumulative_fired\n");
    for t in &report.traces {
        for w in &t.waves {
            let _ = writeln!(waves, "{},{},{},{}", t.index, w.step, w.wave_size, w.cumulative_fired);
        }
    }
    files.insert("waves.csv".into(), waves.into_bytes());

    let mut refinement =
        String::from("stimulus,step,hypothesis,max_response,promotion,coherent,cumulative_fired\n");
    for t in &report.traces {
        for s in &t.steps {
            let _ = writeln!(
                refinement,
                "{},{},{},{},{},{},{}",
                t.index,
                s.step,
                s.hypothesis,
                s.max_response,
                s.promotion.len(),
                s.coherent,
                s.cumulative_fired
            );
        }
    }
    files.insert("refinement.csv".into(), refinement.into_bytes());

    files.insert(
        "features.txt".into(),
        crate::v4::dump_repository(&report.features).into_bytes(),
    );
    files.insert(
        "objects.txt".into(),
        crate::it::dump_objects(&report.objects).into_bytes(),
    );

    for t in &report.traces {
        let k = t.index;
        files.insert(
            format!("stimulus_{k:03}.pgm"),
            pgm::encode(&t.retina.to_graymap()),
        );
        files.insert(
            format!("iom_{k:03}.txt"),
            crate::v1::dump_codes(&t.iom).into_bytes(),
        );
        files.insert(format!("fmap_{k:03}.csv"), grid_u32_csv(&t.fmap.entries).into_bytes());
        files.insert(
            format!("rmap_{k:03}.csv"),
            grid_f64_csv(&t.rmap.activations).into_bytes(),
        );
        if !t.waves.is_empty() {
            files.insert(format!("waves_{k:03}.txt"), dump_waves(t).into_bytes());
        }
        if !t.steps.is_empty() {
            let mut grids = String::from("step,object,dy,dx,value\n");
            for s in &t.steps {
                for g in &s.grids {
                    for dy in -g.radius..=g.radius {
                        for dx in -g.radius..=g.radius {
                            let _ = writeln!(
                                grids,
                                "{},{},{},{},{}",
                                s.step,
                                g.object_id,
                                dy,
                                dx,
                                g.value_at(dy, dx)
                            );
                        }
                    }
                }
            }
            files.insert(format!("grids_{k:03}.csv"), grids.into_bytes());
        }
        if let Some(event) = &t.disposal {
            let mut remap = String::from("old,new,survived\n");
            for (old, entry) in &event.remap {
                let _ = writeln!(remap, "{},{},{}", old, entry.new_id, entry.survived);
            }
            files.insert(format!("remap_{k:03}.csv"), remap.into_bytes());
        }
    }

    let mut manifest_entries = Vec::with_capacity(files.len());
    let mut manifest = String::new();
    for (name, bytes) in &files {
        let digest = Sha256::digest(bytes);
        let hex: String = digest.iter().fold(String::new(), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        });
        let _ = writeln!(manifest, "{hex}  {name}");
        manifest_entries.push((name.clone(), hex));
    }
    files.insert("manifest.txt".into(), manifest.into_bytes());

    for (name, bytes) in &files {
        std::fs::write(dir.join(name), bytes).map_err(|e| Error::from(e).at_stage("export", 0))?;
    }
    Ok(manifest_entries)
}
