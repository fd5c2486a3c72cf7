//! Predictive coding: an initial hypothesis from the first wave, element-wise
//! matching against the hypothesis, top-down amplification of the matches,
//! and iterative refinement until recognition, novelty or exhaustion.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::it::{recognize, response_grid, ObjectRepository, ResponseGrid};
use crate::v4::{FeatureMap, ResponseMap, TileCoord};
use crate::waves::{CumulativeFeatureMap, WaveSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Recognized(u32),
    Novel,
}

#[derive(Debug, Clone, Copy)]
pub struct CodingParams {
    pub epsilon: f64,
    pub alpha: f64,
    pub radius: i64,
    pub coherence_threshold: f64,
    pub feedback: bool,
}

/// One refinement step: the wave that fired, the per-object pooled responses
/// on the cumulative map, and what the matching produced.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub wave_size: usize,
    pub cumulative_fired: usize,
    /// Tiles that fired in this step's wave.
    pub delivered: BTreeSet<TileCoord>,
    pub grids: Vec<ResponseGrid>,
    pub hypothesis: u32,
    pub max_response: f64,
    pub promotion: BTreeSet<TileCoord>,
    pub coherent: bool,
}

#[derive(Debug, Clone)]
pub struct RefinementResult {
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
    pub terminated_early: bool,
}

/// Pooled per-object responses on the given cumulative map; the winning
/// object (ties toward the lowest id) becomes the hypothesis.
pub fn evaluate_hypothesis(
    objects: &ObjectRepository,
    input: &CumulativeFeatureMap,
    radius: i64,
) -> Result<(Vec<ResponseGrid>, u32, f64)> {
    if objects.is_empty() {
        return Err(Error::EmptyRepository);
    }
    let mut grids = Vec::with_capacity(objects.len());
    let mut best_id = 0u32;
    let mut best = f64::NEG_INFINITY;
    for obj in &objects.objects {
        let grid = response_grid(obj, input, radius, objects.metric)?;
        if grid.max_response > best {
            best = grid.max_response;
            best_id = obj.id;
        }
        grids.push(grid);
    }
    Ok((grids, best_id, best))
}

/// Initial hypothesis from the first wave alone.
pub fn initial_hypothesis(
    objects: &ObjectRepository,
    first_wave: &CumulativeFeatureMap,
    radius: i64,
) -> Result<(u32, f64)> {
    let (_, id, max) = evaluate_hypothesis(objects, first_wave, radius)?;
    Ok((id, max))
}

/// Tiles where stimulus and hypothesis agree on a nonzero feature, minus the
/// tiles that have already fired.
pub fn match_identical(
    stimulus: &FeatureMap,
    hypothesis: &crate::grid::Grid<u32>,
    fired: &BTreeSet<TileCoord>,
) -> Result<BTreeSet<TileCoord>> {
    if stimulus.entries.dims() != hypothesis.dims() {
        return Err(Error::Dimension("stimulus and hypothesis maps disagree".into()));
    }
    let mut out = BTreeSet::new();
    for (coord, &e) in stimulus.entries.indexed_iter() {
        if e != 0 && hypothesis[coord] == e && !fired.contains(&coord) {
            out.insert(coord);
        }
    }
    Ok(out)
}

/// The promotion is coherent when it covers at least the threshold fraction
/// of all unfired nonzero tiles.
pub fn coherence(promotion_size: usize, unfired_nonzero: usize, threshold: f64) -> bool {
    unfired_nonzero > 0 && promotion_size as f64 / unfired_nonzero as f64 >= threshold
}

/// Runs the refinement loop over a banded schedule.
///
/// Per delivered wave: regenerate the hypothesis on the cumulative map, match
/// the stimulus against it, and (with feedback on) amplify the matching
/// unfired tiles into the next wave. Recognition ends the loop early only
/// after a coherent promotion, and still requires the pooled response to
/// clear alpha; otherwise the loop runs until every banded tile has fired.
pub fn run_refinement(
    objects: &ObjectRepository,
    fmap: &FeatureMap,
    rmap: &ResponseMap,
    params: &CodingParams,
) -> Result<RefinementResult> {
    if objects.is_empty() {
        return Err(Error::EmptyRepository);
    }
    let mut schedule = WaveSchedule::band(rmap, params.epsilon)?;
    let mut steps: Vec<StepRecord> = Vec::new();
    // A schedule can start exhausted only when the map is all blank; deliver
    // nothing and judge the empty cumulative map directly.
    let mut done = schedule.is_done();
    let mut cumulative = schedule.cumulative_map(fmap);
    let mut delivered: BTreeSet<TileCoord> = BTreeSet::new();
    if !done {
        let out = schedule.advance(fmap)?;
        cumulative = out.0;
        done = out.1;
        delivered = schedule.fired().clone();
    }
    let mut accelerated = false;
    loop {
        let step = schedule.current_step().max(1);
        let (grids, hypothesis, max_response) =
            evaluate_hypothesis(objects, &cumulative, params.radius)?;
        if params.feedback && accelerated && recognize(max_response, params.alpha) {
            steps.push(StepRecord {
                step,
                wave_size: schedule.last_delivered(),
                cumulative_fired: schedule.fired().len(),
                delivered,
                grids,
                hypothesis,
                max_response,
                promotion: BTreeSet::new(),
                coherent: false,
            });
            return Ok(RefinementResult {
                steps,
                outcome: Outcome::Recognized(hypothesis),
                terminated_early: true,
            });
        }
        let hyp_map = &objects.get(hypothesis).expect("dense ids").map;
        let promotion = match_identical(fmap, hyp_map, schedule.fired())?;
        let coherent = coherence(
            promotion.len(),
            schedule.unfired_nonzero(),
            params.coherence_threshold,
        );
        let early = params.feedback && coherent && recognize(max_response, params.alpha);
        if params.feedback && !early && !promotion.is_empty() {
            schedule.promote(&promotion)?;
        }
        accelerated = params.feedback && coherent;
        steps.push(StepRecord {
            step,
            wave_size: schedule.last_delivered(),
            cumulative_fired: schedule.fired().len(),
            delivered: std::mem::take(&mut delivered),
            grids,
            hypothesis,
            max_response,
            promotion,
            coherent,
        });
        if early {
            return Ok(RefinementResult {
                steps,
                outcome: Outcome::Recognized(hypothesis),
                terminated_early: true,
            });
        }
        if done {
            let outcome = if recognize(max_response, params.alpha) {
                Outcome::Recognized(hypothesis)
            } else {
                Outcome::Novel
            };
            return Ok(RefinementResult {
                steps,
                outcome,
                terminated_early: false,
            });
        }
        let before = schedule.fired().clone();
        let out = schedule.advance(fmap)?;
        cumulative = out.0;
        done = out.1;
        delivered = schedule.fired().difference(&before).cloned().collect();
    }
}
