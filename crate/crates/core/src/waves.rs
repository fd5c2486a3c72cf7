//! Temporal unfolding of a response map: activations are banded into waves,
//! strongest first, and delivered one wave per step.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::v4::{FeatureMap, ResponseMap, TileCoord};

/// Feature map restricted to tiles that have fired; 0 elsewhere.
pub type CumulativeFeatureMap = Grid<u32>;

#[derive(Debug, Clone)]
pub struct WaveSchedule {
    pub epsilon: f64,
    /// Band k (0-based index k-1) holds activations in [1-k*eps, 1-(k-1)*eps),
    /// except band 1 which is exactly the unit activations. Empty bands are
    /// kept so the step number always implies its threshold.
    bands: Vec<BTreeSet<TileCoord>>,
    /// Nonzero activations below the last band edge; they fire only if a
    /// later promotion lifts them into a band.
    dropped: BTreeSet<TileCoord>,
    fired: BTreeSet<TileCoord>,
    current_step: usize,
    /// Working copy of activations; promotions saturate entries to 1.
    activations: Grid<f64>,
    nonzero_total: usize,
    last_delivered: usize,
}

/// Band index (1-based) for a positive activation, or `None` when it falls
/// below the last band edge.
fn band_index(activation: f64, epsilon: f64, band_count: usize) -> Option<usize> {
    if activation == 1.0 {
        return Some(1);
    }
    (2..=band_count).find(|&k| activation >= 1.0 - (k as f64 - 1.0) * epsilon)
}

impl WaveSchedule {
    pub fn band(rmap: &ResponseMap, epsilon: f64) -> Result<WaveSchedule> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::OutOfRange(format!("epsilon {epsilon} outside (0,1)")));
        }
        let band_count = (1.0 / epsilon).ceil() as usize;
        let mut bands = vec![BTreeSet::new(); band_count];
        let mut dropped = BTreeSet::new();
        let mut nonzero_total = 0;
        for (coord, &a) in rmap.activations.indexed_iter() {
            if a == 0.0 {
                continue;
            }
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::OutOfRange(format!(
                    "activation {a} at {coord:?} outside (0,1]"
                )));
            }
            nonzero_total += 1;
            match band_index(a, epsilon, band_count) {
                Some(k) => {
                    bands[k - 1].insert(coord);
                }
                None => {
                    dropped.insert(coord);
                }
            }
        }
        Ok(WaveSchedule {
            epsilon,
            bands,
            dropped,
            fired: BTreeSet::new(),
            current_step: 0,
            activations: rmap.activations.clone(),
            nonzero_total,
            last_delivered: 0,
        })
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn bands(&self) -> &[BTreeSet<TileCoord>] {
        &self.bands
    }

    pub fn occupied_bands(&self) -> usize {
        self.bands.iter().filter(|b| !b.is_empty()).count()
    }

    pub fn fired(&self) -> &BTreeSet<TileCoord> {
        &self.fired
    }

    pub fn current_step(&self) -> usize {
        self.current_step
    }

    pub fn last_delivered(&self) -> usize {
        self.last_delivered
    }

    /// Tiles with positive activation at banding time, dropped ones included.
    pub fn nonzero_total(&self) -> usize {
        self.nonzero_total
    }

    pub fn unfired_nonzero(&self) -> usize {
        self.nonzero_total - self.fired.len()
    }

    /// True once every banded tile has fired.
    pub fn is_done(&self) -> bool {
        self.bands[self.current_step.min(self.bands.len())..]
            .iter()
            .all(|b| b.is_empty())
    }

    pub fn cumulative_map(&self, fmap: &FeatureMap) -> CumulativeFeatureMap {
        let mut out = Grid::filled(fmap.entries.height(), fmap.entries.width(), 0u32);
        for &(r, c) in &self.fired {
            out[(r, c)] = fmap.entries[(r, c)];
        }
        out
    }

    /// Delivers the next wave: merges its band into the fired set and rebuilds
    /// the cumulative map. Errors once the schedule is exhausted.
    pub fn advance(&mut self, fmap: &FeatureMap) -> Result<(CumulativeFeatureMap, bool)> {
        if self.is_done() {
            return Err(Error::ScheduleExhausted);
        }
        let wave = std::mem::take(&mut self.bands[self.current_step]);
        self.last_delivered = wave.len();
        self.fired.extend(wave.iter().copied());
        self.current_step += 1;
        Ok((self.cumulative_map(fmap), self.is_done()))
    }

    /// Top-down amplification: each promoted tile's activation saturates to 1
    /// and the tile joins the next wave to fire. Fired tiles cannot be
    /// promoted; tiles below the last band edge can.
    pub fn promote(&mut self, tiles: &BTreeSet<TileCoord>) -> Result<()> {
        for &t in tiles {
            if self.fired.contains(&t) {
                return Err(Error::PromoteFired(t.0, t.1));
            }
        }
        if self.current_step >= self.bands.len() {
            // All scheduled bands already fired; promoted stragglers get a
            // fresh band at the end.
            self.bands.push(BTreeSet::new());
        }
        let target = self.current_step;
        for &t in tiles {
            for band in &mut self.bands[target..] {
                band.remove(&t);
            }
            self.dropped.remove(&t);
            self.bands[target].insert(t);
            self.activations[t] = 1.0;
        }
        Ok(())
    }
}

/// Restriction of the feature map to unit activations, with the 0/1
/// indicator of the first wave.
pub fn first_wave_maps(
    fmap: &FeatureMap,
    rmap: &ResponseMap,
) -> Result<(CumulativeFeatureMap, Grid<u8>)> {
    if fmap.entries.dims() != rmap.activations.dims() {
        return Err(Error::Dimension("feature and response maps disagree".into()));
    }
    let entries = fmap
        .entries
        .indexed_iter()
        .map(|(coord, &id)| if rmap.activations[coord] == 1.0 { id } else { 0 })
        .collect();
    let indicator = rmap.activations.map(|&a| u8::from(a == 1.0));
    let (h, w) = fmap.entries.dims();
    Ok((Grid::from_vec(h, w, entries), indicator))
}
