//! Object memory: stored feature maps as RBF centers, translated response
//! grids, and the recognition threshold.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::waves::CumulativeFeatureMap;

/// How map distance is measured: squared difference of the numeric feature
/// ids, or (optionally) a plain mismatch count per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapMetric {
    SquaredId,
    Indicator,
}

impl MapMetric {
    pub fn from_flag(indicator: bool) -> Self {
        if indicator {
            MapMetric::Indicator
        } else {
            MapMetric::SquaredId
        }
    }

    /// Self-distance of a map against all-zero input; the scale that makes
    /// blank input respond at exp(-1) regardless of the object.
    fn self_distance(self, map: &Grid<u32>) -> f64 {
        match self {
            MapMetric::SquaredId => map.iter().map(|&e| (e as f64) * (e as f64)).sum(),
            MapMetric::Indicator => map.iter().filter(|&&e| e != 0).count() as f64,
        }
    }

    fn cell(self, input: u32, stored: u32) -> f64 {
        match self {
            MapMetric::SquaredId => {
                let d = input as f64 - stored as f64;
                d * d
            }
            MapMetric::Indicator => f64::from(input != stored),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredObject {
    pub id: u32,
    pub map: Grid<u32>,
    pub dist_it: f64,
    pub beta_it: f64,
}

impl StoredObject {
    pub fn rescale(&mut self, metric: MapMetric) {
        self.dist_it = metric.self_distance(&self.map);
        self.beta_it = 1.0 / self.dist_it;
    }
}

#[derive(Debug, Clone)]
pub struct ObjectRepository {
    pub objects: Vec<StoredObject>,
    pub alpha: f64,
    pub metric: MapMetric,
}

impl ObjectRepository {
    pub fn new(alpha: f64, metric: MapMetric) -> Self {
        ObjectRepository {
            objects: Vec::new(),
            alpha,
            metric,
        }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&StoredObject> {
        self.objects.get(id as usize - 1)
    }

    /// Appends a feature map as a new object; identical maps may be stored
    /// twice and receive distinct ids.
    pub fn store(&mut self, map: Grid<u32>) -> Result<u32> {
        if map.iter().all(|&e| e == 0) {
            return Err(Error::ZeroMap);
        }
        let id = self.objects.len() as u32 + 1;
        let dist_it = self.metric.self_distance(&map);
        let beta_it = 1.0 / dist_it;
        self.objects.push(StoredObject {
            id,
            map,
            dist_it,
            beta_it,
        });
        Ok(id)
    }
}

/// RBF response of one object to input shifted by (dx, dy): the sum runs over
/// the object's coordinates, reading the input as 0 outside its bounds.
pub fn it_response(
    obj: &StoredObject,
    input: &CumulativeFeatureMap,
    dx: i64,
    dy: i64,
    metric: MapMetric,
) -> Result<f64> {
    if input.dims() != obj.map.dims() {
        return Err(Error::Dimension(format!(
            "input {:?} vs object map {:?}",
            input.dims(),
            obj.map.dims()
        )));
    }
    let (h, w) = obj.map.dims();
    let mut d = 0.0;
    for i in 0..h {
        for j in 0..w {
            let x = input
                .get_signed(i as i64 + dy, j as i64 + dx)
                .copied()
                .unwrap_or(0);
            d += metric.cell(x, obj.map[(i, j)]);
        }
    }
    Ok((-obj.beta_it * d).exp())
}

/// Responses over all offsets in [-r, r]^2; rows index dy, columns dx.
#[derive(Debug, Clone)]
pub struct ResponseGrid {
    pub object_id: u32,
    pub radius: i64,
    pub values: Grid<f64>,
    pub max_response: f64,
    pub arg_dy: i64,
    pub arg_dx: i64,
}

impl ResponseGrid {
    pub fn value_at(&self, dy: i64, dx: i64) -> f64 {
        self.values[((dy + self.radius) as usize, (dx + self.radius) as usize)]
    }
}

pub fn response_grid(
    obj: &StoredObject,
    input: &CumulativeFeatureMap,
    radius: i64,
    metric: MapMetric,
) -> Result<ResponseGrid> {
    if radius < 0 {
        return Err(Error::OutOfRange(format!("radius {radius} negative")));
    }
    let side = (2 * radius + 1) as usize;
    let mut values = Grid::filled(side, side, 0.0f64);
    let mut max_response = f64::NEG_INFINITY;
    let (mut arg_dy, mut arg_dx) = (0, 0);
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let v = it_response(obj, input, dx, dy, metric)?;
            values[((dy + radius) as usize, (dx + radius) as usize)] = v;
            if v > max_response {
                max_response = v;
                arg_dy = dy;
                arg_dx = dx;
            }
        }
    }
    Ok(ResponseGrid {
        object_id: obj.id,
        radius,
        values,
        max_response,
        arg_dy,
        arg_dx,
    })
}

/// Recognition gate: a pooled response at or above alpha counts as a match.
pub fn recognize(max_response: f64, alpha: f64) -> bool {
    max_response >= alpha
}

/// Object repository as text: `id height width` then row-major entries.
pub fn dump_objects(repo: &ObjectRepository) -> String {
    let mut out = String::new();
    for o in &repo.objects {
        let (h, w) = o.map.dims();
        out.push_str(&format!("{} {} {}\n", o.id, h, w));
        for row in 0..h {
            let line: Vec<String> = (0..w).map(|c| o.map[(row, c)].to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out
}
