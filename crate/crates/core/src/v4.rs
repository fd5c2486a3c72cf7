//! Growing feature dictionary over 3x3 orientation patches, plus the
//! per-tile best-match maps (feature id and RBF activation).

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const PATCH_SIDE: usize = 3;
pub const PATCH_LEN: usize = PATCH_SIDE * PATCH_SIDE;

pub type PatchVector = [u8; PATCH_LEN];

fn squared_distance(a: &PatchVector, b: &PatchVector) -> f64 {
    let mut acc = 0i64;
    for k in 0..PATCH_LEN {
        let d = a[k] as i64 - b[k] as i64;
        acc += d * d;
    }
    acc as f64
}

/// Squared norm of the patch codes; the distance scale of its RBF unit.
fn squared_norm(v: &PatchVector) -> f64 {
    v.iter().map(|&c| (c as i64 * c as i64) as f64).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub id: u32,
    pub vector: PatchVector,
    pub dist_v4: f64,
    pub beta_v4: f64,
    pub tau: u64,
}

impl Prototype {
    pub fn new(id: u32, vector: PatchVector, var_fraction: f64) -> Self {
        let dist_v4 = squared_norm(&vector);
        // "A fraction of the squared norm" is a division: with the default
        // fraction 0.1 the divisor is exactly 10, so dist_v4/10 survives
        // bit-exact readback. Multiplying by 0.1 instead drifts one ulp on
        // about a third of the integer norms.
        let var_sq = dist_v4 / (1.0 / var_fraction);
        let beta_v4 = 1.0 / (2.0 * var_sq);
        Prototype {
            id,
            vector,
            dist_v4,
            beta_v4,
            tau: 0,
        }
    }
}

/// Activation of one RBF unit centered on a stored prototype.
pub fn rbf_response(vector: &PatchVector, p: &Prototype) -> f64 {
    (-p.beta_v4 * squared_distance(vector, &p.vector)).exp()
}

#[derive(Debug, Clone)]
pub struct FeatureRepository {
    pub prototypes: Vec<Prototype>,
    pub novelty_fraction: f64,
    pub var_fraction: f64,
    /// When set, every response uses the first prototype's beta.
    pub global_beta: bool,
}

impl FeatureRepository {
    pub fn new(novelty_fraction: f64, var_fraction: f64, global_beta: bool) -> Self {
        FeatureRepository {
            prototypes: Vec::new(),
            novelty_fraction,
            var_fraction,
            global_beta,
        }
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&Prototype> {
        // Ids are dense 1..=len in storage order.
        self.prototypes.get(id as usize - 1)
    }

    /// Nearest stored prototype by Euclidean distance; ties toward lowest id.
    pub fn nearest(&self, vector: &PatchVector) -> Option<(&Prototype, f64)> {
        let mut best: Option<(&Prototype, f64)> = None;
        for p in &self.prototypes {
            let d2 = squared_distance(vector, &p.vector);
            match best {
                Some((_, b)) if d2 >= b => {}
                _ => best = Some((p, d2)),
            }
        }
        best.map(|(p, d2)| (p, d2.sqrt()))
    }

    /// Admission rule: a candidate joins the dictionary when its distance to
    /// the nearest stored prototype exceeds `novelty_fraction` of that
    /// prototype's distance scale. An empty repository always admits.
    pub fn admit(&mut self, vector: &PatchVector) -> Result<(u32, bool)> {
        if vector.iter().all(|&c| c == 0) {
            return Err(Error::ZeroVector);
        }
        match self.nearest(vector) {
            None => {
                let id = self.prototypes.len() as u32 + 1;
                self.prototypes.push(Prototype::new(id, *vector, self.var_fraction));
                Ok((id, true))
            }
            Some((nearest, distance)) => {
                if distance > self.novelty_fraction * nearest.dist_v4 {
                    let id = self.prototypes.len() as u32 + 1;
                    self.prototypes.push(Prototype::new(id, *vector, self.var_fraction));
                    Ok((id, true))
                } else {
                    Ok((nearest.id, false))
                }
            }
        }
    }

    fn effective_beta(&self, p: &Prototype) -> f64 {
        if self.global_beta {
            self.prototypes[0].beta_v4
        } else {
            p.beta_v4
        }
    }

    /// Best-responding prototype for a patch; ties toward lowest id.
    pub fn best_match(&self, vector: &PatchVector) -> Option<(u32, f64)> {
        let mut best: Option<(u32, f64)> = None;
        for p in &self.prototypes {
            let r = (-self.effective_beta(p) * squared_distance(vector, &p.vector)).exp();
            match best {
                Some((_, b)) if r <= b => {}
                _ => best = Some((p.id, r)),
            }
        }
        best
    }
}

pub type TileCoord = (usize, usize);

/// Per-tile best prototype id (0 = blank tile) plus the tiling stride, so
/// tile coordinates can be mapped back onto the code map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMap {
    pub entries: Grid<u32>,
    pub stride: usize,
}

/// RBF activation of each tile's best match, aligned with the feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    pub activations: Grid<f64>,
}

/// Cuts the code map into 3x3 patches at the given stride, row-major;
/// trailing rows and columns that do not fit a full patch are dropped.
pub fn tile(codes: &Grid<u8>, stride: usize) -> Result<Vec<(TileCoord, PatchVector)>> {
    let (h, w) = codes.dims();
    if h < PATCH_SIDE || w < PATCH_SIDE {
        return Err(Error::Dimension(format!(
            "code map {h}x{w} smaller than one {PATCH_SIDE}x{PATCH_SIDE} patch"
        )));
    }
    if stride == 0 {
        return Err(Error::Config("tile stride must be positive".into()));
    }
    let rows = (h - PATCH_SIDE) / stride + 1;
    let cols = (w - PATCH_SIDE) / stride + 1;
    let mut out = Vec::with_capacity(rows * cols);
    for tr in 0..rows {
        for tc in 0..cols {
            let (top, left) = (tr * stride, tc * stride);
            let mut v = [0u8; PATCH_LEN];
            for dr in 0..PATCH_SIDE {
                for dc in 0..PATCH_SIDE {
                    v[dr * PATCH_SIDE + dc] = codes[(top + dr, left + dc)];
                }
            }
            out.push(((tr, tc), v));
        }
    }
    Ok(out)
}

pub fn is_blank(v: &PatchVector) -> bool {
    v.iter().all(|&c| c == 0)
}

/// Builds the aligned feature and response maps for one code map.
///
/// With `grow` set, every nonblank tile is first offered to the dictionary in
/// row-major order; mapping then runs against the enlarged dictionary, and
/// each best match bumps its prototype's usage counter.
pub fn build_maps(
    codes: &Grid<u8>,
    repo: &mut FeatureRepository,
    stride: usize,
    grow: bool,
) -> Result<(FeatureMap, ResponseMap)> {
    let tiles = tile(codes, stride)?;
    if grow {
        for (_, v) in &tiles {
            if !is_blank(v) {
                repo.admit(v)?;
            }
        }
    } else if repo.is_empty() {
        return Err(Error::EmptyRepository);
    }
    let rows = tiles.iter().map(|((r, _), _)| r + 1).max().unwrap();
    let cols = tiles.iter().map(|((_, c), _)| c + 1).max().unwrap();
    let mut entries = Grid::filled(rows, cols, 0u32);
    let mut activations = Grid::filled(rows, cols, 0.0f64);
    for (coord, v) in &tiles {
        if is_blank(v) {
            continue;
        }
        if let Some((id, response)) = repo.best_match(v) {
            entries[*coord] = id;
            activations[*coord] = response;
            repo.prototypes[id as usize - 1].tau += 1;
        }
    }
    Ok((
        FeatureMap {
            entries,
            stride,
        },
        ResponseMap { activations },
    ))
}

/// Flat text table: one prototype per line as `id c1..c9 tau`.
pub fn dump_repository(repo: &FeatureRepository) -> String {
    let mut out = String::new();
    for p in &repo.prototypes {
        let codes: Vec<String> = p.vector.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("{} {} {}\n", p.id, codes.join(" "), p.tau));
    }
    out
}

pub fn parse_repository(
    text: &str,
    novelty_fraction: f64,
    var_fraction: f64,
    global_beta: bool,
) -> Result<FeatureRepository> {
    let mut repo = FeatureRepository::new(novelty_fraction, var_fraction, global_beta);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != PATCH_LEN + 2 {
            return Err(Error::Config(format!(
                "repository line {}: expected {} fields, got {}",
                lineno + 1,
                PATCH_LEN + 2,
                fields.len()
            )));
        }
        let id: u32 = fields[0]
            .parse()
            .map_err(|_| Error::Config(format!("repository line {}: bad id", lineno + 1)))?;
        if id as usize != repo.prototypes.len() + 1 {
            return Err(Error::Config(format!(
                "repository line {}: ids must be dense from 1",
                lineno + 1
            )));
        }
        let mut v = [0u8; PATCH_LEN];
        for (k, f) in fields[1..=PATCH_LEN].iter().enumerate() {
            let code: u8 = f.parse().map_err(|_| {
                Error::Config(format!("repository line {}: bad code", lineno + 1))
            })?;
            if code > 4 {
                return Err(Error::Config(format!(
                    "repository line {}: code {code} outside 0..=4",
                    lineno + 1
                )));
            }
            v[k] = code;
        }
        let tau: u64 = fields[PATCH_LEN + 1]
            .parse()
            .map_err(|_| Error::Config(format!("repository line {}: bad counter", lineno + 1)))?;
        let mut p = Prototype::new(id, v, var_fraction);
        p.tau = tau;
        repo.prototypes.push(p);
    }
    Ok(repo)
}
