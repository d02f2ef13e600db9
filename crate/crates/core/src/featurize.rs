//! Input preprocessing: raw normalization, per-dimension binning and joint
//! tile coding.
//!
//! Binned and tile-coded inputs are sparse binary vectors, represented by
//! their active indices. The network consumes them without densifying.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-dimension `(min, max)` ranges of an observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsSpec {
    ranges: Vec<(f64, f64)>,
}

impl BoundsSpec {
    pub fn new(ranges: Vec<(f64, f64)>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::Empty("bounds"));
        }
        if let Some((lo, hi)) = ranges.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidConfig(format!("bounds [{lo}, {hi}] are empty")));
        }
        Ok(BoundsSpec { ranges })
    }

    pub fn dims(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    fn check(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: obs.len(),
            });
        }
        Ok(())
    }

    /// Position of `x` in dimension `j` as a fraction of its range, clamped
    /// to `[0, 1]`.
    fn unit(&self, j: usize, x: f64) -> f64 {
        let (lo, hi) = self.ranges[j];
        ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

/// Network input produced by a [`Featurizer`].
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureVector {
    Dense(Vec<f64>),
    /// Binary vector of length `len` with ones at `active`.
    Sparse { active: Vec<usize>, len: usize },
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        match self {
            FeatureVector::Dense(v) => v.len(),
            FeatureVector::Sparse { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn active(&self) -> Option<&[usize]> {
        match self {
            FeatureVector::Sparse { active, .. } => Some(active),
            FeatureVector::Dense(_) => None,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            FeatureVector::Dense(v) => v.clone(),
            FeatureVector::Sparse { active, len } => {
                let mut out = vec![0.0; *len];
                for &i in active {
                    out[i] = 1.0;
                }
                out
            }
        }
    }
}

/// Affine map of each component onto `[-1, 1]`.
pub fn normalize(obs: &[f64], bounds: &BoundsSpec) -> Result<FeatureVector> {
    bounds.check(obs)?;
    Ok(FeatureVector::Dense(
        obs.iter()
            .enumerate()
            .map(|(j, &x)| 2.0 * bounds.unit(j, x) - 1.0)
            .collect(),
    ))
}

/// Concatenated one-hot bins, `bins` per dimension.
pub fn discretize(obs: &[f64], bounds: &BoundsSpec, bins: usize) -> Result<FeatureVector> {
    bounds.check(obs)?;
    if bins == 0 {
        return Err(Error::InvalidConfig("bins per dimension must be positive".into()));
    }
    let active = obs
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let b = ((bounds.unit(j, x) * bins as f64).floor() as usize).min(bins - 1);
            j * bins + b
        })
        .collect();
    Ok(FeatureVector::Sparse {
        active,
        len: obs.len() * bins,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileCoderConfig {
    pub num_tilings: usize,
    pub tiles_per_dim: usize,
    pub dims: usize,
    pub capacity: usize,
}

impl TileCoderConfig {
    pub const MOUNTAIN_CAR: TileCoderConfig = TileCoderConfig {
        num_tilings: 8,
        tiles_per_dim: 4,
        dims: 2,
        capacity: 128,
    };
    pub const ACROBOT: TileCoderConfig = TileCoderConfig {
        num_tilings: 8,
        tiles_per_dim: 4,
        dims: 4,
        capacity: 512,
    };

    pub fn validate(&self) -> Result<()> {
        if self.num_tilings == 0 || self.tiles_per_dim == 0 || self.dims == 0 {
            return Err(Error::InvalidConfig("tile grid must be non-empty".into()));
        }
        // only hashed coders need the power-of-two tiling count
        if self.capacity < self.tuple_count() && !self.num_tilings.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "hashed tile coders need a power-of-two tiling count, got {}",
                self.num_tilings
            )));
        }
        if self.capacity < self.num_tilings {
            return Err(Error::InvalidConfig(format!(
                "capacity {} below num_tilings {}",
                self.capacity, self.num_tilings
            )));
        }
        Ok(())
    }

    /// Distinct `(tiling, coords...)` tuples the coder can produce.
    pub fn tuple_count(&self) -> usize {
        self.num_tilings
            .saturating_mul(self.tiles_per_dim.saturating_pow(self.dims as u32))
    }
}

/// 64-bit FNV-1a over the little-endian bytes of each coordinate.
pub fn fnv1a64(coords: &[i64]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for c in coords {
        for b in c.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    }
    h
}

/// Maps coordinate tuples to feature indices: sequentially while there is
/// room, then by hash.
#[derive(Clone, Debug)]
pub struct IndexHashTable {
    capacity: usize,
    assigned: HashMap<Vec<i64>, usize>,
}

impl IndexHashTable {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "index table capacity must be positive");
        IndexHashTable {
            capacity,
            assigned: HashMap::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of tuples holding a sequential slot.
    pub fn allocated(&self) -> usize {
        self.assigned.len()
    }

    pub fn index(&mut self, coords: &[i64]) -> usize {
        if let Some(&i) = self.assigned.get(coords) {
            return i;
        }
        if self.assigned.len() < self.capacity {
            let i = self.assigned.len();
            self.assigned.insert(coords.to_vec(), i);
            i
        } else {
            (fnv1a64(coords) % self.capacity as u64) as usize
        }
    }
}

/// Joint tile coder over all observation dimensions.
#[derive(Clone, Debug)]
pub struct TileCoder {
    bounds: BoundsSpec,
    cfg: TileCoderConfig,
    table: IndexHashTable,
    coords: Vec<i64>,
}

impl TileCoder {
    pub fn new(bounds: BoundsSpec, cfg: TileCoderConfig) -> Result<Self> {
        cfg.validate()?;
        if bounds.dims() != cfg.dims {
            return Err(Error::DimensionMismatch {
                expected: cfg.dims,
                actual: bounds.dims(),
            });
        }
        Ok(TileCoder {
            bounds,
            table: IndexHashTable::new(cfg.capacity),
            coords: vec![0; cfg.dims + 1],
            cfg,
        })
    }

    pub fn config(&self) -> &TileCoderConfig {
        &self.cfg
    }

    pub fn table(&self) -> &IndexHashTable {
        &self.table
    }

    /// Tiling `t` is displaced by `t / num_tilings` of a tile along every
    /// dimension; floor coordinates are clamped so each tiling has exactly
    /// `tiles_per_dim^dims` tiles.
    pub fn encode(&mut self, obs: &[f64]) -> Result<FeatureVector> {
        self.bounds.check(obs)?;
        let n = self.cfg.num_tilings;
        let tiles = self.cfg.tiles_per_dim as f64;
        let top = self.cfg.tiles_per_dim as i64 - 1;
        let mut active = Vec::with_capacity(n);
        for t in 0..n {
            let shift = t as f64 / n as f64;
            self.coords[0] = t as i64;
            for (j, &x) in obs.iter().enumerate() {
                let scaled = self.bounds.unit(j, x) * tiles;
                self.coords[j + 1] = ((scaled + shift).floor() as i64).clamp(0, top);
            }
            let idx = self.table.index(&self.coords);
            if !active.contains(&idx) {
                active.push(idx);
            }
        }
        Ok(FeatureVector::Sparse {
            active,
            len: self.cfg.capacity,
        })
    }
}

pub fn tile_code(obs: &[f64], coder: &mut TileCoder) -> Result<FeatureVector> {
    coder.encode(obs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preprocessing {
    Raw,
    Discretize,
    Tilecode,
}

impl Preprocessing {
    pub const ALL: [Preprocessing; 3] = [
        Preprocessing::Raw,
        Preprocessing::Discretize,
        Preprocessing::Tilecode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preprocessing::Raw => "raw",
            Preprocessing::Discretize => "discretize",
            Preprocessing::Tilecode => "tilecode",
        }
    }
}

impl std::fmt::Display for Preprocessing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Preprocessing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preprocessing::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown preprocessing `{s}`")))
    }
}

/// One of the three preprocessing strategies, bound to its bounds.
///
/// Each run owns its featurizer: the tile coder's index table mutates as
/// new tiles are seen.
#[derive(Clone, Debug)]
pub enum Featurizer {
    Raw(BoundsSpec),
    Discretize { bounds: BoundsSpec, bins: usize },
    TileCode(TileCoder),
}

impl Featurizer {
    pub fn input_length(&self) -> usize {
        match self {
            Featurizer::Raw(b) => b.dims(),
            Featurizer::Discretize { bounds, bins } => bounds.dims() * bins,
            Featurizer::TileCode(c) => c.cfg.capacity,
        }
    }

    pub fn bounds(&self) -> &BoundsSpec {
        match self {
            Featurizer::Raw(b) => b,
            Featurizer::Discretize { bounds, .. } => bounds,
            Featurizer::TileCode(c) => &c.bounds,
        }
    }

    pub fn encode(&mut self, obs: &[f64]) -> Result<FeatureVector> {
        match self {
            Featurizer::Raw(b) => normalize(obs, b),
            Featurizer::Discretize { bounds, bins } => discretize(obs, bounds, *bins),
            Featurizer::TileCode(c) => c.encode(obs),
        }
    }
}
