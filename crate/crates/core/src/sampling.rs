//! Counter-based random streams and inverse-transform sampling.
//!
//! Every stochastic decision in the simulator is a pure function of a
//! [`StreamKey`] and a draw index, so results do not depend on the order in
//! which agents, rooms or threads are processed.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Kind of decision a stream feeds. Part of the key so that two decisions
/// about the same entity on the same day never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    HouseSize = 1,
    HouseReligion,
    AgeBand,
    AgeYear,
    Profession,
    VisitEligibility,
    SocialVisits,
    VisitHouses,
    TravelTrait,
    FixedLocation,
    Severity,
    Outcome,
    IndexCase,
    Departure,
    TravelDuration,
    AbroadInfection,
    ReturnOffset,
    Outing,
    HouseVisit,
    Attendance,
    Infection,
    HospitalBed,
}

/// Identifies one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub entity: u64,
    pub day: u32,
    pub hour: u8,
    pub purpose: Purpose,
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function (Stafford variant 13).
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl StreamKey {
    pub fn new(seed: u64, purpose: Purpose) -> Self {
        StreamKey {
            seed,
            entity: 0,
            day: 0,
            hour: 0,
            purpose,
        }
    }

    pub fn entity(mut self, entity: u64) -> Self {
        self.entity = entity;
        self
    }

    pub fn day(mut self, day: u32) -> Self {
        self.day = day;
        self
    }

    pub fn hour(mut self, hour: u8) -> Self {
        self.hour = hour;
        self
    }

    /// Absorb all key fields into a 64-bit stream origin.
    #[inline]
    fn origin(&self) -> u64 {
        let tail = ((self.day as u64) << 16) | ((self.hour as u64) << 8) | self.purpose as u64;
        let mut h = mix64(self.seed ^ 0x6a09_e667_f3bc_c908);
        h = mix64(h ^ self.entity.wrapping_mul(GOLDEN_GAMMA));
        mix64(h ^ tail.wrapping_mul(0xd6e8_feb8_6659_fd93))
    }

    /// Raw 64 random bits at position `index` of this stream.
    #[inline]
    pub fn bits(&self, index: u64) -> u64 {
        mix64(
            self.origin()
                .wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)),
        )
    }

    /// Uniform value in `[0, 1)` at position `index` of this stream.
    #[inline]
    pub fn next_unit(&self, index: u64) -> f64 {
        to_unit(self.bits(index))
    }

    /// Sequential reader over this stream, starting at index 0.
    pub fn stream(&self) -> Stream {
        Stream {
            origin: self.origin(),
            index: 0,
        }
    }
}

/// Sequential cursor over one keyed stream. `Stream` yields exactly the same
/// values as calling [`StreamKey::next_unit`] with indices 0, 1, 2, ...
#[derive(Debug, Clone)]
pub struct Stream {
    origin: u64,
    index: u64,
}

impl Stream {
    #[inline]
    pub fn unit(&mut self) -> f64 {
        self.index = self.index.wrapping_add(1);
        to_unit(mix64(
            self.origin.wrapping_add(self.index.wrapping_mul(GOLDEN_GAMMA)),
        ))
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Uniform integer in `lo..=hi`. Panics if `lo > hi`.
    #[inline]
    pub fn int_range(&mut self, lo: i64, hi: i64) -> i64 {
        sample_int_range(lo, hi, self.unit()).expect("lo <= hi")
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "cannot pick from an empty set");
        ((self.unit() * n as f64) as usize).min(n - 1)
    }
}

/// Uniform integer in `lo..=hi` from a unit draw.
pub fn sample_int_range(lo: i64, hi: i64, u: f64) -> Result<i64, ConfigError> {
    if lo > hi {
        return Err(ConfigError::new("", format!("empty integer range {lo}..={hi}")));
    }
    let span = (hi - lo + 1) as f64;
    Ok((lo + (u * span).floor() as i64).min(hi))
}

/// Serialized form of a [`CategoricalTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec<L> {
    pub labels: Vec<L>,
    pub weights: Vec<f64>,
}

/// A finite discrete distribution sampled by inverse transform.
///
/// A draw `u` selects label `i` when `u` lies in `[c[i-1], c[i])` of the
/// cumulative weights. A draw landing exactly on a boundary belongs to the
/// upper category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableSpec<L>", into = "TableSpec<L>")]
#[serde(bound(
    serialize = "L: Serialize + Clone",
    deserialize = "L: Deserialize<'de> + Clone"
))]
pub struct CategoricalTable<L> {
    labels: Vec<L>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

const SUM_TOLERANCE: f64 = 1e-9;

impl<L: Clone> CategoricalTable<L> {
    /// Build a table, normalizing the weights to sum to one.
    pub fn new(labels: Vec<L>, weights: Vec<f64>) -> Result<Self, ConfigError> {
        if labels.is_empty() {
            return Err(ConfigError::new("labels", "table must not be empty"));
        }
        if labels.len() != weights.len() {
            return Err(ConfigError::new(
                "weights",
                format!("{} weights for {} labels", weights.len(), labels.len()),
            ));
        }
        if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(ConfigError::new(
                "weights",
                format!("weight {bad} is not a finite non-negative number"),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(ConfigError::new("weights", "weights sum to zero"));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if (acc - 1.0).abs() > SUM_TOLERANCE {
            return Err(ConfigError::new(
                "weights",
                format!("weights sum to {acc} after normalization"),
            ));
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(CategoricalTable {
            labels,
            weights,
            cumulative,
        })
    }

    /// Position of the category selected by `u`.
    #[inline]
    pub fn sample_index(&self, u: f64) -> usize {
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.labels.len() - 1)
    }

    #[inline]
    pub fn sample(&self, u: f64) -> &L {
        &self.labels[self.sample_index(u)]
    }

    pub fn labels(&self) -> &[L] {
        &self.labels
    }

    /// Normalized weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&L, f64)> {
        self.labels.iter().zip(self.weights.iter().copied())
    }
}

/// Checked constructor for the sampler surface: validates `u` as well.
pub fn sample_categorical<L: Clone>(table: &CategoricalTable<L>, u: f64) -> Result<&L, ConfigError> {
    if !(0.0..1.0).contains(&u) {
        return Err(ConfigError::new("u", format!("{u} is outside [0, 1)")));
    }
    Ok(table.sample(u))
}

impl<L: Clone> TryFrom<TableSpec<L>> for CategoricalTable<L> {
    type Error = ConfigError;

    fn try_from(spec: TableSpec<L>) -> Result<Self, Self::Error> {
        CategoricalTable::new(spec.labels, spec.weights)
    }
}

impl<L: Clone> From<CategoricalTable<L>> for TableSpec<L> {
    fn from(table: CategoricalTable<L>) -> Self {
        TableSpec {
            labels: table.labels,
            weights: table.weights,
        }
    }
}
