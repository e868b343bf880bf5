//! Radiation-model transition kernels.
//!
//! For origin `i` and destination `j` the unnormalized weight is
//!
//! ```text
//! w_ij = a_j / ((a_i + s_ij) (a_i + a_j + s_ij))
//! ```
//!
//! where `a` is the per-city attractiveness and `s_ij` the total
//! attractiveness of cities strictly closer to `i` than `j` is (both
//! endpoints excluded). Each row, the self-transition included, is then
//! normalized to a probability distribution.
//!
//! `s_ij` comes from an [`OpportunityIndex`]: every row of the distance
//! matrix is sorted once, and prefix sums over that order (with the origin
//! skipped) answer each query with one binary search.
//!
//! The multilevel model keeps one kernel per discipline, each built on the
//! cities that discipline visited, and mixes them by notable share.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::geo::DistanceMatrix;
use crate::ingest::{CityTable, Discipline};
use crate::netbuild::AssignedTrajectory;
use crate::scalar::Real;

pub const KERNEL_DUMP_MAGIC: [u8; 8] = *b"RADKRN\0\x01";

#[derive(Debug, Error)]
pub enum RadiationError {
    #[error("level `{0}` has no cities")]
    EmptyLevel(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("attractiveness of node {index} is {value}, must be positive and finite")]
    NonPositiveAttractiveness { index: usize, value: f64 },
    #[error("uniform attractiveness must be constant")]
    NonUniform,
    #[error("row {0} has no positive weight")]
    ZeroRow(usize),
    #[error("notable shares sum to {0}, expected 1")]
    InvalidShares(f64),
    #[error("notable share {0} outside (0, 1]")]
    InvalidShare(f64),
    #[error("unknown model `{0}`; expected {{uniform|pop|notable|pop-notable}}-{{single|multi}}")]
    UnknownModel(String),
    #[error("no cities were visited")]
    NoVisits,
    #[error("kernel dump: {0}")]
    BadDump(String),
    #[error("kernel dump I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl RadiationError {
    pub fn code(&self) -> &'static str {
        match self {
            RadiationError::EmptyLevel(_) => "EmptyLevel",
            RadiationError::DimensionMismatch { .. } => "DimensionMismatch",
            RadiationError::NonPositiveAttractiveness { .. } => "NonPositiveAttractiveness",
            RadiationError::NonUniform => "NonUniform",
            RadiationError::ZeroRow(_) => "ZeroRow",
            RadiationError::InvalidShares(_) => "InvalidShares",
            RadiationError::InvalidShare(_) => "InvalidShare",
            RadiationError::UnknownModel(_) => "UnknownModel",
            RadiationError::NoVisits => "NoVisits",
            RadiationError::BadDump(_) => "BadKernelDump",
            RadiationError::Io(_) => "IoError",
        }
    }
}

// ---------------------------------------------------------------------------
// Attractiveness

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttractivenessMode {
    Uniform,
    Population,
    Notables,
    PopTimesNotables,
}

impl fmt::Display for AttractivenessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttractivenessMode::Uniform => "uniform",
            AttractivenessMode::Population => "pop",
            AttractivenessMode::Notables => "notable",
            AttractivenessMode::PopTimesNotables => "pop-notable",
        })
    }
}

impl FromStr for AttractivenessMode {
    type Err = RadiationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" | "random" => Ok(AttractivenessMode::Uniform),
            "pop" => Ok(AttractivenessMode::Population),
            "notable" => Ok(AttractivenessMode::Notables),
            "pop-notable" => Ok(AttractivenessMode::PopTimesNotables),
            _ => Err(RadiationError::UnknownModel(s.to_string())),
        }
    }
}

/// Default way of combining population and notable counts: `pop * (notables + 1)`.
pub fn pop_times_notables_plus_one<T: Real>(population: T, notables: T) -> T {
    population * (notables + T::one())
}

/// Per-node attractiveness of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct Attractiveness<T: Real = f64> {
    mode: AttractivenessMode,
    values: Vec<T>,
}

impl<T: Real> Attractiveness<T> {
    pub fn new(mode: AttractivenessMode, values: Vec<T>) -> Result<Self, RadiationError> {
        for (index, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > T::zero()) {
                return Err(RadiationError::NonPositiveAttractiveness { index, value: v.as_f64() });
            }
        }
        if mode == AttractivenessMode::Uniform && values.windows(2).any(|w| w[0] != w[1]) {
            return Err(RadiationError::NonUniform);
        }
        Ok(Attractiveness { mode, values })
    }

    pub fn uniform(n: usize) -> Self {
        Attractiveness {
            mode: AttractivenessMode::Uniform,
            values: vec![T::one(); n],
        }
    }

    pub fn population(population: &[T]) -> Result<Self, RadiationError> {
        Self::new(AttractivenessMode::Population, population.to_vec())
    }

    pub fn notables(counts: &[T]) -> Result<Self, RadiationError> {
        Self::new(AttractivenessMode::Notables, counts.to_vec())
    }

    pub fn pop_times_notables(population: &[T], notables: &[T]) -> Result<Self, RadiationError> {
        Self::combined(population, notables, pop_times_notables_plus_one)
    }

    /// Mixed attractiveness from a caller-chosen combiner.
    pub fn combined(population: &[T], notables: &[T], combiner: impl Fn(T, T) -> T) -> Result<Self, RadiationError> {
        if population.len() != notables.len() {
            return Err(RadiationError::DimensionMismatch {
                expected: population.len(),
                got: notables.len(),
            });
        }
        let values = population.iter().zip(notables).map(|(&p, &n)| combiner(p, n)).collect();
        Self::new(AttractivenessMode::PopTimesNotables, values)
    }

    pub fn mode(&self) -> AttractivenessMode {
        self.mode
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Attractiveness {
            mode: self.mode,
            values: self.values.iter().map(|&v| v * factor).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Intervening opportunities

/// Per-row sorted distances and origin-excluding prefix sums of attractiveness.
#[derive(Debug, Clone)]
pub struct OpportunityIndex<T: Real = f64> {
    n: usize,
    sorted_dist: Vec<T>,
    prefix: Vec<T>,
}

impl<T: Real> OpportunityIndex<T> {
    pub fn new(distances: &DistanceMatrix<T>, attractiveness: &Attractiveness<T>) -> Self {
        let n = distances.len();
        assert_eq!(n, attractiveness.len(), "attractiveness must cover every node");
        let a = attractiveness.values();
        let mut sorted_dist = Vec::with_capacity(n * n);
        let mut prefix = Vec::with_capacity(n * n);
        for i in 0..n {
            let mut acc = T::zero();
            prefix.push(acc);
            for &k in distances.sorted_row(i) {
                let k = k as usize;
                sorted_dist.push(distances.get(i, k));
                if k != i {
                    acc = acc + a[k];
                    prefix.push(acc);
                }
            }
        }
        OpportunityIndex { n, sorted_dist, prefix }
    }

    /// `s_ij` given `r_ij`.
    pub fn mass(&self, i: usize, j: usize, r_ij: T) -> T {
        if i == j {
            return T::zero();
        }
        let row = &self.sorted_dist[i * self.n..(i + 1) * self.n];
        let closer = row.partition_point(|&d| d < r_ij);
        // The origin sits at distance 0 and is among `closer` whenever r_ij > 0.
        let others = if r_ij > T::zero() { closer - 1 } else { closer };
        self.prefix[i * self.n + others]
    }
}

/// `s_ij` for a single pair, accumulated along row `i`'s distance order.
pub fn intervening_mass<T: Real>(i: usize, j: usize, attractiveness: &Attractiveness<T>, distances: &DistanceMatrix<T>) -> T {
    if i == j {
        return T::zero();
    }
    let a = attractiveness.values();
    let r_ij = distances.get(i, j);
    let mut acc = T::zero();
    for &k in distances.sorted_row(i) {
        let k = k as usize;
        if distances.get(i, k) >= r_ij {
            break;
        }
        if k != i {
            acc = acc + a[k];
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Kernels

/// Row-stochastic transition matrix over `nodes` (row-major, self-transitions included).
#[derive(Debug, Clone, PartialEq)]
pub struct RadiationKernel<T: Real = f64> {
    nodes: Vec<usize>,
    probs: Vec<T>,
}

impl<T: Real> RadiationKernel<T> {
    pub fn from_rows(nodes: Vec<usize>, probs: Vec<T>) -> Result<Self, RadiationError> {
        let n = nodes.len();
        if probs.len() != n * n {
            return Err(RadiationError::DimensionMismatch {
                expected: n * n,
                got: probs.len(),
            });
        }
        Ok(RadiationKernel { nodes, probs })
    }

    pub fn identity(node: usize) -> Self {
        RadiationKernel {
            nodes: vec![node],
            probs: vec![T::one()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn row(&self, i: usize) -> &[T] {
        let n = self.len();
        &self.probs[i * n..(i + 1) * n]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.probs[i * self.len() + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.probs
    }

    /// Largest `|row sum - 1|`.
    pub fn max_row_error(&self) -> T {
        (0..self.len())
            .map(|i| (self.row(i).iter().copied().sum::<T>() - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    /// Writes `RADKRN\0\x01`, a little-endian `u64` node count, each node
    /// label as `u32` byte length plus UTF-8, then the row-major matrix as
    /// little-endian `f64`.
    pub fn write_binary(&self, mut w: impl Write, label: impl Fn(usize) -> String) -> Result<(), RadiationError> {
        w.write_all(&KERNEL_DUMP_MAGIC)?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for &node in &self.nodes {
            let name = label(node);
            let len = u32::try_from(name.len()).map_err(|_| RadiationError::BadDump("label too long".into()))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(name.as_bytes())?;
        }
        for p in &self.probs {
            w.write_all(&p.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a dump; the returned kernel numbers its nodes `0..n` in label order.
    pub fn read_binary(mut r: impl Read) -> Result<(Vec<String>, Self), RadiationError> {
        let truncated = |_| RadiationError::BadDump("truncated".into());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(truncated)?;
        if magic != KERNEL_DUMP_MAGIC {
            return Err(RadiationError::BadDump("bad magic".into()));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(truncated)?;
        let n = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| RadiationError::BadDump("node count overflow".into()))?;
        let mut labels = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let mut b4 = [0u8; 4];
            r.read_exact(&mut b4).map_err(truncated)?;
            let mut bytes = vec![0u8; u32::from_le_bytes(b4) as usize];
            r.read_exact(&mut bytes).map_err(truncated)?;
            labels.push(String::from_utf8(bytes).map_err(|_| RadiationError::BadDump("label is not UTF-8".into()))?);
        }
        let cells = n.checked_mul(n).ok_or_else(|| RadiationError::BadDump("node count overflow".into()))?;
        let mut probs = Vec::with_capacity(cells.min(1 << 24));
        for _ in 0..cells {
            r.read_exact(&mut b8).map_err(truncated)?;
            probs.push(T::lit(f64::from_le_bytes(b8)));
        }
        Ok((
            labels,
            RadiationKernel {
                nodes: (0..n).collect(),
                probs,
            },
        ))
    }
}

/// Radiation kernel over the nodes of `distances`.
pub fn single_level_kernel<T: Real>(attractiveness: &Attractiveness<T>, distances: &DistanceMatrix<T>) -> Result<RadiationKernel<T>, RadiationError> {
    let n = distances.len();
    if attractiveness.len() != n {
        return Err(RadiationError::DimensionMismatch {
            expected: n,
            got: attractiveness.len(),
        });
    }
    if n == 0 {
        return Err(RadiationError::EmptyLevel(String::new()));
    }
    let index = OpportunityIndex::new(distances, attractiveness);
    let a = attractiveness.values();
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ai = a[i];
            let mut row: Vec<T> = (0..n)
                .map(|j| {
                    let s = index.mass(i, j, distances.get(i, j));
                    a[j] / ((ai + s) * (ai + a[j] + s))
                })
                .collect();
            let total: T = row.iter().copied().sum();
            if !(total.is_finite() && total > T::zero()) {
                return Err(RadiationError::ZeroRow(i));
            }
            row.iter_mut().for_each(|w| *w = *w / total);
            Ok(row)
        })
        .collect::<Result<_, _>>()?;
    RadiationKernel::from_rows(distances.nodes().to_vec(), rows.concat())
}

/// Radiation kernel with equal attractiveness everywhere. Distances still
/// shape it through the intervening mass, so it is not the flat `1/N` matrix.
pub fn uniform_kernel<T: Real>(distances: &DistanceMatrix<T>) -> Result<RadiationKernel<T>, RadiationError> {
    single_level_kernel(&Attractiveness::uniform(distances.len()), distances)
}

// ---------------------------------------------------------------------------
// Levels

/// One discipline's network: its cities, share of notables, attractiveness
/// and the distances restricted to its cities.
#[derive(Debug, Clone)]
pub struct Level<T: Real = f64> {
    pub label: String,
    pub share: T,
    pub attractiveness: Attractiveness<T>,
    pub distances: DistanceMatrix<T>,
}

impl<T: Real> Level<T> {
    pub fn new(label: impl Into<String>, share: T, attractiveness: Attractiveness<T>, distances: DistanceMatrix<T>) -> Result<Self, RadiationError> {
        let label = label.into();
        if distances.is_empty() {
            return Err(RadiationError::EmptyLevel(label));
        }
        if attractiveness.len() != distances.len() {
            return Err(RadiationError::DimensionMismatch {
                expected: distances.len(),
                got: attractiveness.len(),
            });
        }
        if !(share > T::zero() && share <= T::one()) {
            return Err(RadiationError::InvalidShare(share.as_f64()));
        }
        Ok(Level {
            label,
            share,
            attractiveness,
            distances,
        })
    }

    pub fn nodes(&self) -> &[usize] {
        self.distances.nodes()
    }

    pub fn kernel(&self) -> Result<RadiationKernel<T>, RadiationError> {
        if self.distances.len() == 1 {
            return Ok(RadiationKernel::identity(self.nodes()[0]));
        }
        single_level_kernel(&self.attractiveness, &self.distances)
    }
}

#[derive(Debug, Clone)]
pub struct LevelKernel<T: Real = f64> {
    pub label: String,
    pub share: T,
    pub kernel: RadiationKernel<T>,
}

/// Independent per-level kernels mixed by notable share.
#[derive(Debug, Clone)]
pub struct MultilevelKernel<T: Real = f64> {
    universe: Vec<usize>,
    levels: Vec<LevelKernel<T>>,
}

fn share_tolerance<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(16.0))
}

pub fn multilevel_kernel<T: Real>(levels: &[Level<T>]) -> Result<MultilevelKernel<T>, RadiationError> {
    if levels.is_empty() {
        return Err(RadiationError::InvalidShares(0.0));
    }
    let total: T = levels.iter().map(|l| l.share).sum();
    if (total - T::one()).abs() > share_tolerance() {
        return Err(RadiationError::InvalidShares(total.as_f64()));
    }
    let universe: BTreeSet<usize> = levels.iter().flat_map(|l| l.nodes().iter().copied()).collect();
    let levels = levels
        .iter()
        .map(|l| {
            Ok(LevelKernel {
                label: l.label.clone(),
                share: l.share,
                kernel: l.kernel()?,
            })
        })
        .collect::<Result<_, RadiationError>>()?;
    Ok(MultilevelKernel {
        universe: universe.into_iter().collect(),
        levels,
    })
}

impl<T: Real> MultilevelKernel<T> {
    /// Sorted union of all level nodes.
    pub fn universe(&self) -> &[usize] {
        &self.universe
    }

    pub fn levels(&self) -> &[LevelKernel<T>] {
        &self.levels
    }

    fn position(&self) -> BTreeMap<usize, usize> {
        self.universe.iter().enumerate().map(|(k, &c)| (c, k)).collect()
    }

    /// Share-weighted sum of the level kernels over the universe (row-major).
    /// Rows of nodes absent from some level sum to less than one.
    pub fn mixture(&self) -> Vec<T> {
        let pos = self.position();
        let u = self.universe.len();
        let mut flow = vec![T::zero(); u * u];
        for level in &self.levels {
            let map: Vec<usize> = level.kernel.nodes().iter().map(|c| pos[c]).collect();
            for (li, &gi) in map.iter().enumerate() {
                for (lj, &gj) in map.iter().enumerate() {
                    let cell = &mut flow[gi * u + gj];
                    *cell = *cell + level.share * level.kernel.get(li, lj);
                }
            }
        }
        flow
    }

    /// Mixture conditioned on the current city: each row divided by the
    /// total share of the levels containing that city.
    pub fn transition(&self) -> RadiationKernel<T> {
        let u = self.universe.len();
        let mut probs = self.mixture();
        for row in probs.chunks_mut(u.max(1)) {
            let total: T = row.iter().copied().sum();
            row.iter_mut().for_each(|p| *p = *p / total);
        }
        RadiationKernel {
            nodes: self.universe.clone(),
            probs,
        }
    }
}

// ---------------------------------------------------------------------------
// Model configurations

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Structure {
    Single,
    Multi,
}

/// One of the eight `{uniform|pop|notable|pop-notable}-{single|multi}` models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelSpec {
    pub mode: AttractivenessMode,
    pub structure: Structure,
}

impl ModelSpec {
    pub const fn new(mode: AttractivenessMode, structure: Structure) -> Self {
        ModelSpec { mode, structure }
    }

    pub fn all() -> Vec<ModelSpec> {
        use AttractivenessMode::*;
        let mut out = Vec::with_capacity(8);
        for mode in [Uniform, Population, Notables, PopTimesNotables] {
            for structure in [Structure::Single, Structure::Multi] {
                out.push(ModelSpec::new(mode, structure));
            }
        }
        out
    }

    /// The five reference models, best first.
    pub fn reference_five() -> [ModelSpec; 5] {
        use AttractivenessMode::*;
        [
            ModelSpec::new(PopTimesNotables, Structure::Multi),
            ModelSpec::new(Population, Structure::Multi),
            ModelSpec::new(Notables, Structure::Multi),
            ModelSpec::new(Notables, Structure::Single),
            ModelSpec::new(Uniform, Structure::Single),
        ]
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.structure {
            Structure::Single => "single",
            Structure::Multi => "multi",
        };
        write!(f, "{}-{}", self.mode, s)
    }
}

impl FromStr for ModelSpec {
    type Err = RadiationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || RadiationError::UnknownModel(s.to_string());
        let (mode, structure) = s.rsplit_once('-').ok_or_else(unknown)?;
        let structure = match structure {
            "single" => Structure::Single,
            "multi" => Structure::Multi,
            _ => return Err(unknown()),
        };
        Ok(ModelSpec::new(mode.parse().map_err(|_| unknown())?, structure))
    }
}

/// Visited-city data every model is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInputs {
    /// Sorted city-table indices of all visited cities.
    pub universe: Vec<usize>,
    /// Population per universe node.
    pub population: Vec<f64>,
    /// In-window visits per universe node, all disciplines.
    pub notables: Vec<f64>,
    pub levels: Vec<LevelInputs>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelInputs {
    pub discipline: Discipline,
    /// Fraction of persons (with at least one visit) in this discipline.
    pub share: f64,
    /// Positions into `ModelInputs::universe`, ascending.
    pub nodes: Vec<usize>,
    /// Visits by this discipline per level node.
    pub notables: Vec<f64>,
}

impl ModelInputs {
    pub fn from_trajectories(trajectories: &[AssignedTrajectory], cities: &CityTable) -> Result<Self, RadiationError> {
        let mut visits: BTreeMap<usize, f64> = BTreeMap::new();
        let mut per_disc: BTreeMap<&Discipline, (usize, BTreeMap<usize, f64>)> = BTreeMap::new();
        let mut persons = 0usize;
        for t in trajectories.iter().filter(|t| !t.visits.is_empty()) {
            persons += 1;
            let entry = per_disc.entry(&t.discipline).or_default();
            entry.0 += 1;
            for v in &t.visits {
                *visits.entry(v.city).or_default() += 1.0;
                *entry.1.entry(v.city).or_default() += 1.0;
            }
        }
        if persons == 0 {
            return Err(RadiationError::NoVisits);
        }
        let universe: Vec<usize> = visits.keys().copied().collect();
        let pos: BTreeMap<usize, usize> = universe.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let levels = per_disc
            .into_iter()
            .map(|(d, (count, counts))| LevelInputs {
                discipline: d.clone(),
                share: count as f64 / persons as f64,
                nodes: counts.keys().map(|c| pos[c]).collect(),
                notables: counts.values().copied().collect(),
            })
            .collect();
        Ok(ModelInputs {
            population: universe.iter().map(|&c| cities.cities[c].population).collect(),
            notables: visits.values().copied().collect(),
            universe,
            levels,
        })
    }

    /// Levels for `spec` using the default `pop * (notables + 1)` combiner.
    /// `distances` must span `universe` in order.
    pub fn levels<T: Real>(&self, spec: ModelSpec, distances: &DistanceMatrix<T>) -> Result<Vec<Level<T>>, RadiationError> {
        self.levels_with(spec, distances, pop_times_notables_plus_one)
    }

    pub fn levels_with<T: Real>(
        &self,
        spec: ModelSpec,
        distances: &DistanceMatrix<T>,
        combiner: impl Fn(T, T) -> T + Copy,
    ) -> Result<Vec<Level<T>>, RadiationError> {
        if distances.len() != self.universe.len() {
            return Err(RadiationError::DimensionMismatch {
                expected: self.universe.len(),
                got: distances.len(),
            });
        }
        let attract = |nodes: &[usize], notables: &[f64]| -> Result<Attractiveness<T>, RadiationError> {
            let pop: Vec<T> = nodes.iter().map(|&k| T::lit(self.population[k])).collect();
            let nots: Vec<T> = notables.iter().map(|&v| T::lit(v)).collect();
            match spec.mode {
                AttractivenessMode::Uniform => Ok(Attractiveness::uniform(nodes.len())),
                AttractivenessMode::Population => Attractiveness::population(&pop),
                AttractivenessMode::Notables => Attractiveness::notables(&nots),
                AttractivenessMode::PopTimesNotables => Attractiveness::combined(&pop, &nots, combiner),
            }
        };
        match spec.structure {
            Structure::Single => {
                let all: Vec<usize> = (0..self.universe.len()).collect();
                Ok(vec![Level::new("all", T::one(), attract(&all, &self.notables)?, distances.clone())?])
            }
            Structure::Multi => self
                .levels
                .iter()
                .map(|l| {
                    Level::new(
                        l.discipline.to_string(),
                        T::lit(l.share),
                        attract(&l.nodes, &l.notables)?,
                        distances.restrict(&l.nodes),
                    )
                })
                .collect(),
        }
    }
}
