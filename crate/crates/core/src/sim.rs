//! Monte-Carlo walkers over radiation kernels.
//!
//! Each walker draws a discipline from the notable shares, a start city from
//! its level's population weights, a trip count `k >= 1` from a geometric law,
//! and then makes `k` draws from successive kernel rows. Self-transitions are
//! recorded and count toward `k`.
//!
//! Replicate `r` uses its own generator seeded with `seed ^ r`, so replicates
//! can run in any order and on any number of threads with identical output.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Geometric;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radiation::{MultilevelKernel, RadiationKernel};
use crate::scalar::Real;

/// Largest `|row sum - 1|` a kernel may have and still be sampled.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("level `{0}` has no city with positive start weight")]
    EmptyLevelSupport(String),
    #[error("level `{level}`: kernel row {row} sums to {sum}")]
    NotStochastic { level: String, row: usize, sum: f64 },
    #[error("level `{level}`: {weights} start weights for {nodes} kernel nodes")]
    DimensionMismatch { level: String, weights: usize, nodes: usize },
    #[error("model has no levels")]
    NoLevels,
    #[error("invalid level shares: {0}")]
    InvalidShares(String),
}

impl SimError {
    pub fn code(&self) -> &'static str {
        match self {
            SimError::InvalidConfig(_) => "InvalidSimConfig",
            SimError::EmptyLevelSupport(_) => "EmptyLevelSupport",
            SimError::NotStochastic { .. } => "NotStochastic",
            SimError::DimensionMismatch { .. } => "DimensionMismatch",
            SimError::NoLevels => "NoLevels",
            SimError::InvalidShares(_) => "InvalidShares",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub walkers: usize,
    pub replicates: usize,
    /// Success probability of the geometric trip-count law.
    pub trip_p: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            walkers: 2000,
            replicates: 500,
            trip_p: 0.5,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.walkers == 0 {
            return Err(SimError::InvalidConfig("walkers must be at least 1".into()));
        }
        if self.replicates == 0 {
            return Err(SimError::InvalidConfig("replicates must be at least 1".into()));
        }
        if !(self.trip_p > 0.0 && self.trip_p <= 1.0) {
            return Err(SimError::InvalidConfig(format!("trip_p = {} outside (0, 1]", self.trip_p)));
        }
        Ok(())
    }

    /// Generator for replicate `r`.
    pub fn replicate_rng(&self, replicate: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ replicate as u64)
    }
}

/// Cumulative rows of a kernel, sampled by binary search.
#[derive(Debug, Clone)]
pub struct RowSampler {
    n: usize,
    cdf: Vec<f64>,
}

impl RowSampler {
    pub fn new<T: Real>(kernel: &RadiationKernel<T>, label: &str) -> Result<Self, SimError> {
        let n = kernel.len();
        let mut cdf = Vec::with_capacity(n * n);
        for i in 0..n {
            let row = kernel.row(i);
            let sum: f64 = row.iter().map(|p| p.as_f64()).sum();
            let nonneg = row.iter().all(|p| p.as_f64() >= 0.0);
            if !nonneg || !((sum - 1.0).abs() <= ROW_SUM_TOLERANCE) {
                return Err(SimError::NotStochastic {
                    level: label.to_string(),
                    row: i,
                    sum,
                });
            }
            let last = row.iter().rposition(|p| p.as_f64() > 0.0).expect("stochastic row has a positive entry");
            let mut acc = 0.0;
            for (j, p) in row.iter().enumerate() {
                acc += p.as_f64();
                cdf.push(if j >= last { 1.0 } else { acc.min(1.0) });
            }
        }
        Ok(RowSampler { n, cdf })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Column chosen from row `from` by a uniform draw `u` in `[0, 1)`.
    pub fn pick(&self, from: usize, u: f64) -> usize {
        let row = &self.cdf[from * self.n..(from + 1) * self.n];
        row.partition_point(|&c| c <= u)
    }

    pub fn sample(&self, from: usize, rng: &mut impl Rng) -> usize {
        self.pick(from, rng.random::<f64>())
    }
}

/// A level ready for sampling: its kernel, external node ids and start law.
#[derive(Debug, Clone)]
pub struct SimLevel {
    pub label: String,
    pub share: f64,
    nodes: Vec<usize>,
    sampler: RowSampler,
    start: WeightedIndex<f64>,
}

impl SimLevel {
    /// `start_weights[i]` is the start weight of `kernel.nodes()[i]`.
    pub fn new<T: Real>(label: impl Into<String>, share: f64, kernel: &RadiationKernel<T>, start_weights: &[f64]) -> Result<Self, SimError> {
        let label = label.into();
        if start_weights.len() != kernel.len() {
            return Err(SimError::DimensionMismatch {
                level: label,
                weights: start_weights.len(),
                nodes: kernel.len(),
            });
        }
        let start = WeightedIndex::new(start_weights.iter().copied()).map_err(|_| SimError::EmptyLevelSupport(label.clone()))?;
        Ok(SimLevel {
            sampler: RowSampler::new(kernel, &label)?,
            nodes: kernel.nodes().to_vec(),
            label,
            share,
            start,
        })
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn sampler(&self) -> &RowSampler {
        &self.sampler
    }
}

/// Levels plus the categorical law over them.
#[derive(Debug, Clone)]
pub struct SimModel {
    levels: Vec<SimLevel>,
    choose: WeightedIndex<f64>,
}

impl SimModel {
    pub fn new(levels: Vec<SimLevel>) -> Result<Self, SimError> {
        if levels.is_empty() {
            return Err(SimError::NoLevels);
        }
        let choose = WeightedIndex::new(levels.iter().map(|l| l.share)).map_err(|e| SimError::InvalidShares(e.to_string()))?;
        Ok(SimModel { levels, choose })
    }

    /// One level over a single kernel.
    pub fn single<T: Real>(kernel: &RadiationKernel<T>, start_weights: &[f64]) -> Result<Self, SimError> {
        Self::new(vec![SimLevel::new("all", 1.0, kernel, start_weights)?])
    }

    /// One sampling level per kernel level; `start_weight` maps an external node id to its weight.
    pub fn from_multilevel<T: Real>(kernel: &MultilevelKernel<T>, start_weight: impl Fn(usize) -> f64) -> Result<Self, SimError> {
        let levels = kernel
            .levels()
            .iter()
            .map(|l| {
                let weights: Vec<f64> = l.kernel.nodes().iter().map(|&c| start_weight(c)).collect();
                SimLevel::new(l.label.clone(), l.share.as_f64(), &l.kernel, &weights)
            })
            .collect::<Result<_, _>>()?;
        Self::new(levels)
    }

    pub fn levels(&self) -> &[SimLevel] {
        &self.levels
    }
}

/// One walker's path: the start city followed by `k` sampled cities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimTrajectory {
    pub walker: usize,
    /// Index into `SimModel::levels`.
    pub level: usize,
    /// External node ids.
    pub cities: Vec<usize>,
}

impl SimTrajectory {
    pub fn trips(&self) -> usize {
        self.cities.len() - 1
    }
}

/// Simulates one replicate.
pub fn run_replicate(config: &SimConfig, model: &SimModel, replicate: usize) -> Result<Vec<SimTrajectory>, SimError> {
    config.validate()?;
    let mut rng = config.replicate_rng(replicate);
    let trips = Geometric::new(config.trip_p).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let mut out = Vec::with_capacity(config.walkers);
    for walker in 0..config.walkers {
        let level_idx = model.choose.sample(&mut rng);
        let level = &model.levels[level_idx];
        let mut at = level.start.sample(&mut rng);
        let k = trips.sample(&mut rng) as usize + 1;
        let mut cities = Vec::with_capacity(k + 1);
        cities.push(level.nodes[at]);
        for _ in 0..k {
            at = level.sampler.sample(at, &mut rng);
            cities.push(level.nodes[at]);
        }
        out.push(SimTrajectory {
            walker,
            level: level_idx,
            cities,
        });
    }
    Ok(out)
}

/// Runs every replicate and returns them in replicate order.
pub fn run_ensemble(config: &SimConfig, model: &SimModel) -> Result<Vec<Vec<SimTrajectory>>, SimError> {
    run_ensemble_with(config, model, |_, trajectories| Ok(trajectories))
}

/// Runs every replicate in parallel and reduces each one with `f`, keeping
/// replicate order.
pub fn run_ensemble_with<R, E>(config: &SimConfig, model: &SimModel, f: impl Fn(usize, Vec<SimTrajectory>) -> Result<R, E> + Sync) -> Result<Vec<R>, E>
where
    R: Send,
    E: Send + From<SimError>,
{
    config.validate()?;
    (0..config.replicates).into_par_iter().map(|r| f(r, run_replicate(config, model, r)?)).collect()
}

/// Writes `replicate,walker,discipline,step,city_id` rows.
pub fn write_trajectories_csv<W: Write>(
    w: &mut csv::Writer<W>,
    replicate: usize,
    trajectories: &[SimTrajectory],
    model: &SimModel,
    city_id: impl Fn(usize) -> String,
) -> csv::Result<()> {
    for t in trajectories {
        let label = &model.levels[t.level].label;
        for (step, &c) in t.cities.iter().enumerate() {
            w.write_record([replicate.to_string(), t.walker.to_string(), label.clone(), step.to_string(), city_id(c)])?;
        }
    }
    Ok(())
}

pub const TRAJECTORY_COLUMNS: [&str; 5] = ["replicate", "walker", "discipline", "step", "city_id"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{DistanceMatrix, GeoPoint};
    use crate::radiation::{single_level_kernel, Attractiveness};
    use proptest::prelude::*;

    fn config(walkers: usize, replicates: usize, trip_p: f64, seed: u64) -> SimConfig {
        SimConfig {
            walkers,
            replicates,
            trip_p,
            seed,
        }
    }

    fn half_kernel() -> RadiationKernel {
        RadiationKernel::from_rows(vec![7, 9], vec![0.5; 4]).unwrap()
    }

    fn ten_city_kernel() -> RadiationKernel {
        let pts: Vec<GeoPoint> = (0..10).map(|k| GeoPoint::new(5.0 * (k % 3) as f64, 7.0 * k as f64).unwrap()).collect();
        let d = DistanceMatrix::from_points((0..10).collect(), &pts);
        let a: Vec<f64> = (0..10).map(|k| 1.0 + (k * 37 % 11) as f64).collect();
        single_level_kernel(&Attractiveness::population(&a).unwrap(), &d).unwrap()
    }

    #[test]
    fn identity_kernel_stays_put() {
        let model = SimModel::single(&RadiationKernel::<f64>::identity(4), &[1.0]).unwrap();
        let reps = run_ensemble(&config(50, 3, 0.3, 1), &model).unwrap();
        for t in reps.iter().flatten() {
            assert!(t.cities.iter().all(|&c| c == 4));
            assert!(t.trips() >= 1);
        }
    }

    #[test]
    fn cross_move_fraction_within_binomial_bound() {
        let model = SimModel::single(&half_kernel(), &[1.0, 1.0]).unwrap();
        let reps = run_ensemble(&config(2000, 1, 1.0, 42), &model).unwrap();
        let moved = reps[0].iter().filter(|t| t.cities[0] != t.cities[1]).count() as f64;
        let sigma = (2000.0f64 * 0.25).sqrt();
        assert!((moved - 1000.0).abs() <= 3.0 * sigma, "moved = {moved}");
        assert!(reps[0].iter().all(|t| t.trips() == 1));
    }

    #[test]
    fn deterministic_across_runs_and_threads() {
        let model = SimModel::single(&ten_city_kernel(), &[1.0; 10]).unwrap();
        let cfg = config(200, 16, 0.5, 99);
        let a = run_ensemble(&cfg, &model).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_ensemble(&cfg, &model).unwrap());
        assert_eq!(a, b);
        let c = run_ensemble(&config(200, 16, 0.5, 100), &model).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn replicate_seed_is_xor() {
        let model = SimModel::single(&ten_city_kernel(), &[1.0; 10]).unwrap();
        let all = run_ensemble(&config(30, 4, 0.5, 1234), &model).unwrap();
        for (r, rep) in all.iter().enumerate() {
            assert_eq!(rep, &run_replicate(&config(30, 4, 0.5, 1234), &model, r).unwrap());
        }
    }

    #[test]
    fn trip_count_mean() {
        let model = SimModel::single(&half_kernel(), &[1.0, 1.0]).unwrap();
        let p = 0.4;
        let reps = run_ensemble(&config(20_000, 1, p, 5), &model).unwrap();
        let ks: Vec<f64> = reps[0].iter().map(|t| t.trips() as f64).collect();
        let n = ks.len() as f64;
        let mean = ks.iter().sum::<f64>() / n;
        let se = ((1.0 - p) / (p * p) / n).sqrt();
        assert!((mean - 1.0 / p).abs() < 3.0 * se, "mean = {mean}");
    }

    #[test]
    fn empirical_rows_match_kernel() {
        let kernel = ten_city_kernel();
        let sampler = RowSampler::new(&kernel, "all").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for i in 0..10 {
            let mut counts = [0u64; 10];
            for _ in 0..20_000 {
                counts[sampler.sample(i, &mut rng)] += 1;
            }
            let test = crate::stats::chi_squared_test(&counts, kernel.row(i)).unwrap();
            assert!(test.p_value > 1e-4, "row {i}: {test:?}");
        }
    }

    #[test]
    fn zero_probability_columns_never_drawn() {
        let k = RadiationKernel::from_rows(vec![0, 1, 2], vec![0.0, 1.0, 0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 1.0]).unwrap();
        let s = RowSampler::new(&k, "x").unwrap();
        assert_eq!(s.pick(0, 0.0), 1);
        assert_eq!(s.pick(0, 0.999_999), 1);
        assert_eq!(s.pick(1, 0.0), 0);
        assert_eq!(s.pick(1, 0.5), 2);
        assert_eq!(s.pick(2, 0.3), 2);
    }

    #[test]
    fn errors() {
        assert!(matches!(SimModel::single(&half_kernel(), &[0.0, 0.0]), Err(SimError::EmptyLevelSupport(_))));
        let bad = RadiationKernel::from_rows(vec![0, 1], vec![0.5, 0.4, 0.5, 0.5]).unwrap();
        assert!(matches!(SimModel::single(&bad, &[1.0, 1.0]), Err(SimError::NotStochastic { row: 0, .. })));
        let model = SimModel::single(&half_kernel(), &[1.0, 1.0]).unwrap();
        assert!(run_ensemble(&config(0, 1, 0.5, 0), &model).is_err());
        assert!(run_ensemble(&config(1, 0, 0.5, 0), &model).is_err());
        assert!(run_ensemble(&config(1, 1, 0.0, 0), &model).is_err());
        assert!(run_ensemble(&config(1, 1, 1.5, 0), &model).is_err());
    }

    #[test]
    fn walkers_stay_in_their_level() {
        let k1 = RadiationKernel::from_rows(vec![0, 1], vec![0.5; 4]).unwrap();
        let k2 = RadiationKernel::from_rows(vec![5, 6], vec![0.5; 4]).unwrap();
        let model = SimModel::new(vec![
            SimLevel::new("a", 0.3, &k1, &[1.0, 1.0]).unwrap(),
            SimLevel::new("b", 0.7, &k2, &[1.0, 0.0]).unwrap(),
        ])
        .unwrap();
        let rep = run_replicate(&config(1000, 1, 0.5, 3), &model, 0).unwrap();
        let mut in_b = 0;
        for t in &rep {
            let nodes = model.levels()[t.level].nodes();
            assert!(t.cities.iter().all(|c| nodes.contains(c)));
            if t.level == 1 {
                in_b += 1;
                assert_eq!(t.cities[0], 5);
            }
        }
        assert!((600..800).contains(&in_b));
    }

    #[test]
    fn trajectory_csv() {
        let model = SimModel::single(&half_kernel(), &[1.0, 1.0]).unwrap();
        let rep = run_replicate(&config(2, 1, 1.0, 0), &model, 0).unwrap();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TRAJECTORY_COLUMNS).unwrap();
        write_trajectories_csv(&mut w, 0, &rep, &model, |c| format!("c{c}")).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "replicate,walker,discipline,step,city_id");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0,all,0,c"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sequences_have_k_plus_one_cities_in_node_set(seed in any::<u64>(), p in 0.05f64..1.0) {
            let kernel = ten_city_kernel();
            let model = SimModel::single(&kernel, &[1.0; 10]).unwrap();
            for t in run_replicate(&config(50, 1, p, seed), &model, 0).unwrap() {
                prop_assert!(t.cities.len() >= 2);
                prop_assert!(t.cities.iter().all(|&c| c < 10));
            }
        }
    }
}
