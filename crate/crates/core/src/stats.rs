//! Mobility distributions and the metrics used to compare simulated and
//! observed ones.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::geo::{great_circle_km, radius_of_gyration, GeoPoint};

/// Longest great-circle distance, rounded up.
pub const MAX_DISTANCE_KM: f64 = 20_100.0;
pub const DEFAULT_KM_BINS: usize = 100;
pub const DEFAULT_MAX_DESTINATIONS: u32 = 30;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("bin edges differ between the compared distributions")]
    MismatchedEdges,
    #[error("invalid binning: {0}")]
    InvalidBins(String),
    #[error("no samples to bin")]
    EmptySample,
    #[error("need at least 3 bins, got {0}")]
    TooFewBins(usize),
    #[error("observed densities have zero variance")]
    ZeroVariance,
    #[error("{0} counts for {1} probabilities")]
    DimensionMismatch(usize, usize),
    #[error("unknown statistic `{0}`")]
    UnknownStatistic(String),
}

impl StatsError {
    pub fn code(&self) -> &'static str {
        match self {
            StatsError::MismatchedEdges => "MismatchedEdges",
            StatsError::InvalidBins(_) => "InvalidBins",
            StatsError::EmptySample => "EmptySample",
            StatsError::TooFewBins(_) => "TooFewBins",
            StatsError::ZeroVariance => "ZeroVariance",
            StatsError::DimensionMismatch(..) => "DimensionMismatch",
            StatsError::UnknownStatistic(_) => "UnknownStatistic",
        }
    }
}

// ---------------------------------------------------------------------------
// Binning

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BinSpec {
    Uniform {
        lo: f64,
        hi: f64,
        bins: usize,
    },
    LogUniform {
        lo: f64,
        hi: f64,
        bins: usize,
    },
    /// One bin per integer in `1..=max`.
    Integer {
        max: u32,
    },
}

impl BinSpec {
    pub fn km() -> Self {
        BinSpec::Uniform {
            lo: 0.0,
            hi: MAX_DISTANCE_KM,
            bins: DEFAULT_KM_BINS,
        }
    }

    pub fn edges(&self) -> Result<Vec<f64>, StatsError> {
        let edges: Vec<f64> = match *self {
            BinSpec::Uniform { lo, hi, bins } => {
                if bins == 0 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(StatsError::InvalidBins(format!("uniform [{lo}, {hi}] with {bins} bins")));
                }
                let w = (hi - lo) / bins as f64;
                (0..=bins).map(|k| if k == bins { hi } else { lo + w * k as f64 }).collect()
            }
            BinSpec::LogUniform { lo, hi, bins } => {
                if bins == 0 || !(lo > 0.0 && lo < hi) || !hi.is_finite() {
                    return Err(StatsError::InvalidBins(format!("log-uniform [{lo}, {hi}] with {bins} bins")));
                }
                let (a, b) = (lo.ln(), hi.ln());
                (0..=bins)
                    .map(|k| match k {
                        0 => lo,
                        k if k == bins => hi,
                        k => (a + (b - a) * k as f64 / bins as f64).exp(),
                    })
                    .collect()
            }
            BinSpec::Integer { max } => {
                if max == 0 {
                    return Err(StatsError::InvalidBins("integer bins need max >= 1".into()));
                }
                (0..=max).map(|k| k as f64 + 0.5).collect()
            }
        };
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(StatsError::InvalidBins("edges are not strictly increasing".into()));
        }
        Ok(edges)
    }
}

/// Histogram normalized as a density: `sum(density * width) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedDistribution {
    edges: Vec<f64>,
    density: Vec<f64>,
    samples: usize,
}

impl BinnedDistribution {
    /// Bins `samples`; values outside the edges land in the first or last bin.
    pub fn from_samples(spec: &BinSpec, samples: &[f64]) -> Result<Self, StatsError> {
        let edges = spec.edges()?;
        if samples.is_empty() {
            return Err(StatsError::EmptySample);
        }
        let k = edges.len() - 1;
        let mut counts = vec![0u64; k];
        for &x in samples {
            let bin = edges[1..k].partition_point(|&e| e <= x);
            counts[bin] += 1;
        }
        Ok(Self::from_counts(edges, &counts))
    }

    fn from_counts(edges: Vec<f64>, counts: &[u64]) -> Self {
        let total: u64 = counts.iter().sum();
        let density = counts
            .iter()
            .zip(edges.windows(2))
            .map(|(&c, w)| c as f64 / total as f64 / (w[1] - w[0]))
            .collect();
        BinnedDistribution {
            edges,
            density,
            samples: total as usize,
        }
    }

    /// Distribution with the given bin masses (rescaled to sum to one) on `spec`.
    pub fn from_masses(spec: &BinSpec, masses: &[f64], samples: usize) -> Result<Self, StatsError> {
        let edges = spec.edges()?;
        if masses.len() + 1 != edges.len() {
            return Err(StatsError::DimensionMismatch(masses.len(), edges.len() - 1));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || masses.iter().any(|&m| m < 0.0) {
            return Err(StatsError::EmptySample);
        }
        let density = masses.iter().zip(edges.windows(2)).map(|(m, w)| m / total / (w[1] - w[0])).collect();
        Ok(BinnedDistribution { edges, density, samples })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.density.iter().zip(self.edges.windows(2)).map(|(d, w)| d * (w[1] - w[0])).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Writes `bin_left,bin_right,density`.
    pub fn write_csv(&self, w: impl Write) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["bin_left", "bin_right", "density"])?;
        for (e, d) in self.edges.windows(2).zip(&self.density) {
            out.write_record([e[0].to_string(), e[1].to_string(), d.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Mobility statistics

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    RadiusOfGyration,
    DifferentDestinations,
    JumpLength,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Statistic::RadiusOfGyration, Statistic::DifferentDestinations, Statistic::JumpLength];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::RadiusOfGyration => "radius_of_gyration",
            Statistic::DifferentDestinations => "different_destinations",
            Statistic::JumpLength => "jump_length",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Statistic::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| StatsError::UnknownStatistic(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Binning {
    pub radius: BinSpec,
    pub destinations: BinSpec,
    pub jumps: BinSpec,
}

impl Default for Binning {
    fn default() -> Self {
        Binning {
            radius: BinSpec::km(),
            destinations: BinSpec::Integer { max: DEFAULT_MAX_DESTINATIONS },
            jumps: BinSpec::km(),
        }
    }
}

impl Binning {
    pub fn spec(&self, stat: Statistic) -> &BinSpec {
        match stat {
            Statistic::RadiusOfGyration => &self.radius,
            Statistic::DifferentDestinations => &self.destinations,
            Statistic::JumpLength => &self.jumps,
        }
    }
}

/// Raw per-person samples of the three statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MobilitySamples {
    pub radius_km: Vec<f64>,
    pub destinations: Vec<f64>,
    pub jumps_km: Vec<f64>,
}

impl MobilitySamples {
    /// Samples from city sequences; `points[c]` locates city `c`. Empty
    /// sequences are skipped.
    pub fn from_sequences<'a>(sequences: impl IntoIterator<Item = &'a [usize]>, points: &[GeoPoint]) -> Self {
        let mut out = MobilitySamples::default();
        for seq in sequences {
            if seq.is_empty() {
                continue;
            }
            let pts: Vec<GeoPoint> = seq.iter().map(|&c| points[c]).collect();
            let g = radius_of_gyration(&pts).expect("sequence is non-empty");
            out.radius_km.push(g.radius_km);
            let mut distinct = seq.to_vec();
            distinct.sort_unstable();
            distinct.dedup();
            out.destinations.push(distinct.len() as f64);
            for w in seq.windows(2).filter(|w| w[0] != w[1]) {
                out.jumps_km.push(great_circle_km(&points[w[0]], &points[w[1]]));
            }
        }
        out
    }

    pub fn get(&self, stat: Statistic) -> &[f64] {
        match stat {
            Statistic::RadiusOfGyration => &self.radius_km,
            Statistic::DifferentDestinations => &self.destinations,
            Statistic::JumpLength => &self.jumps_km,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distributions {
    pub radius: BinnedDistribution,
    pub destinations: BinnedDistribution,
    pub jumps: BinnedDistribution,
}

impl Distributions {
    pub fn get(&self, stat: Statistic) -> &BinnedDistribution {
        match stat {
            Statistic::RadiusOfGyration => &self.radius,
            Statistic::DifferentDestinations => &self.destinations,
            Statistic::JumpLength => &self.jumps,
        }
    }
}

/// Bins the three statistics. A set without any jump gets a point mass at
/// zero jump length so that comparisons stay defined.
pub fn distributions(samples: &MobilitySamples, binning: &Binning) -> Result<Distributions, StatsError> {
    let jumps = if samples.jumps_km.is_empty() { &[0.0][..] } else { &samples.jumps_km[..] };
    Ok(Distributions {
        radius: BinnedDistribution::from_samples(&binning.radius, &samples.radius_km)?,
        destinations: BinnedDistribution::from_samples(&binning.destinations, &samples.destinations)?,
        jumps: BinnedDistribution::from_samples(&binning.jumps, jumps)?,
    })
}

// ---------------------------------------------------------------------------
// Metrics

fn same_edges(p: &BinnedDistribution, q: &BinnedDistribution) -> Result<(), StatsError> {
    if p.edges == q.edges {
        Ok(())
    } else {
        Err(StatsError::MismatchedEdges)
    }
}

/// `sum p ln(p / q)` over probability vectors after adding `eps` to every
/// entry and renormalizing.
pub fn kl_masses(p: &[f64], q: &[f64], eps: f64) -> f64 {
    let k = p.len() as f64;
    let (zp, zq) = (p.iter().sum::<f64>() + k * eps, q.iter().sum::<f64>() + k * eps);
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            let (a, b) = ((a + eps) / zp, (b + eps) / zq);
            if a > 0.0 {
                a * (a / b).ln()
            } else {
                0.0
            }
        })
        .sum::<f64>()
        .max(0.0)
}

/// Kullback-Leibler divergence in nats, smoothed with
/// `eps = 1 / (10 * (n_P + n_Q))`.
pub fn kl_divergence(p: &BinnedDistribution, q: &BinnedDistribution) -> Result<f64, StatsError> {
    same_edges(p, q)?;
    let eps = 1.0 / (10.0 * (p.samples + q.samples).max(1) as f64);
    Ok(kl_masses(&p.masses(), &q.masses(), eps))
}

/// First Wasserstein distance between the histograms, with bin mass placed
/// at bin centers.
pub fn wasserstein1(p: &BinnedDistribution, q: &BinnedDistribution) -> Result<f64, StatsError> {
    same_edges(p, q)?;
    let (mp, mq, centers) = (p.masses(), q.masses(), p.centers());
    let (mut cp, mut cq, mut total) = (0.0, 0.0, 0.0);
    for k in 0..mp.len().saturating_sub(1) {
        cp += mp[k];
        cq += mq[k];
        total += (cp - cq).abs() * (centers[k + 1] - centers[k]);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitMetrics {
    pub r2: f64,
    pub adj_r2: f64,
    pub pearson: f64,
    /// Two-sided p-value of the Pearson correlation.
    pub p_value: f64,
}

/// Goodness of fit of model densities to data densities. The model has no
/// fitted parameters, so the adjusted and plain R^2 coincide.
pub fn fit_metrics(model: &BinnedDistribution, data: &BinnedDistribution) -> Result<FitMetrics, StatsError> {
    same_edges(model, data)?;
    let n = data.bins();
    if n < 3 {
        return Err(StatsError::TooFewBins(n));
    }
    let (x, y) = (model.density(), data.density());
    let nf = n as f64;
    let (mx, my) = (x.iter().sum::<f64>() / nf, y.iter().sum::<f64>() / nf);
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if ss_tot <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - a).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    let params = 0.0;
    let adj_r2 = 1.0 - (1.0 - r2) * (nf - 1.0) / (nf - params - 1.0);

    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let (pearson, p_value) = if sxx <= 0.0 {
        (0.0, 1.0)
    } else {
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let r = (sxy / (sxx * ss_tot).sqrt()).clamp(-1.0, 1.0);
        (r, pearson_p_value(r, n))
    };
    Ok(FitMetrics { r2, adj_r2, pearson, p_value })
}

fn pearson_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if 1.0 - r * r <= 0.0 {
        return 0.0;
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquaredTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson goodness-of-fit of `counts` against `probs`. Cells expecting fewer
/// than five observations are pooled; cells with zero probability must be
/// empty, otherwise the p-value is zero.
pub fn chi_squared_test<T: crate::scalar::Real>(counts: &[u64], probs: &[T]) -> Result<ChiSquaredTest, StatsError> {
    if counts.len() != probs.len() {
        return Err(StatsError::DimensionMismatch(counts.len(), probs.len()));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    let n = n as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (&c, p) in counts.iter().zip(probs) {
        let e = p.as_f64() * n;
        if e <= 0.0 {
            if c > 0 {
                return Ok(ChiSquaredTest {
                    statistic: f64::INFINITY,
                    df: 0,
                    p_value: 0.0,
                });
            }
        } else if e < 5.0 {
            pooled_obs += c as f64;
            pooled_exp += e;
        } else {
            cells.push((c as f64, e));
        }
    }
    if pooled_exp > 0.0 {
        cells.push((pooled_obs, pooled_exp));
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = cells.len().saturating_sub(1);
    let p_value = if df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64).expect("df >= 1").sf(statistic)
    };
    Ok(ChiSquaredTest { statistic, df, p_value })
}

/// Metrics of one simulated replicate against the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicateMetrics {
    pub adj_r2: f64,
    pub pearson: f64,
    pub p_value: f64,
    pub kl: f64,
    pub wasserstein: f64,
}

pub fn compare(model: &BinnedDistribution, data: &BinnedDistribution) -> Result<ReplicateMetrics, StatsError> {
    let fit = fit_metrics(model, data)?;
    Ok(ReplicateMetrics {
        adj_r2: fit.adj_r2,
        pearson: fit.pearson,
        p_value: fit.p_value,
        kl: kl_divergence(model, data)?,
        wasserstein: wasserstein1(model, data)?,
    })
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// One row of a comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub statistic: String,
    pub model: String,
    pub adj_r2: f64,
    pub adj_r2_se: f64,
    pub pearson: f64,
    pub p_value: f64,
    pub kl: f64,
    pub kl_se: f64,
    pub wasserstein: f64,
    pub wasserstein_se: f64,
}

impl MetricRecord {
    /// Averages per-replicate metrics; `pearson` and `p_value` are plain means.
    pub fn aggregate(statistic: Statistic, model: &str, replicates: &[ReplicateMetrics]) -> Self {
        let col = |f: fn(&ReplicateMetrics) -> f64| mean_se(&replicates.iter().map(f).collect::<Vec<_>>());
        let (adj_r2, adj_r2_se) = col(|m| m.adj_r2);
        let (kl, kl_se) = col(|m| m.kl);
        let (wasserstein, wasserstein_se) = col(|m| m.wasserstein);
        MetricRecord {
            statistic: statistic.name().to_string(),
            model: model.to_string(),
            adj_r2,
            adj_r2_se,
            pearson: col(|m| m.pearson).0,
            p_value: col(|m| m.p_value).0,
            kl,
            kl_se,
            wasserstein,
            wasserstein_se,
        }
    }
}

pub const SUMMARY_COLUMNS: [&str; 10] = [
    "model",
    "statistic",
    "adj_r2",
    "adj_r2_se",
    "pearson",
    "p_value",
    "kl",
    "kl_se",
    "wasserstein",
    "wasserstein_se",
];

/// Writes records as a CSV table, one row per (model, statistic).
pub fn write_summary_csv(w: impl Write, records: &[MetricRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_COLUMNS)?;
    for r in records {
        out.write_record([
            r.model.clone(),
            r.statistic.clone(),
            r.adj_r2.to_string(),
            r.adj_r2_se.to_string(),
            r.pearson.to_string(),
            r.p_value.to_string(),
            r.kl.to_string(),
            r.kl_se.to_string(),
            r.wasserstein.to_string(),
            r.wasserstein_se.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
