//! Migration networks built from city-assigned trajectories, and the
//! network-level estimators: PageRank centrality, Heaps'-law exponents and
//! geometric fits of per-person location counts.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::geo::{assign_to_city, GeoError};
use crate::ingest::{CityTable, Discipline, FootstepKind, HistDate, Person, Trajectory, YearWindow};
use crate::scalar::{from_count, Real};

pub const MAX_PAGERANK_ITERATIONS: usize = 10_000;
pub const DEFAULT_DAMPING: f64 = 0.85;
pub const MIN_HEAPS_EVENTS: usize = 10;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("network has no edges")]
    EmptyNetwork,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("pagerank did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("heaps fit needs at least {MIN_HEAPS_EVENTS} events, got {0}")]
    TooFewEvents(usize),
    #[error("all events fall in one city; the Heaps exponent is undefined")]
    DegenerateHeaps,
    #[error("no trip counts to fit")]
    EmptySample,
    #[error("trip count {0} is below 1")]
    InvalidCount(u64),
    #[error("unknown person `{0}`")]
    UnknownPerson(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

impl NetError {
    pub fn code(&self) -> &'static str {
        match self {
            NetError::EmptyNetwork => "EmptyNetwork",
            NetError::InvalidParameter(_) => "InvalidParameter",
            NetError::NonConvergence { .. } => "NonConvergence",
            NetError::TooFewEvents(_) => "TooFewEvents",
            NetError::DegenerateHeaps => "DegenerateHeaps",
            NetError::EmptySample => "EmptySample",
            NetError::InvalidCount(_) => "InvalidCount",
            NetError::UnknownPerson(_) => "UnknownPerson",
            NetError::Geo(e) => e.code(),
        }
    }
}

// ---------------------------------------------------------------------------
// City assignment

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Visit {
    pub city: usize,
    pub date: HistDate,
    pub kind: FootstepKind,
}

/// A trajectory whose footsteps have been collapsed onto reference cities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignedTrajectory {
    pub person_id: String,
    pub discipline: Discipline,
    pub birth: HistDate,
    /// City nearest to the birth point.
    pub origin_city: usize,
    pub visits: Vec<Visit>,
}

impl AssignedTrajectory {
    pub fn cities(&self) -> Vec<usize> {
        self.visits.iter().map(|v| v.city).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarAssignment {
    pub person_id: String,
    pub place: String,
    pub city_id: String,
    pub distance_km: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AssignmentReport {
    /// Distinct cities receiving at least one footstep.
    pub distinct_cities: usize,
    pub far_assignments: Vec<FarAssignment>,
}

/// Collapses every footstep (and each birth point) onto its nearest city.
pub fn assign_trajectories(
    persons: &[Person],
    trajectories: &[Trajectory],
    cities: &CityTable,
) -> Result<(Vec<AssignedTrajectory>, AssignmentReport), NetError> {
    let by_id: HashMap<&str, &Person> = persons.iter().map(|p| (p.person_id.as_str(), p)).collect();
    let mut report = AssignmentReport::default();
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(trajectories.len());
    for t in trajectories {
        let person = by_id.get(t.person_id.as_str()).ok_or_else(|| NetError::UnknownPerson(t.person_id.clone()))?;
        let origin_city = assign_to_city(&t.origin, cities)?.city;
        let mut visits = Vec::with_capacity(t.footsteps.len());
        for f in &t.footsteps {
            let a = assign_to_city(&f.point, cities)?;
            if a.is_far() {
                report.far_assignments.push(FarAssignment {
                    person_id: t.person_id.clone(),
                    place: f.place_name.clone(),
                    city_id: cities.cities[a.city].city_id.clone(),
                    distance_km: a.distance_km,
                });
            }
            seen.insert(a.city);
            visits.push(Visit {
                city: a.city,
                date: f.date,
                kind: f.kind,
            });
        }
        out.push(AssignedTrajectory {
            person_id: t.person_id.clone(),
            discipline: person.discipline.clone(),
            birth: person.birth_date,
            origin_city,
            visits,
        });
    }
    report.distinct_cities = seen.len();
    Ok((out, report))
}

// ---------------------------------------------------------------------------
// Network

/// Weighted directed multigraph of city-to-city jumps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MigrationNetwork {
    pub window: YearWindow,
    pub discipline: Option<Discipline>,
    nodes: BTreeSet<usize>,
    edges: BTreeMap<(usize, usize), u64>,
}

impl MigrationNetwork {
    pub fn new(window: YearWindow, discipline: Option<Discipline>) -> Self {
        MigrationNetwork {
            window,
            discipline,
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
        }
    }

    pub fn add_jump(&mut self, from: usize, to: usize) {
        self.add_weighted(from, to, 1);
    }

    fn add_weighted(&mut self, from: usize, to: usize, weight: u64) {
        self.nodes.insert(from);
        self.nodes.insert(to);
        *self.edges.entry((from, to)).or_insert(0) += weight;
    }

    /// Adds every edge weight of `other` into `self`.
    pub fn merge(&mut self, other: &MigrationNetwork) {
        for (&(a, b), &w) in &other.edges {
            self.add_weighted(a, b, w);
        }
    }

    pub fn nodes(&self) -> &BTreeSet<usize> {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.edges.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    pub fn weight(&self, from: usize, to: usize) -> u64 {
        self.edges.get(&(from, to)).copied().unwrap_or(0)
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// CSV edge list `src_city,dst_city,weight,discipline,window`.
    pub fn write_csv(&self, w: impl Write, cities: &CityTable) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["src_city", "dst_city", "weight", "discipline", "window"])?;
        let disc = self.discipline.as_ref().map(|d| d.to_string()).unwrap_or_default();
        let window = self.window.to_string();
        for (a, b, weight) in self.edges() {
            wtr.write_record([
                cities.cities[a].city_id.as_str(),
                cities.cities[b].city_id.as_str(),
                &weight.to_string(),
                &disc,
                &window,
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// One edge per consecutive visit pair whose destination is dated inside
/// `window`; `discipline` restricts to persons of that discipline.
pub fn build_network(trajectories: &[AssignedTrajectory], window: YearWindow, discipline: Option<&Discipline>) -> MigrationNetwork {
    let mut net = MigrationNetwork::new(window, discipline.cloned());
    for t in trajectories {
        if discipline.is_some_and(|d| *d != t.discipline) {
            continue;
        }
        for pair in t.visits.windows(2) {
            if window.contains(pair[1].date.year) {
                net.add_jump(pair[0].city, pair[1].city);
            }
        }
    }
    net
}

// ---------------------------------------------------------------------------
// PageRank

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centrality<T: Real = f64> {
    pub city: usize,
    pub score: T,
    /// 1-based, by descending score (ties by city index).
    pub rank: usize,
}

/// Weighted PageRank by power iteration. Dangling nodes spread their mass
/// uniformly; iteration stops once the L1 change drops below `tol`.
pub fn pagerank<T: Real>(net: &MigrationNetwork, damping: T, tol: T) -> Result<Vec<Centrality<T>>, NetError> {
    pagerank_with_limit(net, damping, tol, MAX_PAGERANK_ITERATIONS)
}

/// [`pagerank`] with an explicit iteration cap.
pub fn pagerank_with_limit<T: Real>(net: &MigrationNetwork, damping: T, tol: T, max_iterations: usize) -> Result<Vec<Centrality<T>>, NetError> {
    if net.is_empty() {
        return Err(NetError::EmptyNetwork);
    }
    if !(damping > T::zero() && damping < T::one()) {
        return Err(NetError::InvalidParameter(format!("damping {damping} not in (0,1)")));
    }
    if !(tol > T::zero()) {
        return Err(NetError::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let nodes: Vec<usize> = net.nodes().iter().copied().collect();
    let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let n = nodes.len();
    let mut out_weight = vec![T::zero(); n];
    for (a, _, w) in net.edges() {
        out_weight[local[&a]] = out_weight[local[&a]] + from_count::<T>(w as usize);
    }
    let links: Vec<(usize, usize, T)> = net
        .edges()
        .map(|(a, b, w)| {
            let (i, j) = (local[&a], local[&b]);
            (i, j, from_count::<T>(w as usize) / out_weight[i])
        })
        .collect();

    let nf: T = from_count(n);
    let teleport = (T::one() - damping) / nf;
    let mut x = vec![T::one() / nf; n];
    let mut next = vec![T::zero(); n];
    let mut residual = T::infinity();
    for _ in 0..max_iterations {
        let dangling: T = x.iter().zip(&out_weight).filter(|(_, w)| **w == T::zero()).map(|(v, _)| *v).sum();
        let base = teleport + damping * dangling / nf;
        next.iter_mut().for_each(|v| *v = base);
        for &(i, j, p) in &links {
            next[j] = next[j] + damping * x[i] * p;
        }
        residual = x.iter().zip(&next).map(|(a, b)| (*a - *b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if residual < tol {
            let mut ranked: Vec<Centrality<T>> = nodes.iter().zip(&x).map(|(&city, &score)| Centrality { city, score, rank: 0 }).collect();
            ranked.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap().then(a.city.cmp(&b.city)));
            for (k, c) in ranked.iter_mut().enumerate() {
                c.rank = k + 1;
            }
            return Ok(ranked);
        }
    }
    Err(NetError::NonConvergence {
        iterations: max_iterations,
        residual: residual.as_f64(),
    })
}

/// CSV `city,score,rank,window`.
pub fn write_pagerank_csv<T: Real>(w: impl Write, scores: &[Centrality<T>], cities: &CityTable, window: YearWindow) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["city", "score", "rank", "window"])?;
    let window = window.to_string();
    for c in scores {
        wtr.write_record([cities.cities[c.city].city_id.as_str(), &c.score.to_string(), &c.rank.to_string(), &window])?;
    }
    wtr.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Heaps' law

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeapsFit<T: Real + Serialize = f64> {
    pub kind: FootstepKind,
    pub alpha: T,
    pub std_error: T,
    /// `(N(t), S(t))` after each event.
    pub samples: Vec<(usize, usize)>,
}

/// Date-ordered city stream for one kind of event. Birth events use each
/// person's origin city and birth date, so they exist even when the birth
/// footstep lies outside the analysed window.
pub fn heaps_events(trajectories: &[AssignedTrajectory], kind: FootstepKind) -> Vec<usize> {
    let mut events: Vec<((i32, u8, u8), usize)> = Vec::new();
    for t in trajectories {
        match kind {
            FootstepKind::Birth => events.push((t.birth.sort_key(), t.origin_city)),
            _ => events.extend(t.visits.iter().filter(|v| v.kind == kind).map(|v| (v.date.sort_key(), v.city))),
        }
    }
    events.sort_by_key(|(date, _)| *date);
    events.into_iter().map(|(_, c)| c).collect()
}

/// Fits `S = N^alpha` by least squares in log-log space with zero intercept.
pub fn heaps_fit<T: Real + Serialize>(kind: FootstepKind, events: &[usize]) -> Result<HeapsFit<T>, NetError> {
    if events.len() < MIN_HEAPS_EVENTS {
        return Err(NetError::TooFewEvents(events.len()));
    }
    let mut seen = HashSet::new();
    let samples: Vec<(usize, usize)> = events
        .iter()
        .enumerate()
        .map(|(t, c)| {
            seen.insert(*c);
            (t + 1, seen.len())
        })
        .collect();
    if seen.len() < 2 {
        return Err(NetError::DegenerateHeaps);
    }
    let logs: Vec<(T, T)> = samples.iter().map(|&(n, s)| (from_count::<T>(n).ln(), from_count::<T>(s).ln())).collect();
    let sxx: T = logs.iter().map(|(x, _)| *x * *x).sum();
    let sxy: T = logs.iter().map(|(x, y)| *x * *y).sum();
    let alpha = sxy / sxx;
    let rss: T = logs.iter().map(|(x, y)| (*y - alpha * *x).powi(2)).sum();
    let dof: T = from_count(logs.len() - 1);
    let std_error = (rss / dof / sxx).sqrt();
    Ok(HeapsFit {
        kind,
        alpha,
        std_error,
        samples,
    })
}

// ---------------------------------------------------------------------------
// Geometric fit

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometricFit<T: Real + Serialize = f64> {
    /// Success probability on support `{1, 2, ...}`.
    pub p: T,
    pub sample_size: usize,
}

/// Maximum-likelihood geometric parameter, `p = 1 / mean`.
pub fn fit_geometric<T: Real + Serialize>(counts: &[u64]) -> Result<GeometricFit<T>, NetError> {
    if counts.is_empty() {
        return Err(NetError::EmptySample);
    }
    if let Some(&bad) = counts.iter().find(|&&k| k < 1) {
        return Err(NetError::InvalidCount(bad));
    }
    let total: u64 = counts.iter().sum();
    Ok(GeometricFit {
        p: from_count::<T>(counts.len()) / T::lit(total as f64),
        sample_size: counts.len(),
    })
}

/// Number of distinct cities each person visited, skipping persons with none.
pub fn distinct_city_counts(trajectories: &[AssignedTrajectory]) -> Vec<u64> {
    trajectories
        .iter()
        .map(|t| t.visits.iter().map(|v| v.city).collect::<HashSet<_>>().len() as u64)
        .filter(|&k| k > 0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn window() -> YearWindow {
        YearWindow::new(1900, 1950).unwrap()
    }

    fn traj(disc: &str, cities: &[usize]) -> AssignedTrajectory {
        AssignedTrajectory {
            person_id: format!("p{cities:?}"),
            discipline: crate::ingest::DisciplineSet::standard().resolve(disc).unwrap(),
            birth: HistDate::year(1890),
            origin_city: cities[0],
            visits: cities
                .iter()
                .enumerate()
                .map(|(k, &c)| Visit {
                    city: c,
                    date: HistDate::year(1900 + k as i32),
                    kind: FootstepKind::InLife,
                })
                .collect(),
        }
    }

    #[test]
    fn chain_and_self_loop() {
        let net = build_network(&[traj("Arts", &[0, 1, 2])], window(), None);
        assert_eq!(net.weight(0, 1), 1);
        assert_eq!(net.weight(1, 2), 1);
        assert_eq!(net.total_weight(), 2);
        let net = build_network(&[traj("Arts", &[4, 4])], window(), None);
        assert_eq!(net.weight(4, 4), 1);
    }

    #[test]
    fn window_uses_destination_date() {
        // Visits dated 1900, 1901, 1902.
        let t = traj("Arts", &[0, 1, 2]);
        let net = build_network(&[t], YearWindow::new(1901, 1901).unwrap(), None);
        assert_eq!(net.total_weight(), 1);
        assert_eq!(net.weight(0, 1), 1);
    }

    #[test]
    fn discipline_filter() {
        let trajs = [traj("Arts", &[0, 1]), traj("Sports", &[2, 3])];
        let arts = crate::ingest::DisciplineSet::standard().resolve("Arts").unwrap();
        let net = build_network(&trajs, window(), Some(&arts));
        assert_eq!(net.total_weight(), 1);
        assert_eq!(net.weight(0, 1), 1);
        assert_eq!(net.nodes().len(), 2);
    }

    #[test]
    fn pagerank_cycle_and_star() {
        let net = build_network(&[traj("Arts", &[0, 1, 2, 0])], window(), None);
        let pr = pagerank::<f64>(&net, 0.85, 1e-12).unwrap();
        for c in &pr {
            assert!((c.score - 1.0 / 3.0).abs() < 1e-9);
        }
        let star: Vec<_> = (1..6).map(|k| traj("Arts", &[k, 0])).collect();
        let pr = pagerank::<f64>(&build_network(&star, window(), None), 0.85, 1e-12).unwrap();
        assert_eq!(pr[0].city, 0);
        assert_eq!(pr[0].rank, 1);
        assert!(pr[0].score > pr[1].score);
        let total: f64 = pr.iter().map(|c| c.score).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pagerank_errors() {
        let empty = MigrationNetwork::new(window(), None);
        assert!(matches!(pagerank::<f64>(&empty, 0.85, 1e-9), Err(NetError::EmptyNetwork)));
        let net = build_network(&[traj("Arts", &[0, 1])], window(), None);
        assert!(matches!(pagerank::<f64>(&net, 1.0, 1e-9), Err(NetError::InvalidParameter(_))));
        assert!(matches!(pagerank::<f64>(&net, 0.85, 0.0), Err(NetError::InvalidParameter(_))));
        let star = build_network(&[traj("Arts", &[0, 1, 0, 2, 0, 3, 3])], window(), None);
        assert!(matches!(
            pagerank_with_limit::<f64>(&star, 0.85, 1e-12, 3),
            Err(NetError::NonConvergence { iterations: 3, .. })
        ));
        assert!(pagerank_with_limit::<f32>(&star, 0.85, 1e-6, MAX_PAGERANK_ITERATIONS).is_ok());
    }

    #[test]
    fn heaps_all_new_is_one() {
        let events: Vec<usize> = (0..50).collect();
        let fit = heaps_fit::<f64>(FootstepKind::InLife, &events).unwrap();
        assert_eq!(fit.alpha, 1.0);
        assert!(fit.samples.iter().all(|&(n, s)| n == s));
    }

    /// Stream where a new city appears exactly when round(N^alpha) grows.
    fn power_law_stream(alpha: f64, len: usize) -> Vec<usize> {
        let mut events = Vec::with_capacity(len);
        let mut distinct = 0usize;
        for t in 1..=len {
            let target = (t as f64).powf(alpha).round() as usize;
            if target > distinct {
                events.push(distinct);
                distinct += 1;
            } else {
                events.push(t % distinct);
            }
        }
        events
    }

    #[test]
    fn heaps_recovers_exponent() {
        for len in [200, 2_000, 20_000] {
            let fit = heaps_fit::<f64>(FootstepKind::Death, &power_law_stream(0.85, len)).unwrap();
            assert!((fit.alpha - 0.85).abs() <= 0.02, "len {len}: alpha {}", fit.alpha);
            assert!(fit.samples.windows(2).all(|w| w[0].1 <= w[1].1));
            assert!(fit.samples.iter().all(|&(n, s)| s <= n));
        }
    }

    #[test]
    fn heaps_errors() {
        assert!(matches!(heaps_fit::<f64>(FootstepKind::Birth, &[1; 5]), Err(NetError::TooFewEvents(5))));
        assert!(matches!(heaps_fit::<f64>(FootstepKind::Birth, &[7; 20]), Err(NetError::DegenerateHeaps)));
    }

    #[test]
    fn geometric_fit() {
        assert_eq!(fit_geometric::<f64>(&[1, 1, 1]).unwrap().p, 1.0);
        assert!(matches!(fit_geometric::<f64>(&[]), Err(NetError::EmptySample)));
        assert!(matches!(fit_geometric::<f64>(&[2, 0]), Err(NetError::InvalidCount(0))));

        // Inverse-CDF sampling of Geom(0.5) on {1,2,...}; 2,000 draws put the
        // MLE inside [0.47, 0.53] with probability > 0.99 (delta-method sd ~0.011).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let counts: Vec<u64> = (0..2_000)
            .map(|_| {
                let u: f64 = rng.random();
                ((1.0 - u).ln() / 0.5f64.ln()).floor() as u64 + 1
            })
            .collect();
        let p = fit_geometric::<f64>(&counts).unwrap().p;
        assert!((0.47..=0.53).contains(&p), "{p}");
    }

    #[test]
    fn birth_events_use_origin() {
        let mut t = traj("Arts", &[3, 4]);
        t.origin_city = 9;
        assert_eq!(heaps_events(&[t.clone()], FootstepKind::Birth), vec![9]);
        assert_eq!(heaps_events(&[t], FootstepKind::InLife), vec![3, 4]);
    }

    proptest! {
        #[test]
        fn network_additive(a in prop::collection::vec(prop::collection::vec(0usize..6, 1..6), 0..8),
                            b in prop::collection::vec(prop::collection::vec(0usize..6, 1..6), 0..8)) {
            let ta: Vec<_> = a.iter().map(|c| traj("Arts", c)).collect();
            let tb: Vec<_> = b.iter().map(|c| traj("Arts", c)).collect();
            let mut merged = build_network(&ta, window(), None);
            merged.merge(&build_network(&tb, window(), None));
            let all: Vec<_> = ta.iter().chain(&tb).cloned().collect();
            prop_assert_eq!(merged, build_network(&all, window(), None));
        }

        #[test]
        fn pagerank_sums_to_one_and_scale_free(paths in prop::collection::vec(prop::collection::vec(0usize..8, 2..6), 1..10), scale in 2usize..5) {
            let ts: Vec<_> = paths.iter().map(|c| traj("Arts", c)).collect();
            let net = build_network(&ts, window(), None);
            let pr = pagerank::<f64>(&net, 0.85, 1e-12).unwrap();
            let total: f64 = pr.iter().map(|c| c.score).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);

            let scaled: Vec<_> = ts.iter().cycle().take(ts.len() * scale).cloned().collect();
            let pr2 = pagerank::<f64>(&build_network(&scaled, window(), None), 0.85, 1e-12).unwrap();
            for (x, y) in pr.iter().zip(&pr2) {
                prop_assert!((x.score - y.score).abs() < 1e-9);
            }
        }

        #[test]
        fn heaps_relabel_invariant(events in prop::collection::vec(0usize..20, 10..60), shift in 1usize..100) {
            prop_assume!(events.iter().collect::<HashSet<_>>().len() >= 2);
            let relabeled: Vec<usize> = events.iter().map(|c| (c * 7 + shift) % 1000).collect();
            let a = heaps_fit::<f64>(FootstepKind::InLife, &events).unwrap();
            let b = heaps_fit::<f64>(FootstepKind::InLife, &relabeled).unwrap();
            prop_assert_eq!(a.alpha, b.alpha);
        }
    }
}
