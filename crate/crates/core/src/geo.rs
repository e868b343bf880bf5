//! Spherical geometry on a mean-radius Earth: haversine distances,
//! nearest-city (spherical Voronoi) assignment, spherical centroids and the
//! radius of gyration.

use std::cmp::Ordering;
use std::io::{Read, Write};

use thiserror::Error;

use crate::ingest::CityTable;
use crate::scalar::{from_count, Real};

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Assignments farther than this from the chosen city are flagged.
pub const FAR_ASSIGNMENT_KM: f64 = 500.0;

pub const DISTANCE_DUMP_MAGIC: [u8; 8] = *b"GEODM\0\0\x01";

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("coordinate out of range: lat={lat} lon={lon}")]
    CoordinateOutOfRange { lat: f64, lon: f64 },
    #[error("city table is empty")]
    NoCities,
    #[error("empty point set")]
    EmptyPoints,
    #[error("invalid distance matrix: {0}")]
    InvalidDistances(String),
    #[error("distance dump: {0}")]
    BadDump(String),
    #[error("distance dump I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl GeoError {
    pub fn code(&self) -> &'static str {
        match self {
            GeoError::CoordinateOutOfRange { .. } => "CoordinateOutOfRange",
            GeoError::NoCities => "NoCities",
            GeoError::EmptyPoints => "EmptyPoints",
            GeoError::InvalidDistances(_) => "InvalidDistances",
            GeoError::BadDump(_) => "BadDistanceDump",
            GeoError::Io(_) => "IoError",
        }
    }
}

/// Latitude/longitude in degrees; longitude normalized to (-180, 180].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeoPoint<T: Real = f64> {
    pub lat: T,
    pub lon: T,
}

impl<T: Real> GeoPoint<T> {
    pub fn new(lat: T, lon: T) -> Result<Self, GeoError> {
        let d90 = T::lit(90.0);
        let d180 = T::lit(180.0);
        let out_of_range = || GeoError::CoordinateOutOfRange {
            lat: lat.as_f64(),
            lon: lon.as_f64(),
        };
        if !(lat.is_finite() && lon.is_finite()) || lat.abs() > d90 || lon.abs() > d180 {
            return Err(out_of_range());
        }
        let lon = if lon == -d180 { d180 } else { lon };
        Ok(GeoPoint { lat, lon })
    }

    pub fn cast<U: Real>(self) -> GeoPoint<U> {
        GeoPoint {
            lat: U::lit(self.lat.as_f64()),
            lon: U::lit(self.lon.as_f64()),
        }
    }

    fn unit_vector(&self) -> [T; 3] {
        let (lat, lon) = (self.lat.to_radians(), self.lon.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    }

    fn from_vector(v: [T; 3]) -> Self {
        let lat = v[2].atan2((v[0] * v[0] + v[1] * v[1]).sqrt()).to_degrees();
        let lon = v[1].atan2(v[0]).to_degrees();
        let d180 = T::lit(180.0);
        GeoPoint {
            lat,
            lon: if lon <= -d180 { d180 } else { lon },
        }
    }
}

/// Haversine great-circle distance in kilometres.
pub fn great_circle_km<T: Real>(a: &GeoPoint<T>, b: &GeoPoint<T>) -> T {
    let two = T::lit(2.0);
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / two).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / two).sin().powi(2);
    two * T::lit(EARTH_RADIUS_KM) * h.sqrt().min(T::one()).asin()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    /// Index into the city table.
    pub city: usize,
    pub distance_km: f64,
}

impl Assignment {
    pub fn is_far(&self) -> bool {
        self.distance_km > FAR_ASSIGNMENT_KM
    }
}

/// Nearest city by great-circle distance; exact ties go to the smallest `city_id`.
pub fn assign_to_city(p: &GeoPoint, cities: &CityTable) -> Result<Assignment, GeoError> {
    let mut best: Option<Assignment> = None;
    for (i, city) in cities.cities.iter().enumerate() {
        let d = great_circle_km(p, &city.point);
        let better = match best {
            None => true,
            Some(b) => match d.total_cmp(&b.distance_km) {
                Ordering::Less => true,
                Ordering::Equal => city.city_id < cities.cities[b.city].city_id,
                Ordering::Greater => false,
            },
        };
        if better {
            best = Some(Assignment { city: i, distance_km: d });
        }
    }
    best.ok_or(GeoError::NoCities)
}

/// Spherical centroid: the normalized mean of unit vectors. `None` when the
/// mean vector (nearly) vanishes.
pub fn spherical_centroid<T: Real>(points: &[GeoPoint<T>]) -> Option<GeoPoint<T>> {
    if points.is_empty() {
        return None;
    }
    let mut acc = [T::zero(); 3];
    for p in points {
        let v = p.unit_vector();
        for k in 0..3 {
            acc[k] = acc[k] + v[k];
        }
    }
    let n: T = from_count(points.len());
    let mean = acc.map(|c| c / n);
    let norm = (mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]).sqrt();
    if norm < T::lit(1e-9) {
        return None;
    }
    Some(GeoPoint::from_vector(mean))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gyration<T: Real = f64> {
    pub radius_km: T,
    /// The centroid was undefined and the first point was used instead.
    pub degenerate_centroid: bool,
}

/// Root-mean-square great-circle distance of `points` from their spherical centroid.
pub fn radius_of_gyration<T: Real>(points: &[GeoPoint<T>]) -> Result<Gyration<T>, GeoError> {
    let first = points.first().ok_or(GeoError::EmptyPoints)?;
    if points.iter().all(|p| p == first) {
        return Ok(Gyration {
            radius_km: T::zero(),
            degenerate_centroid: false,
        });
    }
    let (center, degenerate_centroid) = match spherical_centroid(points) {
        Some(c) => (c, false),
        None => (*first, true),
    };
    let sum_sq: T = points.iter().map(|p| great_circle_km(p, &center).powi(2)).sum();
    let n: T = from_count(points.len());
    Ok(Gyration {
        radius_km: (sum_sq / n).sqrt(),
        degenerate_centroid,
    })
}

/// Dense symmetric matrix of great-circle distances between a set of nodes,
/// with each row's neighbours pre-sorted by ascending distance (ties by index).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T: Real = f64> {
    nodes: Vec<usize>,
    dist: Vec<T>,
    order: Vec<u32>,
}

impl<T: Real> DistanceMatrix<T> {
    /// `nodes[i]` is the external id of `points[i]`.
    pub fn from_points(nodes: Vec<usize>, points: &[GeoPoint<T>]) -> Self {
        assert_eq!(nodes.len(), points.len(), "one node id per point");
        let n = points.len();
        let mut dist = vec![T::zero(); n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = great_circle_km(&points[i], &points[j]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Self::from_raw(nodes, dist)
    }

    /// Distances between all cities of a table, node ids being table indices.
    pub fn from_table(cities: &CityTable) -> Self {
        let points: Vec<GeoPoint<T>> = cities.cities.iter().map(|c| c.point.cast()).collect();
        Self::from_points((0..points.len()).collect(), &points)
    }

    /// Matrix from explicit row-major distances, which must be finite,
    /// non-negative, symmetric and zero on the diagonal.
    pub fn from_distances(nodes: Vec<usize>, dist: Vec<T>) -> Result<Self, GeoError> {
        let n = nodes.len();
        if dist.len() != n * n {
            return Err(GeoError::InvalidDistances(format!("{} entries for {n} nodes", dist.len())));
        }
        for i in 0..n {
            if dist[i * n + i] != T::zero() {
                return Err(GeoError::InvalidDistances(format!("non-zero diagonal at {i}")));
            }
            for j in 0..n {
                let d = dist[i * n + j];
                if !(d.is_finite() && d >= T::zero()) || d != dist[j * n + i] {
                    return Err(GeoError::InvalidDistances(format!("entry ({i}, {j}) = {d}")));
                }
            }
        }
        Ok(Self::from_raw(nodes, dist))
    }

    fn from_raw(nodes: Vec<usize>, dist: Vec<T>) -> Self {
        let n = nodes.len();
        let mut order = Vec::with_capacity(n * n);
        for i in 0..n {
            let row = &dist[i * n..(i + 1) * n];
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| row[a as usize].partial_cmp(&row[b as usize]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
            order.extend(idx);
        }
        DistanceMatrix { nodes, dist, order }
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

    pub fn get(&self, i: usize, j: usize) -> T {
        self.dist[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        let n = self.len();
        &self.dist[i * n..(i + 1) * n]
    }

    /// Local indices of row `i` sorted by ascending distance from `i`.
    pub fn sorted_row(&self, i: usize) -> &[u32] {
        let n = self.len();
        &self.order[i * n..(i + 1) * n]
    }

    /// Sub-matrix over the given local indices (in the given order).
    pub fn restrict(&self, local: &[usize]) -> Self {
        let m = local.len();
        let mut dist = Vec::with_capacity(m * m);
        for &i in local {
            for &j in local {
                dist.push(self.get(i, j));
            }
        }
        let nodes = local.iter().map(|&i| self.nodes[i]).collect();
        Self::from_raw(nodes, dist)
    }

    /// Writes the matrix as `GEODM\0\0\x01`, a little-endian `u64` node
    /// count, then row-major little-endian `f64` distances. Node ids are
    /// not stored.
    pub fn write_binary(&self, mut w: impl Write) -> Result<(), GeoError> {
        w.write_all(&DISTANCE_DUMP_MAGIC)?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for d in &self.dist {
            w.write_all(&d.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a dump written by [`write_binary`](Self::write_binary); nodes are numbered `0..n`.
    pub fn read_binary(mut r: impl Read) -> Result<Self, GeoError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if magic != DISTANCE_DUMP_MAGIC {
            return Err(GeoError::BadDump("bad magic".into()));
        }
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let n = usize::try_from(u64::from_le_bytes(buf)).map_err(|_| GeoError::BadDump("node count overflow".into()))?;
        let cells = n.checked_mul(n).ok_or_else(|| GeoError::BadDump("node count overflow".into()))?;
        let mut dist = Vec::with_capacity(cells);
        for _ in 0..cells {
            r.read_exact(&mut buf).map_err(|_| GeoError::BadDump("truncated matrix".into()))?;
            dist.push(T::lit(f64::from_le_bytes(buf)));
        }
        Ok(Self::from_raw((0..n).collect(), dist))
    }
}
