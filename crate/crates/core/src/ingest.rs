//! Parsing of person metadata, movement records and city tables, plus the
//! activity / time-window filter applied before any network is built.
//!
//! Parsers never drop records silently: every input record ends up either in
//! [`Parsed::accepted`] or as a [`Rejection`] carrying its line number and a
//! machine-readable reason.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("malformed JSON input: {0}")]
    Json(#[from] serde_json::Error),
    #[error("JSON input must be an array of objects")]
    JsonShape,
    #[error("CSV read failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown input format `{0}` (expected csv or json)")]
    UnknownFormat(String),
    #[error("invalid year window `{0}`")]
    BadWindow(String),
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::MissingColumn(_) => "MissingColumn",
            IngestError::Json(_) | IngestError::JsonShape => "MalformedJson",
            IngestError::Csv(_) => "MalformedCsv",
            IngestError::Io(_) => "IoError",
            IngestError::UnknownFormat(_) => "UnknownFormat",
            IngestError::BadWindow(_) => "BadWindow",
        }
    }
}

/// Why a single record was not accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    MalformedRecord,
    MissingField,
    MissingCoordinates,
    CoordinateOutOfRange,
    InvalidDate,
    DeathBeforeBirth,
    UnknownDiscipline,
    DuplicateId,
    NonPositivePopulation,
    DuplicateCoordinates,
    MissingPredicate,
    InconsistentKind,
    UnknownPerson,
    DuplicateBirth,
    DuplicateDeath,
    BeforeBirth,
    AfterDeath,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line for CSV input (header is line 1), 1-based record index for JSON.
    pub line: usize,
    pub reason: RejectReason,
    pub detail: String,
}

/// Outcome of parsing one stream.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub accepted: Vec<T>,
    /// Source line of each accepted record, parallel to `accepted`.
    pub lines: Vec<usize>,
    pub rejections: Vec<Rejection>,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Parsed {
            accepted: Vec::new(),
            lines: Vec::new(),
            rejections: Vec::new(),
        }
    }
}

impl<T> Parsed<T> {
    pub fn total(&self) -> usize {
        self.accepted.len() + self.rejections.len()
    }

    fn push(&mut self, line: usize, result: Result<T, (RejectReason, String)>) {
        match result {
            Ok(v) => {
                self.accepted.push(v);
                self.lines.push(line);
            }
            Err((reason, detail)) => self.rejections.push(Rejection { line, reason, detail }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Picks the format from a file extension; anything but `.json` is CSV.
    pub fn from_path(path: &std::path::Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(IngestError::UnknownFormat(s.to_string())),
        }
    }
}

// ---------------------------------------------------------------------------
// Dates and windows

/// Calendar date at year resolution with optional month and day
/// (`0` marks an unknown component).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HistDate {
    pub year: i32,
    pub month: u8,
    pub day: u8,
}

impl HistDate {
    pub fn year(year: i32) -> Self {
        HistDate { year, month: 0, day: 0 }
    }

    /// Validates month/day (`0` allowed for unknown; unknown month forces unknown day).
    pub fn new(year: i32, month: u8, day: u8) -> Option<Self> {
        if month > 12 || (month == 0 && day != 0) {
            return None;
        }
        if day > 0 && day > days_in_month(year, month) {
            return None;
        }
        Some(HistDate { year, month, day })
    }

    /// Parses the compact `YYYYMMDD` form used by movement records.
    pub fn parse_compact(s: &str) -> Option<Self> {
        let s = s.trim();
        if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let year: i32 = s[0..4].parse().ok()?;
        let month: u8 = s[4..6].parse().ok()?;
        let day: u8 = s[6..8].parse().ok()?;
        if !(1..=2100).contains(&year) {
            return None;
        }
        HistDate::new(year, month, day)
    }

    /// Parses a person date: `YYYYMMDD`, `YYYY-MM-DD`, or a bare (possibly negative) year.
    pub fn parse_flexible(s: &str) -> Option<Self> {
        let s = s.trim();
        if s.is_empty() {
            return None;
        }
        if s.len() == 8 && s.bytes().all(|b| b.is_ascii_digit()) {
            let year: i32 = s[0..4].parse().ok()?;
            return HistDate::new(year, s[4..6].parse().ok()?, s[6..8].parse().ok()?);
        }
        let (sign, body) = match s.strip_prefix('-') {
            Some(rest) => (-1, rest),
            None => (1, s),
        };
        let parts: Vec<&str> = body.split('-').collect();
        match parts.as_slice() {
            [y] => Some(HistDate::year(sign * y.parse::<i32>().ok()?)),
            [y, m, d] => HistDate::new(sign * y.parse::<i32>().ok()?, m.parse().ok()?, d.parse().ok()?),
            _ => None,
        }
    }

    /// Ordering key. Unknown month/day resolve to July 1; unknown day alone to the 15th.
    pub fn sort_key(&self) -> (i32, u8, u8) {
        match (self.month, self.day) {
            (0, _) => (self.year, 7, 1),
            (m, 0) => (self.year, m, 15),
            (m, d) => (self.year, m, d),
        }
    }

    pub fn compact(&self) -> String {
        format!("{:04}{:02}{:02}", self.year, self.month, self.day)
    }
}

impl fmt::Display for HistDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.month == 0 {
            write!(f, "{}", self.year)
        } else {
            write!(f, "{}-{:02}-{:02}", self.year, self.month, self.day)
        }
    }
}

fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            let leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
            if leap {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

/// Inclusive range of years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct YearWindow {
    pub start: i32,
    pub end: i32,
}

impl YearWindow {
    pub fn new(start: i32, end: i32) -> Result<Self, IngestError> {
        if start > end {
            return Err(IngestError::BadWindow(format!("{start}:{end}")));
        }
        Ok(YearWindow { start, end })
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }
}

impl fmt::Display for YearWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl FromStr for YearWindow {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IngestError::BadWindow(s.to_string());
        let (a, b) = s.split_once(':').or_else(|| s.split_once('-')).ok_or_else(bad)?;
        YearWindow::new(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)
    }
}

// ---------------------------------------------------------------------------
// Disciplines

/// Discipline label in canonical spelling.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Discipline(String);

impl Discipline {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub const STANDARD_DISCIPLINES: [&str; 8] = [
    "Arts",
    "Science and Technology",
    "Humanities",
    "Institutions",
    "Public Figure",
    "Sports",
    "Business and Law",
    "Exploration",
];

/// The closed set of accepted discipline labels. Matching ignores case,
/// whitespace runs, and `&` vs `and`.
#[derive(Debug, Clone)]
pub struct DisciplineSet {
    labels: Vec<(String, Discipline)>,
}

impl Default for DisciplineSet {
    fn default() -> Self {
        DisciplineSet::standard()
    }
}

fn normalize_label(s: &str) -> String {
    s.replace('&', " and ").to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

impl DisciplineSet {
    pub fn standard() -> Self {
        let mut set = DisciplineSet { labels: Vec::new() };
        for label in STANDARD_DISCIPLINES {
            set = set.with_extension(label);
        }
        set
    }

    pub fn with_extension(mut self, label: &str) -> Self {
        let key = normalize_label(label);
        if !self.labels.iter().any(|(k, _)| *k == key) {
            self.labels.push((key, Discipline(label.trim().to_string())));
        }
        self
    }

    pub fn resolve(&self, raw: &str) -> Option<Discipline> {
        let key = normalize_label(raw);
        self.labels.iter().find(|(k, _)| *k == key).map(|(_, d)| d.clone())
    }
}

// ---------------------------------------------------------------------------
// Domain types

#[derive(Debug, Clone, PartialEq)]
pub struct Person {
    pub person_id: String,
    pub name: String,
    pub birth_date: HistDate,
    pub death_date: Option<HistDate>,
    pub birth_point: GeoPoint,
    pub work_area: String,
    pub discipline: Discipline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FootstepKind {
    Birth,
    InLife,
    Death,
}

impl FootstepKind {
    fn from_resource_frame(frame: &str) -> Self {
        match frame.trim() {
            f if f.eq_ignore_ascii_case("birth") => FootstepKind::Birth,
            f if f.eq_ignore_ascii_case("death") => FootstepKind::Death,
            _ => FootstepKind::InLife,
        }
    }
}

impl FromStr for FootstepKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "birth" => Ok(FootstepKind::Birth),
            "inlife" => Ok(FootstepKind::InLife),
            "death" => Ok(FootstepKind::Death),
            _ => Err(format!("unknown footstep kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Footstep {
    pub date: HistDate,
    pub place_name: String,
    pub point: GeoPoint,
    pub kind: FootstepKind,
    pub predicate: Option<String>,
    pub resource: String,
    pub place_frame: Option<String>,
    pub resource_frame: String,
}

/// Date-ordered footsteps of one person. `origin` is the person's birth
/// point, kept even when the birth footstep itself falls outside a window.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub person_id: String,
    pub origin: GeoPoint,
    pub footsteps: Vec<Footstep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct City {
    pub city_id: String,
    pub name: String,
    pub point: GeoPoint,
    pub population: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CityTable {
    pub cities: Vec<City>,
}

impl CityTable {
    pub fn len(&self) -> usize {
        self.cities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cities.is_empty()
    }

    pub fn points(&self) -> Vec<GeoPoint> {
        self.cities.iter().map(|c| c.point).collect()
    }

    pub fn index_of(&self, city_id: &str) -> Option<usize> {
        self.cities.iter().position(|c| c.city_id == city_id)
    }
}

// ---------------------------------------------------------------------------
// Raw record access shared by the CSV and JSON paths

struct RawRecord {
    line: usize,
    values: Vec<Option<String>>,
}

impl RawRecord {
    fn get(&self, idx: usize) -> Option<&str> {
        self.values[idx].as_deref()
    }
}

enum RawItem {
    Record(RawRecord),
    Broken { line: usize, detail: String },
}

fn read_raw(mut stream: impl Read, format: Format, columns: &[&str]) -> Result<Vec<RawItem>, IngestError> {
    let mut text = String::new();
    stream.read_to_string(&mut text)?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    match format {
        Format::Csv => read_raw_csv(&text, columns),
        Format::Json => read_raw_json(&text, columns),
    }
}

fn read_raw_csv(text: &str, columns: &[&str]) -> Result<Vec<RawItem>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let mut index = Vec::with_capacity(columns.len());
    for col in columns {
        let pos = headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(col))
            .ok_or_else(|| IngestError::MissingColumn(col.to_string()))?;
        index.push(pos);
    }
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line() as usize);
                if record.len() != headers.len() {
                    out.push(RawItem::Broken {
                        line,
                        detail: format!("expected {} fields, found {}", headers.len(), record.len()),
                    });
                    continue;
                }
                let values = index.iter().map(|&i| Some(record[i].to_string())).collect();
                out.push(RawItem::Record(RawRecord { line, values }));
            }
            Err(err) => {
                let line = err.position().map_or(0, |p| p.line() as usize);
                match err.kind() {
                    csv::ErrorKind::Utf8 { .. } | csv::ErrorKind::UnequalLengths { .. } => out.push(RawItem::Broken { line, detail: err.to_string() }),
                    _ => return Err(err.into()),
                }
            }
        }
    }
    Ok(out)
}

fn read_raw_json(text: &str, columns: &[&str]) -> Result<Vec<RawItem>, IngestError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let items = value.as_array().ok_or(IngestError::JsonShape)?;
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let line = i + 1;
        let Some(obj) = item.as_object() else {
            out.push(RawItem::Broken {
                line,
                detail: "record is not an object".into(),
            });
            continue;
        };
        let values = columns
            .iter()
            .map(|col| match obj.get(*col) {
                None | Some(serde_json::Value::Null) => None,
                Some(serde_json::Value::String(s)) => Some(s.clone()),
                Some(other) => Some(other.to_string()),
            })
            .collect();
        out.push(RawItem::Record(RawRecord { line, values }));
    }
    Ok(out)
}

type FieldResult<T> = Result<T, (RejectReason, String)>;

fn is_null(s: &str) -> bool {
    let s = s.trim();
    s.is_empty() || ["null", "none", "n/a", "na", "nan"].iter().any(|n| s.eq_ignore_ascii_case(n))
}

fn optional(s: Option<&str>) -> Option<String> {
    s.filter(|v| !is_null(v)).map(|v| v.trim().to_string())
}

fn required(s: Option<&str>, name: &str) -> FieldResult<String> {
    optional(s).ok_or((RejectReason::MissingField, format!("`{name}` is empty")))
}

fn coordinates(lat: Option<&str>, lon: Option<&str>) -> FieldResult<GeoPoint> {
    let parse = |s: Option<&str>| -> Option<f64> {
        let v: f64 = s?.trim().parse().ok()?;
        v.is_finite().then_some(v)
    };
    match (parse(lat), parse(lon)) {
        (Some(lat), Some(lon)) => GeoPoint::new(lat, lon).map_err(|e| (RejectReason::CoordinateOutOfRange, e.to_string())),
        _ => Err((
            RejectReason::MissingCoordinates,
            format!("lat={:?} lon={:?}", lat.unwrap_or(""), lon.unwrap_or("")),
        )),
    }
}

fn collect<T>(items: Vec<RawItem>, mut convert: impl FnMut(&RawRecord) -> FieldResult<T>) -> Parsed<T> {
    let mut parsed = Parsed::default();
    for item in items {
        match item {
            RawItem::Record(rec) => {
                let result = convert(&rec);
                parsed.push(rec.line, result);
            }
            RawItem::Broken { line, detail } => parsed.push(line, Err((RejectReason::MalformedRecord, detail))),
        }
    }
    parsed
}

// ---------------------------------------------------------------------------
// Persons

pub const PERSON_COLUMNS: [&str; 8] = ["person_id", "name", "birth_date", "death_date", "lat", "lon", "work_area", "discipline"];

pub fn parse_persons(stream: impl Read, format: Format, disciplines: &DisciplineSet) -> Result<Parsed<Person>, IngestError> {
    let items = read_raw(stream, format, &PERSON_COLUMNS)?;
    let mut seen = HashSet::new();
    Ok(collect(items, |r| {
        let person_id = required(r.get(0), "person_id")?;
        let birth_raw = required(r.get(2), "birth_date")?;
        let birth_date = HistDate::parse_flexible(&birth_raw).ok_or((RejectReason::InvalidDate, format!("birth_date `{birth_raw}`")))?;
        let death_date = match optional(r.get(3)) {
            None => None,
            Some(raw) => Some(HistDate::parse_flexible(&raw).ok_or((RejectReason::InvalidDate, format!("death_date `{raw}`")))?),
        };
        if let Some(death) = death_date {
            // Same-year dates only compare when both months are known.
            let comparable = death.year != birth_date.year || (death.month != 0 && birth_date.month != 0);
            if comparable && death.sort_key() < birth_date.sort_key() {
                return Err((RejectReason::DeathBeforeBirth, format!("{death} < {birth_date}")));
            }
        }
        let birth_point = coordinates(r.get(4), r.get(5))?;
        let raw_disc = r.get(7).unwrap_or("").trim().to_string();
        let discipline = disciplines
            .resolve(&raw_disc)
            .ok_or((RejectReason::UnknownDiscipline, format!("`{raw_disc}`")))?;
        if !seen.insert(person_id.clone()) {
            return Err((RejectReason::DuplicateId, person_id));
        }
        Ok(Person {
            person_id,
            name: r.get(1).unwrap_or("").trim().to_string(),
            birth_date,
            death_date,
            birth_point,
            work_area: r.get(6).unwrap_or("").trim().to_string(),
            discipline,
        })
    }))
}

pub fn write_persons_csv(w: impl Write, persons: &[Person]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(PERSON_COLUMNS)?;
    for p in persons {
        wtr.write_record([
            p.person_id.clone(),
            p.name.clone(),
            p.birth_date.to_string(),
            p.death_date.map(|d| d.to_string()).unwrap_or_default(),
            p.birth_point.lat.to_string(),
            p.birth_point.lon.to_string(),
            p.work_area.clone(),
            p.discipline.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Footsteps

pub const FOOTSTEP_COLUMNS: [&str; 9] = [
    "person_id",
    "date",
    "place",
    "lat",
    "lon",
    "predicate",
    "resource",
    "place_frame",
    "resource_frame",
];

pub fn parse_footsteps(stream: impl Read, format: Format) -> Result<Parsed<(String, Footstep)>, IngestError> {
    let items = read_raw(stream, format, &FOOTSTEP_COLUMNS)?;
    Ok(collect(items, |r| {
        let person_id = required(r.get(0), "person_id")?;
        let raw_date = r.get(1).unwrap_or("").trim();
        let date = HistDate::parse_compact(raw_date).ok_or((RejectReason::InvalidDate, format!("`{raw_date}`")))?;
        let point = coordinates(r.get(3), r.get(4))?;
        let resource = required(r.get(6), "resource")?;
        let resource_frame = r.get(8).map(|s| s.trim().to_string()).unwrap_or_default();
        let kind = FootstepKind::from_resource_frame(&resource_frame);
        let predicate = optional(r.get(5));
        match kind {
            FootstepKind::Birth if !["dbpedia", "pantheon"].iter().any(|s| resource.eq_ignore_ascii_case(s)) => {
                return Err((RejectReason::InconsistentKind, format!("birth footstep from resource `{resource}`")));
            }
            FootstepKind::InLife if predicate.is_none() => {
                return Err((RejectReason::MissingPredicate, "in-life footstep without predicate".into()));
            }
            _ => {}
        }
        Ok((
            person_id,
            Footstep {
                date,
                place_name: r.get(2).unwrap_or("").trim().to_string(),
                point,
                kind,
                predicate,
                resource,
                place_frame: optional(r.get(7)),
                resource_frame,
            },
        ))
    }))
}

pub fn write_footsteps_csv<'a>(w: impl Write, footsteps: impl IntoIterator<Item = (&'a str, &'a Footstep)>) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(FOOTSTEP_COLUMNS)?;
    for (pid, f) in footsteps {
        wtr.write_record([
            pid.to_string(),
            f.date.compact(),
            f.place_name.clone(),
            f.point.lat.to_string(),
            f.point.lon.to_string(),
            f.predicate.clone().unwrap_or_else(|| "null".into()),
            f.resource.clone(),
            f.place_frame.clone().unwrap_or_else(|| "null".into()),
            f.resource_frame.clone(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Cities

pub const CITY_COLUMNS: [&str; 5] = ["city_id", "name", "lat", "lon", "population"];

pub fn parse_cities(stream: impl Read, format: Format) -> Result<Parsed<City>, IngestError> {
    let items = read_raw(stream, format, &CITY_COLUMNS)?;
    let mut ids = HashSet::new();
    let mut coords = HashSet::new();
    Ok(collect(items, |r| {
        let city_id = required(r.get(0), "city_id")?;
        let point = coordinates(r.get(2), r.get(3))?;
        let raw_pop = r.get(4).unwrap_or("").trim();
        let population: f64 = raw_pop
            .parse()
            .ok()
            .filter(|p: &f64| p.is_finite() && *p > 0.0)
            .ok_or((RejectReason::NonPositivePopulation, format!("`{raw_pop}`")))?;
        if ids.contains(&city_id) {
            return Err((RejectReason::DuplicateId, city_id));
        }
        if !coords.insert((point.lat.to_bits(), point.lon.to_bits())) {
            return Err((RejectReason::DuplicateCoordinates, city_id));
        }
        ids.insert(city_id.clone());
        Ok(City {
            city_id,
            name: r.get(1).unwrap_or("").trim().to_string(),
            point,
            population,
        })
    }))
}

pub fn write_cities_csv(w: impl Write, cities: &CityTable) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CITY_COLUMNS)?;
    for c in &cities.cities {
        wtr.write_record([
            c.city_id.clone(),
            c.name.clone(),
            c.point.lat.to_string(),
            c.point.lon.to_string(),
            c.population.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Trajectory assembly and filtering

/// Groups footsteps per person and orders them by date. Ties keep input
/// order, except that a birth sorts before and a death after any footstep
/// sharing its date. Footsteps that break the birth-first / death-last
/// structure are rejected.
pub fn assemble_trajectories(persons: &[Person], footsteps: &Parsed<(String, Footstep)>) -> (Vec<Trajectory>, Vec<Rejection>) {
    let index: HashMap<&str, usize> = persons.iter().enumerate().map(|(i, p)| (p.person_id.as_str(), i)).collect();
    let mut grouped: Vec<Vec<(usize, &Footstep)>> = vec![Vec::new(); persons.len()];
    let mut rejections = Vec::new();
    for ((pid, fs), &line) in footsteps.accepted.iter().zip(&footsteps.lines) {
        match index.get(pid.as_str()) {
            Some(&i) => grouped[i].push((line, fs)),
            None => rejections.push(Rejection {
                line,
                reason: RejectReason::UnknownPerson,
                detail: pid.clone(),
            }),
        }
    }

    let mut out = Vec::with_capacity(persons.len());
    for (person, mut steps) in persons.iter().zip(grouped) {
        steps.sort_by_key(|(_, f)| (f.date.sort_key(), f.kind));
        let birth = steps.iter().position(|(_, f)| f.kind == FootstepKind::Birth);
        let death = steps.iter().position(|(_, f)| f.kind == FootstepKind::Death);
        let mut kept = Vec::with_capacity(steps.len());
        for (pos, (line, f)) in steps.iter().enumerate() {
            let reject = |reason| Rejection {
                line: *line,
                reason,
                detail: format!("{} {}", person.person_id, f.date.compact()),
            };
            match f.kind {
                FootstepKind::Birth if Some(pos) != birth => rejections.push(reject(RejectReason::DuplicateBirth)),
                FootstepKind::Death if Some(pos) != death => rejections.push(reject(RejectReason::DuplicateDeath)),
                _ if birth.is_some_and(|b| pos < b) => rejections.push(reject(RejectReason::BeforeBirth)),
                _ if death.is_some_and(|d| pos > d) => rejections.push(reject(RejectReason::AfterDeath)),
                _ => kept.push((*f).clone()),
            }
        }
        out.push(Trajectory {
            person_id: person.person_id.clone(),
            origin: person.birth_point,
            footsteps: kept,
        });
    }
    (out, rejections)
}

/// Keeps persons old enough by the end of `window` and alive at some point in
/// it, and within their trajectories only the footsteps dated inside it.
pub fn filter_active(persons: &[Person], trajectories: &[Trajectory], window: YearWindow, min_age_at_end: u32) -> (Vec<Person>, Vec<Trajectory>) {
    let latest_birth = window.end - min_age_at_end as i32;
    let active: Vec<Person> = persons
        .iter()
        .filter(|p| p.birth_date.year <= latest_birth && p.death_date.is_none_or(|d| d.year >= window.start))
        .cloned()
        .collect();
    let ids: HashSet<&str> = active.iter().map(|p| p.person_id.as_str()).collect();
    let trajectories = trajectories
        .iter()
        .filter(|t| ids.contains(t.person_id.as_str()))
        .map(|t| Trajectory {
            person_id: t.person_id.clone(),
            origin: t.origin,
            footsteps: t.footsteps.iter().filter(|f| window.contains(f.date.year)).cloned().collect(),
        })
        .collect();
    (active, trajectories)
}

// ---------------------------------------------------------------------------
// Summary

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub total: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub rejections: Vec<Rejection>,
}

impl StreamSummary {
    pub fn of<T>(parsed: &Parsed<T>) -> Self {
        StreamSummary {
            total: parsed.total(),
            accepted: parsed.accepted.len(),
            rejected: parsed.rejections.len(),
            rejections: parsed.rejections.clone(),
        }
    }
}

/// Machine-readable account of an ingest run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub persons: StreamSummary,
    pub footsteps: StreamSummary,
    pub cities: StreamSummary,
    pub assembly_rejections: Vec<Rejection>,
    pub active_persons: usize,
    pub in_window_movements: usize,
}
