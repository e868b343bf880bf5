//! Run configuration, read from TOML or JSON.
//!
//! ```toml
//! persons = "persons.csv"
//! footsteps = "footsteps.csv"
//! cities = "cities.csv"
//! window = "1900:1950"
//! min_age = 20
//! models = ["pop-notable-multi", "uniform-single"]
//! output = "out"
//! trajectories = false
//!
//! [sim]
//! walkers = 2000
//! replicates = 500
//! trip_p = 0.5
//! seed = 42
//!
//! [binning.jumps]
//! kind = "uniform"
//! lo = 0.0
//! hi = 20100.0
//! bins = 100
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DisciplineSet, YearWindow};
use crate::radiation::ModelSpec;
use crate::sim::SimConfig;
use crate::stats::Binning;

pub const DEFAULT_WINDOW: YearWindow = YearWindow { start: 1900, end: 1950 };
pub const DEFAULT_MIN_AGE: u32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub persons: PathBuf,
    pub footsteps: PathBuf,
    pub cities: PathBuf,
    pub window: YearWindow,
    pub min_age: u32,
    pub models: Vec<ModelSpec>,
    pub sim: SimConfig,
    pub binning: Binning,
    pub output: PathBuf,
    /// Also write simulated trajectories.
    pub trajectories: bool,
    /// Discipline labels accepted on top of the standard ones.
    pub extra_disciplines: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    persons: Option<PathBuf>,
    footsteps: Option<PathBuf>,
    cities: Option<PathBuf>,
    window: Option<String>,
    min_age: Option<u32>,
    models: Option<Vec<String>>,
    #[serde(default)]
    sim: SimConfig,
    #[serde(default)]
    binning: Binning,
    output: Option<PathBuf>,
    #[serde(default)]
    trajectories: bool,
    #[serde(default)]
    extra_disciplines: Vec<String>,
}

/// Values that may be given on the command line and win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub persons: Option<PathBuf>,
    pub footsteps: Option<PathBuf>,
    pub cities: Option<PathBuf>,
    pub window: Option<YearWindow>,
    pub min_age: Option<u32>,
    pub models: Option<Vec<ModelSpec>>,
    pub walkers: Option<usize>,
    pub replicates: Option<usize>,
    pub trip_p: Option<f64>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub trajectories: Option<bool>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    /// Reads a `.toml` or `.json` file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let raw: RawConfig = match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?,
            _ => toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?,
        };
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        let resolve = |p: Option<PathBuf>| p.map(|p| if p.is_relative() { base.join(p) } else { p });
        let raw = RawConfig {
            persons: resolve(raw.persons.clone()),
            footsteps: resolve(raw.footsteps.clone()),
            cities: resolve(raw.cities.clone()),
            output: resolve(raw.output.clone()),
            ..raw
        };
        Self::from_raw(raw)
    }

    /// Config from the optional file with `overrides` applied on top.
    pub fn resolve(file: Option<&Path>, overrides: Overrides) -> Result<Self> {
        let base = match file {
            Some(p) => Self::load(p)?,
            None => Self::from_raw(RawConfig::default())?,
        };
        let cfg = base.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let window = match raw.window {
            Some(w) => w.parse().map_err(|e| config_err(format!("window: {e}")))?,
            None => DEFAULT_WINDOW,
        };
        let models = match raw.models {
            Some(names) => names
                .iter()
                .map(|n| n.parse::<ModelSpec>().map_err(|e| config_err(e.to_string())))
                .collect::<Result<Vec<_>>>()?,
            None => ModelSpec::reference_five().to_vec(),
        };
        Ok(RunConfig {
            persons: raw.persons.unwrap_or_default(),
            footsteps: raw.footsteps.unwrap_or_default(),
            cities: raw.cities.unwrap_or_default(),
            window,
            min_age: raw.min_age.unwrap_or(DEFAULT_MIN_AGE),
            models,
            sim: raw.sim,
            binning: raw.binning,
            output: raw.output.unwrap_or_else(|| PathBuf::from("radiant-out")),
            trajectories: raw.trajectories,
            extra_disciplines: raw.extra_disciplines,
        })
    }

    pub fn apply(mut self, o: Overrides) -> Self {
        macro_rules! set {
            ($($field:ident).+ <- $value:expr) => {
                if let Some(v) = $value {
                    self.$($field).+ = v;
                }
            };
        }
        set!(persons <- o.persons);
        set!(footsteps <- o.footsteps);
        set!(cities <- o.cities);
        set!(window <- o.window);
        set!(min_age <- o.min_age);
        set!(models <- o.models);
        set!(sim.walkers <- o.walkers);
        set!(sim.replicates <- o.replicates);
        set!(sim.trip_p <- o.trip_p);
        set!(sim.seed <- o.seed);
        set!(output <- o.output);
        set!(trajectories <- o.trajectories);
        self
    }

    /// Checks invariants that do not touch the filesystem.
    pub fn validate(&self) -> Result<()> {
        if self.window.start > self.window.end {
            return Err(config_err(format!("window {} is reversed", self.window)));
        }
        if self.models.is_empty() {
            return Err(config_err("no models selected"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.models {
            if !seen.insert(*m) {
                return Err(config_err(format!("model {m} listed twice")));
            }
        }
        self.sim.validate().map_err(|e| config_err(e.to_string()))?;
        for stat in crate::stats::Statistic::ALL {
            self.binning.spec(stat).edges().map_err(|e| config_err(format!("binning.{stat}: {e}")))?;
        }
        Ok(())
    }

    /// Checks that every input path was given and exists.
    pub fn check_inputs(&self) -> Result<()> {
        for (name, path) in [("persons", &self.persons), ("footsteps", &self.footsteps), ("cities", &self.cities)] {
            if path.as_os_str().is_empty() {
                return Err(config_err(format!("no {name} input given")));
            }
            if !path.is_file() {
                return Err(config_err(format!("{name} input {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn disciplines(&self) -> DisciplineSet {
        self.extra_disciplines
            .iter()
            .fold(DisciplineSet::standard(), |set, label| set.with_extension(label))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_with_relative_paths_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            r#"
persons = "p.csv"
footsteps = "/abs/f.csv"
cities = "c.csv"
window = "1910:1920"
models = ["uniform-single", "pop-multi"]

[sim]
walkers = 10
seed = 7
"#,
        )
        .unwrap();
        let cfg = RunConfig::resolve(
            Some(&path),
            Overrides {
                seed: Some(9),
                window: Some(YearWindow::new(1900, 1950).unwrap()),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(cfg.persons, dir.path().join("p.csv"));
        assert_eq!(cfg.footsteps, PathBuf::from("/abs/f.csv"));
        assert_eq!(cfg.window, YearWindow::new(1900, 1950).unwrap());
        assert_eq!(cfg.sim.walkers, 10);
        assert_eq!(cfg.sim.replicates, 500);
        assert_eq!(cfg.sim.seed, 9);
        assert_eq!(cfg.models.len(), 2);
        assert!(cfg.check_inputs().is_err());
    }

    #[test]
    fn json_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(
            &path,
            r#"{"persons": "p.csv", "sim": {"trip_p": 0.25}, "binning": {"destinations": {"kind": "integer", "max": 12}}}"#,
        )
        .unwrap();
        let cfg = RunConfig::resolve(Some(&path), Overrides::default()).unwrap();
        assert_eq!(cfg.sim.trip_p, 0.25);
        assert_eq!(cfg.binning.destinations, crate::stats::BinSpec::Integer { max: 12 });
        assert_eq!(cfg.models, ModelSpec::reference_five().to_vec());
    }

    #[test]
    fn rejects_bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            "window = \"1950:1900\"",
            "models = [\"gravity-single\"]",
            "models = []",
            "models = [\"pop-multi\", \"pop-multi\"]",
            "unknown_key = 1",
            "[sim]\ntrip_p = 0.0",
            "[sim]\nwalkers = 0",
            "[binning.jumps]\nkind = \"uniform\"\nlo = 5.0\nhi = 1.0\nbins = 3",
        ];
        for (k, text) in cases.iter().enumerate() {
            let path = dir.path().join(format!("bad{k}.toml"));
            std::fs::write(&path, text).unwrap();
            let err = RunConfig::resolve(Some(&path), Overrides::default()).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
        let missing = RunConfig::resolve(Some(Path::new("/nonexistent/run.toml")), Overrides::default()).unwrap_err();
        assert_eq!(missing.exit_code(), 2);
    }

    #[test]
    fn extra_disciplines() {
        let mut cfg = RunConfig::resolve(None, Overrides::default()).unwrap();
        cfg.extra_disciplines.push("Music".into());
        assert!(cfg.disciplines().resolve("music").is_some());
        assert!(RunConfig::resolve(None, Overrides::default()).unwrap().disciplines().resolve("music").is_none());
    }
}
