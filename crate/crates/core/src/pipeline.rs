//! End-to-end runs: ingest, build kernels, simulate, compare.
//!
//! Output layout under the configured directory:
//!
//! ```text
//! ingest_summary.json
//! data_<statistic>.csv
//! kernels/<model>.radk
//! <model>/dist_<statistic>.csv
//! <model>/report.json
//! <model>/trajectories.csv      (when enabled)
//! summary.csv
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geo::{DistanceMatrix, GeoPoint};
use crate::ingest::{
    assemble_trajectories, filter_active, parse_cities, parse_footsteps, parse_persons, CityTable, DisciplineSet, Format, IngestSummary, Person, StreamSummary,
    Trajectory, YearWindow,
};
use crate::netbuild::{assign_trajectories, build_network, AssignedTrajectory, FarAssignment};
use crate::radiation::{multilevel_kernel, ModelInputs, ModelSpec, RadiationKernel};
use crate::sim::{run_ensemble_with, write_trajectories_csv, SimModel, TRAJECTORY_COLUMNS};
use crate::stats::{compare, distributions, write_summary_csv, BinnedDistribution, Distributions, MetricRecord, MobilitySamples, ReplicateMetrics, Statistic};

/// Paths of the three input tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputPaths {
    pub persons: PathBuf,
    pub footsteps: PathBuf,
    pub cities: PathBuf,
}

impl InputPaths {
    pub fn from_config(cfg: &RunConfig) -> Self {
        InputPaths {
            persons: cfg.persons.clone(),
            footsteps: cfg.footsteps.clone(),
            cities: cfg.cities.clone(),
        }
    }
}

/// Active persons with their in-window trajectories mapped onto cities.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub window: YearWindow,
    pub persons: Vec<Person>,
    /// In-window footsteps before city assignment.
    pub footsteps: Vec<Trajectory>,
    pub trajectories: Vec<AssignedTrajectory>,
    pub cities: CityTable,
    pub report: IngestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestReport {
    #[serde(flatten)]
    pub ingest: IngestSummary,
    pub window: String,
    /// Cities receiving at least one in-window footstep.
    pub distinct_cities: usize,
    /// Total weight of the window's migration network.
    pub network_weight: u64,
    pub far_assignments: Vec<FarAssignment>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// Writes `f`'s output to `path`, mapping CSV errors to I/O errors on it.
pub fn write_csv_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> csv::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).map_err(|e| csv_error(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json_file(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parses, filters and city-assigns the inputs.
pub fn load_dataset(paths: &InputPaths, window: YearWindow, min_age: u32, disciplines: &DisciplineSet) -> Result<Dataset> {
    let persons = parse_persons(open(&paths.persons)?, Format::from_path(&paths.persons), disciplines)?;
    let footsteps = parse_footsteps(open(&paths.footsteps)?, Format::from_path(&paths.footsteps))?;
    let cities = parse_cities(open(&paths.cities)?, Format::from_path(&paths.cities))?;
    for (what, n) in [
        ("persons", persons.accepted.len()),
        ("footsteps", footsteps.accepted.len()),
        ("cities", cities.accepted.len()),
    ] {
        if n == 0 {
            return Err(Error::EmptyInput { what: what.to_string() });
        }
    }
    let (trajectories, assembly_rejections) = assemble_trajectories(&persons.accepted, &footsteps);
    let (active, trajectories) = filter_active(&persons.accepted, &trajectories, window, min_age);
    let table = CityTable {
        cities: cities.accepted.clone(),
    };
    let (assigned, assignment) = assign_trajectories(&active, &trajectories, &table)?;
    let report = IngestReport {
        ingest: IngestSummary {
            persons: StreamSummary::of(&persons),
            footsteps: StreamSummary::of(&footsteps),
            cities: StreamSummary::of(&cities),
            assembly_rejections,
            active_persons: active.len(),
            in_window_movements: trajectories.iter().map(|t| t.footsteps.len()).sum(),
        },
        window: window.to_string(),
        distinct_cities: assignment.distinct_cities,
        network_weight: build_network(&assigned, window, None).total_weight(),
        far_assignments: assignment.far_assignments,
    };
    Ok(Dataset {
        window,
        persons: active,
        footsteps: trajectories,
        trajectories: assigned,
        cities: table,
        report,
    })
}

impl Dataset {
    /// Observed visit sequences, skipping persons without visits.
    pub fn sequences(&self) -> Vec<Vec<usize>> {
        self.trajectories.iter().map(|t| t.cities()).filter(|c| !c.is_empty()).collect()
    }

    pub fn samples(&self) -> MobilitySamples {
        let seqs = self.sequences();
        MobilitySamples::from_sequences(seqs.iter().map(Vec::as_slice), &self.cities.points())
    }
}

/// Kernel and sampler for one model.
pub struct PreparedModel {
    pub spec: ModelSpec,
    /// Row-stochastic transition matrix over the model's cities.
    pub kernel: RadiationKernel,
    pub sim: SimModel,
}

pub fn prepare_model(spec: ModelSpec, inputs: &ModelInputs, distances: &DistanceMatrix, cities: &CityTable) -> Result<PreparedModel> {
    let levels = inputs.levels(spec, distances)?;
    let ml = multilevel_kernel(&levels)?;
    let kernel = match ml.levels() {
        [only] => only.kernel.clone(),
        _ => ml.transition(),
    };
    let sim = SimModel::from_multilevel(&ml, |c| cities.cities[c].population)?;
    Ok(PreparedModel { spec, kernel, sim })
}

struct ReplicateOutcome {
    metrics: [ReplicateMetrics; 3],
    masses: [Vec<f64>; 3],
    samples: [usize; 3],
    trajectories: Option<Vec<u8>>,
}

/// Runs the full pipeline and returns the summary records.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    cfg.check_inputs()?;
    let data = load_dataset(&InputPaths::from_config(cfg), cfg.window, cfg.min_age, &cfg.disciplines())?;
    let out = &cfg.output;
    write_json_file(&out.join("ingest_summary.json"), &data.report)?;

    let observed = distributions(&data.samples(), &cfg.binning)?;
    for stat in Statistic::ALL {
        write_csv_file(&out.join(format!("data_{stat}.csv")), |w| observed.get(stat).write_csv(w))?;
    }

    let inputs = ModelInputs::from_trajectories(&data.trajectories, &data.cities)?;
    let points = data.cities.points();
    let universe_points: Vec<GeoPoint> = inputs.universe.iter().map(|&c| points[c]).collect();
    let distances = DistanceMatrix::from_points(inputs.universe.clone(), &universe_points);

    let mut records = Vec::new();
    for &spec in &cfg.models {
        records.extend(run_model(cfg, spec, &data, &inputs, &distances, &observed)?);
    }
    write_csv_file(&out.join("summary.csv"), |w| write_summary_csv(w, &records))?;
    Ok(records)
}

fn run_model(
    cfg: &RunConfig,
    spec: ModelSpec,
    data: &Dataset,
    inputs: &ModelInputs,
    distances: &DistanceMatrix,
    observed: &Distributions,
) -> Result<Vec<MetricRecord>> {
    let name = spec.to_string();
    let model = prepare_model(spec, inputs, distances, &data.cities)?;
    let city_id = |c: usize| data.cities.cities[c].city_id.clone();

    let kernel_path = cfg.output.join("kernels").join(format!("{name}.radk"));
    let mut w = create(&kernel_path)?;
    model.kernel.write_binary(&mut w, city_id).map_err(|e| match e {
        crate::radiation::RadiationError::Io(io) => Error::io(&kernel_path, io),
        other => other.into(),
    })?;
    w.flush().map_err(|e| Error::io(&kernel_path, e))?;

    let points = data.cities.points();
    let outcomes = run_ensemble_with(&cfg.sim, &model.sim, |r, trajectories| -> Result<ReplicateOutcome> {
        let samples = MobilitySamples::from_sequences(trajectories.iter().map(|t| t.cities.as_slice()), &points);
        let simulated = distributions(&samples, &cfg.binning)?;
        let mut metrics = Vec::with_capacity(3);
        for stat in Statistic::ALL {
            metrics.push(compare(simulated.get(stat), observed.get(stat))?);
        }
        let dump = if cfg.trajectories {
            let mut w = csv::Writer::from_writer(Vec::new());
            write_trajectories_csv(&mut w, r, &trajectories, &model.sim, city_id).expect("writing to memory");
            Some(w.into_inner().expect("writing to memory"))
        } else {
            None
        };
        Ok(ReplicateOutcome {
            metrics: metrics.try_into().expect("three statistics"),
            masses: Statistic::ALL.map(|s| simulated.get(s).masses()),
            samples: Statistic::ALL.map(|s| simulated.get(s).samples()),
            trajectories: dump,
        })
    })?;

    let dir = cfg.output.join(&name);
    let mut records = Vec::with_capacity(3);
    for (k, stat) in Statistic::ALL.into_iter().enumerate() {
        let bins = observed.get(stat).bins();
        let mut mean = vec![0.0; bins];
        for o in &outcomes {
            for (m, v) in mean.iter_mut().zip(&o.masses[k]) {
                *m += v / outcomes.len() as f64;
            }
        }
        let total = outcomes.iter().map(|o| o.samples[k]).sum();
        let pooled = BinnedDistribution::from_masses(cfg.binning.spec(stat), &mean, total)?;
        write_csv_file(&dir.join(format!("dist_{stat}.csv")), |w| pooled.write_csv(w))?;
        let per_replicate: Vec<ReplicateMetrics> = outcomes.iter().map(|o| o.metrics[k]).collect();
        records.push(MetricRecord::aggregate(stat, &name, &per_replicate));
    }
    write_json_file(&dir.join("report.json"), &records)?;

    if cfg.trajectories {
        let path = dir.join("trajectories.csv");
        let mut w = create(&path)?;
        let header = TRAJECTORY_COLUMNS.join(",") + "\n";
        w.write_all(header.as_bytes()).map_err(|e| Error::io(&path, e))?;
        for o in &outcomes {
            w.write_all(o.trajectories.as_deref().unwrap_or_default()).map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(records)
}
