//! Command-line front end.
//!
//! Exit status: 0 on success, 2 for configuration and usage errors, 3 for
//! input errors, 4 for numerical failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, RunConfig};
use crate::error::{Error, Result};
use crate::ingest::{write_cities_csv, write_footsteps_csv, write_persons_csv, Discipline, FootstepKind, YearWindow};
use crate::netbuild::{build_network, distinct_city_counts, fit_geometric, heaps_events, heaps_fit, pagerank, write_pagerank_csv, DEFAULT_DAMPING};
use crate::pipeline::{load_dataset, run_pipeline, write_csv_file, write_json_file, Dataset, InputPaths};
use crate::radiation::ModelSpec;

#[derive(Debug, Parser)]
#[command(name = "radiant", version, about = "Migration networks and radiation-model simulations of notable individuals")]
pub struct Cli {
    /// Worker threads for kernel construction and simulation.
    #[arg(long, global = true, env = "RADIANT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest, build kernels, simulate every selected model and compare it with the data.
    Pipeline(PipelineArgs),
    /// Validate and filter the input tables and report what was kept.
    Ingest(IngestArgs),
    /// Write the migration network as an edge list.
    Network(NetworkArgs),
    /// Rank cities by weighted PageRank.
    Pagerank(PagerankArgs),
    /// Fit Heaps' law to the stream of new cities.
    Heaps(HeapsArgs),
    /// Fit the geometric law of distinct cities per person.
    Trips(TripsArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// TOML or JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Persons table (.csv or .json).
    #[arg(long)]
    pub persons: Option<PathBuf>,
    /// Footsteps table (.csv or .json).
    #[arg(long)]
    pub footsteps: Option<PathBuf>,
    /// Reference cities table (.csv or .json).
    #[arg(long)]
    pub cities: Option<PathBuf>,
    /// Inclusive year window, e.g. 1900:1950.
    #[arg(long)]
    pub window: Option<YearWindow>,
    /// Minimum age reached by the end of the window.
    #[arg(long)]
    pub min_age: Option<u32>,
}

impl DataArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            persons: self.persons.clone(),
            footsteps: self.footsteps.clone(),
            cities: self.cities.clone(),
            window: self.window,
            min_age: self.min_age,
            ..Default::default()
        }
    }

    fn config(&self, extra: Overrides) -> Result<RunConfig> {
        let base = self.overrides();
        RunConfig::resolve(
            self.config.as_deref(),
            Overrides {
                models: extra.models,
                walkers: extra.walkers,
                replicates: extra.replicates,
                trip_p: extra.trip_p,
                seed: extra.seed,
                output: extra.output,
                trajectories: extra.trajectories,
                ..base
            },
        )
    }

    fn dataset(&self) -> Result<(RunConfig, Dataset)> {
        let cfg = self.config(Overrides::default())?;
        cfg.check_inputs()?;
        let data = load_dataset(&InputPaths::from_config(&cfg), cfg.window, cfg.min_age, &cfg.disciplines())?;
        Ok((cfg, data))
    }
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated models, e.g. pop-notable-multi,uniform-single.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<ModelSpec>>,
    #[arg(long)]
    pub walkers: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Geometric trip-count parameter.
    #[arg(long)]
    pub trip_p: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write simulated trajectories.
    #[arg(long)]
    pub trajectories: bool,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Directory for the filtered tables and the summary.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Keep only persons of this discipline.
    #[arg(long)]
    pub discipline: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PagerankArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Keep only persons of this discipline.
    #[arg(long)]
    pub discipline: Option<String>,
    #[arg(long, default_value_t = DEFAULT_DAMPING)]
    pub damping: f64,
    /// L1 convergence tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeapsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// birth, inlife or death.
    #[arg(long)]
    pub kind: FootstepKind,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TripsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
            write(&mut f).and_then(|_| f.flush()).map_err(|e| Error::io(path, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn emit_json(out: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    emit(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

fn csv_io(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

fn discipline(cfg: &RunConfig, raw: Option<&str>) -> Result<Option<Discipline>> {
    raw.map(|d| cfg.disciplines().resolve(d).ok_or_else(|| Error::Config(format!("unknown discipline `{d}`"))))
        .transpose()
}

fn cmd_pipeline(args: PipelineArgs) -> Result<()> {
    let cfg = args.data.config(Overrides {
        models: args.models,
        walkers: args.walkers,
        replicates: args.replicates,
        trip_p: args.trip_p,
        seed: args.seed,
        output: args.out,
        trajectories: args.trajectories.then_some(true),
        ..Default::default()
    })?;
    let records = run_pipeline(&cfg)?;
    eprintln!("wrote {} metric rows to {}", records.len(), cfg.output.join("summary.csv").display());
    Ok(())
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let (_, data) = args.data.dataset()?;
    let out = &args.out;
    write_json_file(&out.join("ingest_summary.json"), &data.report)?;
    write_csv_file(&out.join("persons.csv"), |w| write_persons_csv(w, &data.persons))?;
    write_csv_file(&out.join("cities.csv"), |w| write_cities_csv(w, &data.cities))?;
    write_csv_file(&out.join("footsteps.csv"), |w| {
        write_footsteps_csv(
            w,
            data.footsteps.iter().flat_map(|t| t.footsteps.iter().map(move |f| (t.person_id.as_str(), f))),
        )
    })?;
    emit_json(None, &data.report.ingest)
}

fn cmd_network(args: NetworkArgs) -> Result<()> {
    let (cfg, data) = args.data.dataset()?;
    let disc = discipline(&cfg, args.discipline.as_deref())?;
    let net = build_network(&data.trajectories, data.window, disc.as_ref());
    emit(args.out.as_deref(), |w| net.write_csv(w, &data.cities).map_err(csv_io))
}

fn cmd_pagerank(args: PagerankArgs) -> Result<()> {
    let (cfg, data) = args.data.dataset()?;
    let disc = discipline(&cfg, args.discipline.as_deref())?;
    let net = build_network(&data.trajectories, data.window, disc.as_ref());
    let scores = pagerank(&net, args.damping, args.tol)?;
    emit(args.out.as_deref(), |w| {
        write_pagerank_csv(w, &scores, &data.cities, data.window).map_err(csv_io)
    })
}

fn cmd_heaps(args: HeapsArgs) -> Result<()> {
    let (_, data) = args.data.dataset()?;
    let fit = heaps_fit::<f64>(args.kind, &heaps_events(&data.trajectories, args.kind))?;
    emit_json(args.out.as_deref(), &fit)
}

fn cmd_trips(args: TripsArgs) -> Result<()> {
    let (_, data) = args.data.dataset()?;
    let fit = fit_geometric::<f64>(&distinct_city_counts(&data.trajectories))?;
    emit_json(args.out.as_deref(), &fit)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Network(a) => cmd_network(a),
        Command::Pagerank(a) => cmd_pagerank(a),
        Command::Heaps(a) => cmd_heaps(a),
        Command::Trips(a) => cmd_trips(a),
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error[cli/ConfigError]: --threads must be at least 1");
            return 2;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error[cli/ConfigError]: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}/{}]: {e}", e.module(), e.code());
            e.exit_code()
        }
    }
}
