//! Command-line entry point shared by the binary and the tests.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use super::config::{ExperimentConfig, FULL_SCALE_PACKETS};
use super::sweep::{aggregate, run_sweep, SweepConfig, SweepSource, SweepVariable};
use super::{plot, report};
use crate::channel::synthesize_trace;
use crate::gridsearch::{default_fitter, enumerate_grid, grid_search_with, subsample};
use crate::trace::{
    list_trace_files, load_trace_dir, partition_collection, save_trace, TraceCollection,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "physec",
    version,
    about = "Spoofing detection experiments on OFDM channel traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration; defaults apply without one.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Trace directory; `<out-dir>/traces` by default.
    #[arg(long, global = true)]
    trace_dir: Option<PathBuf>,
    /// Keep about this many configurations per grid.
    #[arg(long, global = true)]
    grid_subsample: Option<usize>,
    /// Use 100000 packets per trace instead of the configured count.
    #[arg(long, global = true)]
    full_scale: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize `l_total` trace files.
    Generate,
    /// Validate the trace files in the trace directory.
    Ingest,
    /// Grid-search every configured family on the validation traces.
    Gridsearch,
    /// Run the configured sweeps on the testing traces.
    Sweep,
    /// Rebuild aggregates and plots from existing sweep files.
    Report,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Data(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Data(_) => EXIT_DATA,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Data(m) => m,
        }
    }
}

fn data<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> Failure + '_ {
    move |e| Failure::Data(format!("{context}: {e}"))
}

struct Context {
    cfg: ExperimentConfig,
    out_dir: PathBuf,
    trace_dir: PathBuf,
    grid_subsample: Option<usize>,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self, Failure> {
        let mut cfg = match &cli.config {
            Some(path) => {
                ExperimentConfig::load(path).map_err(|e| Failure::Config(e.to_string()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if cli.full_scale {
            cfg.scenario.n_packets = FULL_SCALE_PACKETS;
        }
        cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
        Ok(Self {
            trace_dir: cli
                .trace_dir
                .clone()
                .unwrap_or_else(|| cli.out_dir.join("traces")),
            out_dir: cli.out_dir.clone(),
            grid_subsample: cli.grid_subsample.or(cfg.gridsearch.subsample),
            cfg,
        })
    }

    fn collection(&self) -> Result<TraceCollection, Failure> {
        let has_traces = self.trace_dir.is_dir()
            && !list_trace_files(&self.trace_dir)
                .map_err(data("listing traces"))?
                .is_empty();
        if !has_traces {
            return Err(Failure::Data(format!(
                "no trace files in {}; run `generate` first",
                self.trace_dir.display()
            )));
        }
        let traces = load_trace_dir(&self.trace_dir).map_err(data("loading traces"))?;
        partition_collection(
            traces,
            self.cfg.scenario.l_valid,
            self.cfg
                .partition_policy()
                .map_err(|e| Failure::Config(e.to_string()))?,
        )
        .map_err(data("partitioning traces"))
    }

    fn subdir(&self, name: &str) -> Result<PathBuf, Failure> {
        let dir = self.out_dir.join(name);
        fs::create_dir_all(&dir).map_err(data("creating output directory"))?;
        Ok(dir)
    }
}

fn generate(ctx: &Context) -> Result<(), Failure> {
    fs::create_dir_all(&ctx.trace_dir).map_err(data("creating trace directory"))?;
    let n = ctx.cfg.scenario.l_total;
    let scenarios = (0..n)
        .map(|i| ctx.cfg.scenario_for(i))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let traces = scenarios
        .par_iter()
        .map(synthesize_trace)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Config(e.to_string()))?;
    for (i, t) in traces.iter().enumerate() {
        let path = ctx.trace_dir.join(format!("trace_{i:02}.csv"));
        save_trace(t, &path).map_err(data("writing trace"))?;
        println!(
            "{}: {} packets, eve fraction {:.4}",
            path.display(),
            t.len(),
            t.eve_fraction()
        );
    }
    Ok(())
}

fn ingest(ctx: &Context) -> Result<(), Failure> {
    let collection = ctx.collection()?;
    let m = collection.datasets[0].m;
    if let Some(bad) = collection.datasets.iter().find(|d| d.m != m) {
        return Err(Failure::Data(format!(
            "traces disagree on subcarrier count ({m} vs {})",
            bad.m
        )));
    }
    for (i, d) in collection.datasets.iter().enumerate() {
        let role = if collection.validation.contains(&i) {
            "validation"
        } else {
            "testing"
        };
        println!(
            "dataset {i}: {} packets, m={}, eve fraction {:.4}, {role}",
            d.len(),
            d.m,
            d.eve_fraction()
        );
    }
    Ok(())
}

fn gridsearch(ctx: &Context) -> Result<(), Failure> {
    let collection = ctx.collection()?;
    let validation: Vec<_> = collection.validation_sets().into_iter().cloned().collect();
    let ppcfg = ctx
        .cfg
        .preprocess_config()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let dir = ctx.subdir("gridsearch")?;
    let mut best_lines = String::new();
    let mut failed = Vec::new();
    for family in ctx
        .cfg
        .families()
        .map_err(|e| Failure::Config(e.to_string()))?
    {
        let grid = ctx
            .cfg
            .grid_for(family)
            .map_err(|e| Failure::Config(e.to_string()))?;
        let mut specs = enumerate_grid(&grid).map_err(|e| Failure::Config(e.to_string()))?;
        if let Some(n) = ctx.grid_subsample {
            specs = subsample(specs, n);
        }
        match grid_search_with(&specs, &validation, &ppcfg, ctx.cfg.seed, &default_fitter) {
            Ok(result) => {
                let mut csv = Vec::new();
                result
                    .write_csv(&mut csv)
                    .map_err(data("formatting results"))?;
                fs::write(dir.join(format!("{family}.csv")), csv)
                    .map_err(data("writing results"))?;
                let mut summary = Vec::new();
                result
                    .write_summary(&mut summary)
                    .map_err(data("formatting summary"))?;
                fs::write(dir.join(format!("{family}_best.txt")), summary)
                    .map_err(data("writing summary"))?;
                println!(
                    "{family}: {} configs, best {:.4} with {}",
                    specs.len(),
                    result.best_score,
                    result.best_spec
                );
                best_lines.push_str(&format!("{}\n", result.best_spec));
            }
            Err(e) => {
                eprintln!("{family}: {e}");
                failed.push(family.to_string());
            }
        }
    }
    fs::write(dir.join("best_specs.txt"), best_lines).map_err(data("writing best specs"))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Data(format!(
            "no valid configuration for {}",
            failed.join(", ")
        )))
    }
}

fn write_sweep_outputs(
    dir: &Path,
    variable: &str,
    rows: &[super::SweepRow],
) -> Result<(), Failure> {
    let agg = aggregate(rows);
    report::save_rows(&dir.join(format!("{variable}.csv")), rows).map_err(data("writing sweep"))?;
    report::save_aggregate(&dir.join(format!("{variable}_aggregate.csv")), &agg)
        .map_err(data("writing aggregate"))?;
    fs::write(
        dir.join(format!("{variable}.svg")),
        plot::render_svg(variable, &agg),
    )
    .map_err(data("writing plot"))
}

fn sweep(ctx: &Context) -> Result<(), Failure> {
    let collection = ctx.collection()?;
    let config_err = |e: super::ConfigError| Failure::Config(e.to_string());
    let dir = ctx.subdir("sweep")?;
    let testing: Vec<_> = collection.testing_sets().into_iter().cloned().collect();
    for variable in ctx.cfg.sweep_variables().map_err(config_err)? {
        let cfg = SweepConfig {
            variable,
            values: ctx.cfg.sweep_values(variable),
            preprocess: ctx.cfg.preprocess_config().map_err(config_err)?,
            classifiers: ctx.cfg.sweep_classifiers().map_err(config_err)?,
            repetitions: ctx.cfg.sweep.repetitions,
            seed: ctx.cfg.seed,
        };
        let source = if variable == SweepVariable::AttackIntensity {
            let templates = collection
                .testing
                .iter()
                .map(|&i| ctx.cfg.scenario_for(i))
                .collect::<Result<Vec<_>, _>>()
                .map_err(config_err)?;
            SweepSource::Scenarios(templates)
        } else {
            SweepSource::Traces(testing.clone())
        };
        let result = run_sweep(&cfg, &source).map_err(|e| Failure::Config(e.to_string()))?;
        let failures = result.rows.iter().filter(|r| r.accuracy.is_none()).count();
        println!(
            "{variable}: {} rows, {failures} failed points",
            result.rows.len()
        );
        write_sweep_outputs(&dir, variable.name(), &result.rows)?;
    }
    Ok(())
}

fn rebuild_reports(ctx: &Context) -> Result<(), Failure> {
    let dir = ctx.out_dir.join("sweep");
    let mut found = 0;
    for variable in SweepVariable::ALL {
        let path = dir.join(format!("{variable}.csv"));
        if !path.is_file() {
            continue;
        }
        let rows = report::load_rows(&path).map_err(data("reading sweep"))?;
        write_sweep_outputs(&dir, variable.name(), &rows)?;
        found += 1;
    }
    if found == 0 {
        return Err(Failure::Data(format!(
            "no sweep files in {}",
            dir.display()
        )));
    }
    println!("rebuilt {found} report(s) in {}", dir.display());
    Ok(())
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = Context::new(&cli).and_then(|ctx| match cli.command {
        Command::Generate => generate(&ctx),
        Command::Ingest => ingest(&ctx),
        Command::Gridsearch => gridsearch(&ctx),
        Command::Sweep => sweep(&ctx),
        Command::Report => rebuild_reports(&ctx),
    });
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}
