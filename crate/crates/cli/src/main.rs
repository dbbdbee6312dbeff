use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use uqbench_core::apc::{build_ft, build_pcm, pce_moments, ApcVariant};
use uqbench_core::harness::{format_report, read_convergence, run_benchmark, BenchmarkPlan, CachedModel, RunCache};
use uqbench_core::hsg::{hsg_on_samples, HsgConfig, HARD_BAND};
use uqbench_core::model::SolverModel;
use uqbench_core::physics::ScenarioFile;
use uqbench_core::reference::{run_reference_with, surrogate_moments};
use uqbench_core::sparsegrid::{adaptive_loop, BasisVariant, SparseGridConfig};
use uqbench_core::stochastic::{generate_samples, load_samples, summarize, DistributionSpec};
use uqbench_core::vkoga::{build_candidates, schedule_run, DeltaConvention};
use uqbench_core::{Grid, SampleSet, ScenarioConfig, SolverConfig, UncertainInput};

const THREADS_ENV: &str = "UQBENCH_THREADS";

#[derive(Parser)]
#[command(name = "uqbench", version, about = "Surrogate benchmark for radial CO2 injection")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario TOML file; built-in defaults when absent.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Number of radial cells.
    #[arg(long)]
    cells: Option<usize>,
    /// Simulated time in days.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
}

impl ScenarioArgs {
    fn config(&self) -> anyhow::Result<ScenarioConfig> {
        let mut file = match &self.scenario {
            Some(p) => ScenarioFile::load(p)?,
            None => ScenarioFile::default(),
        };
        if let Some(n) = self.cells {
            file.cells = n;
        }
        if let Some(t) = self.t_end {
            file.simulation_time = t;
        }
        let cfg = file.to_config();
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Θ sample file (columns omega1, omega2, omega3).
    #[arg(long)]
    samples: PathBuf,
    /// Directory of the solver-run cache.
    #[arg(long)]
    cache: Option<PathBuf>,
}

impl RunArgs {
    fn samples(&self) -> anyhow::Result<SampleSet> {
        load_samples(&self.samples).with_context(|| format!("reading {}", self.samples.display()))
    }

    fn cache(&self) -> anyhow::Result<RunCache> {
        Ok(match &self.cache {
            Some(d) => RunCache::on_disk(d)?,
            None => RunCache::in_memory(),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// One deterministic solver run; writes r_center,saturation.
    Simulate {
        #[arg(long, allow_hyphen_values = true)]
        omega1: f64,
        #[arg(long)]
        omega2: f64,
        #[arg(long)]
        omega3: f64,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate or inspect Θ sample files.
    Samples {
        #[command(subcommand)]
        action: SamplesCommand,
    },
    /// Monte Carlo reference moments over every sample.
    Reference {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build one surrogate, save it and write its moments.
    Surrogate {
        #[command(subcommand)]
        method: SurrogateCommand,
    },
    /// Run a benchmark plan.
    Benchmark {
        #[arg(long)]
        plan: PathBuf,
    },
    /// Print the table of a finished benchmark.
    Report {
        /// Results directory holding convergence.csv.
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum SamplesCommand {
    Generate {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Inspect {
        #[arg(long)]
        samples: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ApcArg {
    Pcm,
    Ft,
}

#[derive(Clone, Copy, ValueEnum)]
enum AsgArg {
    Boundary,
    Interior,
    Modified,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Scale,
    Radius,
}

#[derive(Subcommand)]
enum SurrogateCommand {
    Apc {
        #[arg(long, value_enum)]
        variant: ApcArg,
        #[arg(long)]
        order: usize,
        #[command(flatten)]
        run: RunArgs,
        /// Output directory for the surrogate and moments files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    Asg {
        #[arg(long, value_enum, default_value = "modified")]
        variant: AsgArg,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 1)]
        max_degree: u32,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    Vkoga {
        #[arg(long)]
        delta: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,4,16,64,252,1000")]
        n_checkpoints: Vec<usize>,
        #[arg(long, value_enum, default_value = "scale")]
        convention: ConventionArg,
        /// Candidate grid points per dimension.
        #[arg(long, default_value_t = 50)]
        resolution: usize,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    Hsg {
        #[arg(long)]
        nr: u32,
        #[arg(long)]
        no: usize,
        /// Admissible node saturations as `lo,hi`.
        #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
        node_band: Option<Vec<f64>>,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn write_profile(path: &Path, r: &[f64], s: &[f64]) -> anyhow::Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "r_center,saturation")?;
    for (r, s) in r.iter().zip(s) {
        writeln!(f, "{r},{s}")?;
    }
    f.flush()?;
    Ok(())
}

fn surrogate_cmd(method: SurrogateCommand) -> anyhow::Result<()> {
    match method {
        SurrogateCommand::Apc { variant, order, run, out } => {
            let cfg = run.scenario.config()?;
            let set = run.samples()?;
            let cache = run.cache()?;
            let model = CachedModel::new(SolverModel::new(cfg, SolverConfig::default()), &cache);
            let (pce, tag) = match variant {
                ApcArg::Pcm => (build_pcm(&set, order, &model)?, ApcVariant::Pcm),
                ApcArg::Ft => (build_ft(&set, order, &model)?, ApcVariant::Ft),
            };
            let r = Grid::from_config(&cfg)?.r_centers;
            fs::create_dir_all(&out)?;
            let name = format!("apc_{tag}{order}");
            pce.save(out.join(format!("{name}.json")))?;
            pce_moments(&pce, &set, &r, cfg.t_end)?.write_csv(out.join(format!("{name}_moments.csv")))?;
            println!("{name}: {} runs ({} solver calls)", pce.n_runs(), model.solver_calls());
        }
        SurrogateCommand::Asg { variant, budget, max_degree, run, out } => {
            let cfg = run.scenario.config()?;
            let set = run.samples()?;
            let cache = run.cache()?;
            let model = CachedModel::new(SolverModel::new(cfg, SolverConfig::default()), &cache);
            let variant = match variant {
                AsgArg::Boundary => BasisVariant::Boundary,
                AsgArg::Interior => BasisVariant::Interior,
                AsgArg::Modified => BasisVariant::Modified,
            };
            let config = SparseGridConfig {
                max_degree,
                ..SparseGridConfig::with_variant(variant)
            };
            let result = adaptive_loop(&set, &model, config, budget, &[])?;
            let r = Grid::from_config(&cfg)?.r_centers;
            fs::create_dir_all(&out)?;
            let name = format!("asg_{variant}_{budget}");
            result.surrogate.save(out.join(format!("{name}.json")))?;
            result.write_history_csv(out.join(format!("{name}_history.csv")))?;
            surrogate_moments(&result.surrogate, &set, &r, cfg.t_end)?.write_csv(out.join(format!("{name}_moments.csv")))?;
            println!("{name}: {} points ({} solver calls)", result.surrogate.len(), model.solver_calls());
        }
        SurrogateCommand::Vkoga {
            delta,
            n_checkpoints,
            convention,
            resolution,
            run,
            out,
        } => {
            let cfg = run.scenario.config()?;
            let set = run.samples()?;
            let cache = run.cache()?;
            let model = CachedModel::new(SolverModel::new(cfg, SolverConfig::default()), &cache);
            let convention = match convention {
                ConventionArg::Scale => DeltaConvention::Scale,
                ConventionArg::Radius => DeltaConvention::Radius,
            };
            let candidates = build_candidates(&set, resolution)?;
            log::info!("{} candidates, {} hull facets", candidates.points.len(), candidates.hull_facets);
            let schedule = schedule_run(&candidates, &model, &[delta], &n_checkpoints, convention)?;
            let r = Grid::from_config(&cfg)?.r_centers;
            fs::create_dir_all(&out)?;
            for m in &schedule.models {
                let name = format!("vkoga_delta={delta}_n={}", m.n);
                m.surrogate.save(out.join(format!("{name}.json")))?;
                surrogate_moments(&m.surrogate, &set, &r, cfg.t_end)?.write_csv(out.join(format!("{name}_moments.csv")))?;
                println!("{name}: {} centers", m.surrogate.n_centers());
            }
            println!("{} candidates, {} solver calls", schedule.candidate_count, model.solver_calls());
        }
        SurrogateCommand::Hsg {
            nr,
            no,
            node_band,
            scenario,
            samples,
            out,
        } => {
            let cfg = scenario.config()?;
            let set: SampleSet = load_samples(&samples)?;
            let band = match node_band.as_deref() {
                Some([lo, hi]) => (*lo, *hi),
                Some(_) => bail!("--node-band takes two values"),
                None => HARD_BAND,
            };
            let hsg = HsgConfig {
                node_band: band,
                ..HsgConfig::new(nr, no)
            };
            let (state, moments) = hsg_on_samples(&set, &hsg, &cfg, &SolverConfig::default())?;
            fs::create_dir_all(&out)?;
            let name = format!("hsg_nr{nr}_no{no}");
            state.save(out.join(format!("{name}.json")))?;
            moments.write_csv(out.join(format!("{name}_moments.csv")))?;
            println!(
                "{name}: {} elements, node saturations in [{:.4}, {:.4}]",
                state.n_elements(),
                state.node_range.0,
                state.node_range.1
            );
        }
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            omega1,
            omega2,
            omega3,
            scenario,
            out,
        } => {
            let cfg = scenario.config()?;
            let omega = UncertainInput::new(omega1, omega2, omega3);
            let field = uqbench_core::solver::simulate(&omega, &cfg, &SolverConfig::default())?;
            write_profile(&out, &Grid::from_config(&cfg)?.r_centers, &field.values)?;
        }
        Command::Samples { action } => match action {
            SamplesCommand::Generate { n, seed, out } => {
                let set: SampleSet = generate_samples(&DistributionSpec::default(), n, seed)?;
                set.write_csv(&out)?;
                print!("{}", summarize(&set));
            }
            SamplesCommand::Inspect { samples } => {
                let set: SampleSet = load_samples(&samples)?;
                print!("{}", summarize(&set));
            }
        },
        Command::Reference { run, out } => {
            let cfg = run.scenario.config()?;
            let set = run.samples()?;
            let cache = run.cache()?;
            let model = CachedModel::new(SolverModel::new(cfg, SolverConfig::default()), &cache);
            let r = Grid::from_config(&cfg)?.r_centers;
            let reference = run_reference_with(&set, &model, &r, cfg.t_end)?;
            reference.moments.write_csv(&out)?;
            println!("{} samples, {} solver calls", set.len(), model.solver_calls());
        }
        Command::Surrogate { method } => surrogate_cmd(method)?,
        Command::Benchmark { plan } => {
            let plan = BenchmarkPlan::load(&plan)?;
            let outcome = run_benchmark(&plan)?;
            print!("{}", format_report(&outcome.reports));
            for f in &outcome.failures {
                eprintln!("failed: {} {}: {}", f.method, f.variant, f.message);
            }
            println!("results in {}, {} solver calls", plan.output.display(), outcome.solver_calls);
        }
        Command::Report { input } => {
            let rows = read_convergence(input.join("convergence.csv"))?;
            print!("{}", format_report(&rows));
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err
        .chain()
        .filter_map(|e| e.downcast_ref::<uqbench_core::Error>())
        .any(|e| e.is_numeric());
    if numeric {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log).init();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size the work pool: {e}");
                }
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got {v:?}");
                return ExitCode::from(1);
            }
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
