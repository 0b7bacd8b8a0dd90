use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use gnnlab::experiment::{self, parse_config, resolve_spec, ConfigEntry, ExperimentSpec, RunError};
use gnnlab::formats::{self, Dataset};
use gnnlab::sweep;
use gnnlab::verify::{self, Suite};
use gnnlab_core::theory;
use gnnlab_core::trainer::init_params;

/// Teacher-student experiments for one-layer graph neural networks.
#[derive(Parser)]
#[command(name = "gnnlab", version)]
struct Cli {
    /// Seed for data, teacher, initialization and Monte-Carlo draws.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// key=value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for sweeps and Monte-Carlo draws.
    #[arg(long, global = true, env = "GNNLAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize data, train, and write trajectory.csv, summary.txt and plot.svg.
    Run {
        #[command(flatten)]
        spec: SpecArgs,
        /// Also write the synthesized dataset under <out>/dataset.
        #[arg(long)]
        save_dataset: bool,
    },
    /// Run a verification suite: activations, gradients, xi, confinement, rate, signs.
    Verify { suite: Suite },
    /// Run the experiment over several sample sizes and seeds and write sweep.csv.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        /// Sample sizes (nodes for NGNN, graphs for GGNN), e.g. 250,1000,4000.
        #[arg(long, value_delimiter = ',')]
        ns: Vec<usize>,
        /// Seeds as a list `0,1,2` or a range `0..10`.
        #[arg(long, default_value = "0")]
        seeds: String,
    },
    /// Estimate the auxiliary matrix Ξ and write xi.csv.
    XiEstimate {
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Print the convergence constants, learning-rate bound and sample condition.
    TheoryReport {
        #[command(flatten)]
        spec: SpecArgs,
    },
}

/// Experiment keys; each mirrors a config key of the same name.
#[derive(Args, Default)]
struct SpecArgs {
    /// Built-in preset: ngnn-relu or ggnn-relu.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    /// relu, leaky_relu:<slope>, sigmoid, tanh, softplus, swish.
    #[arg(long)]
    activation: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long = "d-out", alias = "d_out")]
    d_out: Option<String>,
    /// Node count for NGNN.
    #[arg(long)]
    n: Option<String>,
    #[arg(long = "n-graphs", alias = "n_graphs")]
    n_graphs: Option<String>,
    #[arg(long = "nodes-per-graph", alias = "nodes_per_graph")]
    nodes_per_graph: Option<String>,
    /// Edge probability.
    #[arg(long)]
    p: Option<String>,
    /// uniform, particular:<i> or attention:<w;w;...>.
    #[arg(long)]
    aggregation: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long = "noise-var", alias = "noise_var")]
    noise_var: Option<String>,
    /// monte_carlo or empirical.
    #[arg(long)]
    xi: Option<String>,
    #[arg(long = "xi-samples", alias = "xi_samples")]
    xi_samples: Option<String>,
    /// oracle_signs or random_signsearch.
    #[arg(long)]
    init: Option<String>,
    #[arg(long = "cond-threshold", alias = "cond_threshold")]
    cond_threshold: Option<String>,
    #[arg(long = "c-abs", alias = "c_abs")]
    c_abs: Option<String>,
    #[arg(long = "probe-epochs", alias = "probe_epochs")]
    probe_epochs: Option<String>,
    /// reciprocal_mean or mean_degree.
    #[arg(long = "degree-convention", alias = "degree_convention")]
    degree_convention: Option<String>,
}

impl SpecArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let fields = [
            ("mode", &self.mode),
            ("activation", &self.activation),
            ("d", &self.d),
            ("d_out", &self.d_out),
            ("n", &self.n),
            ("n_graphs", &self.n_graphs),
            ("nodes_per_graph", &self.nodes_per_graph),
            ("p", &self.p),
            ("aggregation", &self.aggregation),
            ("alpha", &self.alpha),
            ("epochs", &self.epochs),
            ("noise_var", &self.noise_var),
            ("xi", &self.xi),
            ("xi_samples", &self.xi_samples),
            ("init", &self.init),
            ("cond_threshold", &self.cond_threshold),
            ("c_abs", &self.c_abs),
            ("probe_epochs", &self.probe_epochs),
            ("degree_convention", &self.degree_convention),
        ];
        fields.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
    }
}

/// Failure classes with their exit codes.
enum Failure {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
    Verification(String),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Verification(_) => 4,
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.into())
        } else if matches!(e, RunError::Core(_)) {
            Failure::Config(e.into())
        } else {
            Failure::Other(e.into())
        }
    }
}

impl From<formats::FormatError> for Failure {
    fn from(e: formats::FormatError) -> Self {
        Failure::Other(e.into())
    }
}

fn load_config(path: Option<&Path>) -> Result<(Vec<ConfigEntry>, String), Failure> {
    let Some(path) = path else {
        return Ok((Vec::new(), String::new()));
    };
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {name}")).map_err(Failure::Config)?;
    let entries = parse_config(&text, &name).map_err(|e| Failure::Config(e.into()))?;
    Ok((entries, name))
}

fn spec_from(cli: &Cli, args: &SpecArgs) -> Result<ExperimentSpec, Failure> {
    let (entries, name) = load_config(cli.config.as_deref())?;
    let mut overrides = args.overrides();
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    resolve_spec(args.preset.as_deref(), &entries, &name, &overrides).map_err(|e| Failure::Config(e.into()))
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Run { spec, save_dataset } => {
            let spec = spec_from(cli, spec)?;
            let prepared = experiment::prepare(&spec).map_err(RunError::from)?;
            if *save_dataset {
                let dir = cli.out.join("dataset");
                match &prepared.dataset {
                    Dataset::Ngnn(ds) => formats::write_ngnn_dataset(&dir, ds)?,
                    Dataset::Ggnn(ds) => formats::write_ggnn_dataset(&dir, ds)?,
                }
            }
            let result = experiment::run_prepared(&spec, prepared)?;
            experiment::write_run(&cli.out, &result)?;
            println!("{}", result.summary());
            Ok(())
        }
        Command::Verify { suite } => {
            let report = verify::run_suite(*suite, cli.seed.unwrap_or(0))?;
            println!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Verification(format!("{} check(s) failed", report.failures().count())))
            }
        }
        Command::Sweep { spec, ns, seeds } => {
            let base = spec_from(cli, spec)?;
            let seeds = sweep::parse_list(seeds).map_err(|e| Failure::Config(anyhow::anyhow!(e)))?;
            let ns = if ns.is_empty() { vec![base.samples()] } else { ns.clone() };
            let rows = sweep::sweep(&base, &ns, &seeds, Some(&cli.out))?;
            print!("{}", sweep::sweep_csv(&rows));
            Ok(())
        }
        Command::XiEstimate { spec } => {
            let spec = spec_from(cli, spec)?;
            let prepared = experiment::prepare(&spec).map_err(RunError::from)?;
            let op = experiment::estimate_xi(&prepared.data, spec.activation, spec.xi, spec.seed).map_err(RunError::from)?;
            let text = formats::xi_csv(&op);
            formats::write_atomic(&cli.out.join("xi.csv"), text.as_bytes())?;
            print!("{text}");
            Ok(())
        }
        Command::TheoryReport { spec } => {
            let spec = spec_from(cli, spec)?;
            let prepared = experiment::prepare(&spec).map_err(RunError::from)?;
            let cfg = spec.train_config();
            let init = init_params(Some(&prepared.teacher), spec.d, spec.d_out, cfg.init, spec.seed).map_err(RunError::from)?;
            let op = experiment::estimate_xi(&prepared.data, spec.activation, spec.xi, spec.seed).map_err(RunError::from)?;
            let xi_inv_norm = op.inverse_norm(spec.cond_threshold).map_err(RunError::from)?;
            let mut text = String::new();
            for (k, w0) in init.iter().enumerate() {
                let c = theory::constants(&experiment::theory_input(&spec, &prepared.data, w0, &prepared.teacher));
                if init.len() > 1 {
                    text.push_str(&format!("# sign combination {k}\n"));
                }
                text.push_str(&experiment::theory_report(&spec, &c, xi_inv_norm, prepared.teacher.w.inner(&w0.w)));
            }
            formats::write_atomic(&cli.out.join("theory.txt"), text.as_bytes())?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(e) | Failure::Numerical(e) | Failure::Other(e) => eprintln!("error: {e:#}"),
                Failure::Verification(m) => eprintln!("verification failed: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
