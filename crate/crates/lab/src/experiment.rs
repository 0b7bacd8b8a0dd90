//! Experiment specifications, presets, key=value configs and single runs.

use std::fmt::Write as _;
use std::path::Path;

use gnnlab_core::graph::DegreeConvention;
use gnnlab_core::model::AggregationMode;
use gnnlab_core::theory::{self, SampleInput, TheoryConstants, TheoryInput};
use gnnlab_core::trainer::{self, TrainError, TrainOutcome};
use gnnlab_core::xi::{self, XiAccumulator, XiOperator};
use gnnlab_core::{
    er_graph, sample_teacher, synth_ggnn, synth_ngnn, Activation, GgnnSynth, InitMode, Matrix, Mode, Params, TrainConfig,
    TrainingData, XiConfig,
};
use rayon::prelude::*;

use crate::formats::{self, parse_aggregation, real, Dataset, FormatError};

/// Everything needed to reproduce one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub activation: Activation,
    pub d: usize,
    pub d_out: usize,
    /// Node count of the single NGNN graph.
    pub n: usize,
    pub n_graphs: usize,
    pub nodes_per_graph: usize,
    pub p: f64,
    pub aggregation: AggregationMode,
    pub alpha: f64,
    pub epochs: usize,
    pub noise_var: f64,
    pub seed: u64,
    pub xi: XiConfig,
    pub init: InitMode,
    pub cond_threshold: f64,
    pub c_abs: f64,
    pub probe_epochs: usize,
    pub degree_convention: DegreeConvention,
}

pub const PRESETS: [&str; 2] = ["ngnn-relu", "ggnn-relu"];

impl ExperimentSpec {
    pub fn preset(name: &str) -> Option<Self> {
        let base = ExperimentSpec {
            mode: Mode::Ngnn,
            activation: Activation::Relu,
            d: 2,
            d_out: 1,
            n: 1000,
            n_graphs: 1000,
            nodes_per_graph: 5,
            p: 0.5,
            aggregation: AggregationMode::Uniform,
            alpha: 0.1,
            epochs: 500,
            noise_var: 0.04,
            seed: 0,
            xi: XiConfig::default(),
            init: InitMode::OracleSigns,
            cond_threshold: xi::DEFAULT_COND_THRESHOLD,
            c_abs: 1.0,
            probe_epochs: 50,
            degree_convention: DegreeConvention::ReciprocalMean,
        };
        match name {
            "ngnn-relu" => Some(base),
            "ggnn-relu" => Some(ExperimentSpec { mode: Mode::Ggnn, alpha: 0.005, epochs: 1000, ..base }),
            _ => None,
        }
    }

    /// Sets one key; keys mirror the CLI flags with `-` or `_` separators.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("invalid value {v:?} for {key}"))
        }
        match key.trim().replace('-', "_").as_str() {
            "mode" => {
                self.mode = match value.to_ascii_lowercase().as_str() {
                    "ngnn" => Mode::Ngnn,
                    "ggnn" => Mode::Ggnn,
                    _ => return Err(format!("mode must be ngnn or ggnn, got {value:?}")),
                }
            }
            "activation" => self.activation = value.parse().map_err(|e| format!("{e}"))?,
            "d" => self.d = num(key, value)?,
            "d_out" => self.d_out = num(key, value)?,
            "n" => self.n = num(key, value)?,
            "n_graphs" => self.n_graphs = num(key, value)?,
            "nodes_per_graph" => self.nodes_per_graph = num(key, value)?,
            "p" => self.p = num(key, value)?,
            "aggregation" => self.aggregation = parse_aggregation(value)?,
            "alpha" => self.alpha = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "noise_var" => self.noise_var = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "xi" => {
                self.xi = match value.to_ascii_lowercase().as_str() {
                    "empirical" => XiConfig::Empirical,
                    "mc" | "monte_carlo" => XiConfig::MonteCarlo { samples: xi::DEFAULT_MC_SAMPLES },
                    _ => return Err(format!("xi must be monte_carlo or empirical, got {value:?}")),
                }
            }
            "xi_samples" => self.xi = XiConfig::MonteCarlo { samples: num(key, value)? },
            "init" => {
                self.init = match value.to_ascii_lowercase().as_str() {
                    "oracle_signs" => InitMode::OracleSigns,
                    "random_signsearch" => InitMode::RandomSignSearch,
                    _ => return Err(format!("init must be oracle_signs or random_signsearch, got {value:?}")),
                }
            }
            "cond_threshold" => self.cond_threshold = num(key, value)?,
            "c_abs" => self.c_abs = num(key, value)?,
            "probe_epochs" => self.probe_epochs = num(key, value)?,
            "degree_convention" => {
                self.degree_convention = match value.to_ascii_lowercase().as_str() {
                    "reciprocal_mean" => DegreeConvention::ReciprocalMean,
                    "mean_degree" => DegreeConvention::MeanDegree,
                    _ => return Err(format!("degree_convention must be reciprocal_mean or mean_degree, got {value:?}")),
                }
            }
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [("d", self.d), ("d_out", self.d_out)];
        for (k, v) in positive {
            if v == 0 {
                return Err(format!("{k} must be positive"));
            }
        }
        match self.mode {
            Mode::Ngnn if self.n == 0 => return Err("n must be positive".into()),
            Mode::Ggnn if self.n_graphs == 0 || self.nodes_per_graph == 0 => {
                return Err("n_graphs and nodes_per_graph must be positive".into())
            }
            _ => {}
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(format!("p must lie in [0, 1], got {}", self.p));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(format!("noise_var must be non-negative, got {}", self.noise_var));
        }
        if let XiConfig::MonteCarlo { samples: 0 } = self.xi {
            return Err("xi_samples must be positive".into());
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            xi: self.xi,
            init: self.init,
            cond_threshold: self.cond_threshold,
            probe_epochs: self.probe_epochs,
            c_abs: self.c_abs,
            degree_convention: self.degree_convention,
            ..TrainConfig::new(self.alpha, self.epochs, self.activation, self.seed)
        }
    }

    /// Sample count: nodes for NGNN, graphs for GGNN.
    pub fn samples(&self) -> usize {
        match self.mode {
            Mode::Ngnn => self.n,
            Mode::Ggnn => self.n_graphs,
        }
    }

    pub fn describe(&self) -> String {
        let mode = match self.mode {
            Mode::Ngnn => format!("ngnn n={} p={}", self.n, self.p),
            Mode::Ggnn => format!(
                "ggnn graphs={}x{} p={} aggregation={}",
                self.n_graphs,
                self.nodes_per_graph,
                self.p,
                formats::aggregation_name(&self.aggregation)
            ),
        };
        format!(
            "{mode} activation={} d={} d_out={} alpha={} epochs={} noise_var={} seed={}",
            self.activation, self.d, self.d_out, self.alpha, self.epochs, self.noise_var, self.seed
        )
    }
}

/// One `key=value` entry of a config file.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, thiserror::Error)]
#[error("{source_name}:{line}: {msg}")]
pub struct ConfigError {
    pub source_name: String,
    pub line: usize,
    pub msg: String,
}

/// Flat `key=value` text; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str, source_name: &str) -> Result<Vec<ConfigEntry>, ConfigError> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError { source_name: source_name.into(), line: idx + 1, msg: format!("expected key=value, got {line:?}") });
        };
        if key.trim().is_empty() {
            return Err(ConfigError { source_name: source_name.into(), line: idx + 1, msg: "empty key".into() });
        }
        entries.push(ConfigEntry { key: key.trim().to_string(), value: value.trim().to_string(), line: idx + 1 });
    }
    Ok(entries)
}

/// Builds a spec from an optional preset, config entries and flag
/// overrides, in that order of precedence (flags win).
pub fn resolve_spec(
    preset: Option<&str>,
    config: &[ConfigEntry],
    config_name: &str,
    overrides: &[(String, String)],
) -> Result<ExperimentSpec, ConfigError> {
    let at = |line: usize, msg: String| ConfigError { source_name: config_name.to_string(), line, msg };
    let flag_err = |msg: String| ConfigError { source_name: "command line".into(), line: 0, msg };

    let config_preset = config.iter().rev().find(|e| e.key == "preset");
    let name = preset.map(str::to_string).or_else(|| config_preset.map(|e| e.value.clone())).unwrap_or_else(|| "ngnn-relu".into());
    let mut spec = ExperimentSpec::preset(&name).ok_or_else(|| {
        let msg = format!("unknown preset {name:?} (known: {})", PRESETS.join(", "));
        match (preset, config_preset) {
            (None, Some(e)) => at(e.line, msg),
            _ => flag_err(msg),
        }
    })?;
    for e in config.iter().filter(|e| e.key != "preset") {
        spec.set(&e.key, &e.value).map_err(|m| at(e.line, m))?;
    }
    for (k, v) in overrides {
        spec.set(k, v).map_err(flag_err)?;
    }
    spec.validate().map_err(flag_err)?;
    Ok(spec)
}

/// Synthesized data for one spec, with the teacher that generated it.
pub struct Prepared {
    pub teacher: Params,
    pub dataset: Dataset,
    pub data: TrainingData,
}

pub fn prepare(spec: &ExperimentSpec) -> gnnlab_core::Result<Prepared> {
    let teacher = sample_teacher(spec.d, spec.d_out, spec.seed)?;
    let (dataset, data) = match spec.mode {
        Mode::Ngnn => {
            let graph = er_graph(spec.n, spec.p, spec.seed)?;
            let ds = synth_ngnn(graph, &teacher, spec.activation, spec.noise_var, spec.seed)?;
            let data = TrainingData::ngnn(&ds, spec.degree_convention)?;
            (Dataset::Ngnn(ds), data)
        }
        Mode::Ggnn => {
            let synth = GgnnSynth {
                n_graphs: spec.n_graphs,
                nodes_per_graph: spec.nodes_per_graph,
                p: spec.p,
                aggregation: spec.aggregation.clone(),
            };
            let ds = synth_ggnn(&synth, &teacher, spec.activation, spec.noise_var, spec.seed)?;
            let data = TrainingData::ggnn(&ds)?;
            (Dataset::Ggnn(ds), data)
        }
    };
    Ok(Prepared { teacher, dataset, data })
}

/// Ξ with Monte-Carlo draws spread over the current rayon pool. Draws use
/// per-index RNG streams and are summed in index order, so the result is
/// bit-identical to the serial estimator for any thread count.
pub fn estimate_xi(data: &TrainingData, kind: Activation, cfg: XiConfig, seed: u64) -> gnnlab_core::Result<XiOperator> {
    let XiConfig::MonteCarlo { samples } = cfg else {
        return data.estimate_xi(kind, cfg, seed);
    };
    let d = data.feature_dim();
    let draws: Vec<Matrix> = match data {
        TrainingData::Ngnn { op, .. } => {
            (0..samples).into_par_iter().map(|k| xi::ngnn_draw(op, kind, d, seed, k)).collect::<Result<_, _>>()?
        }
        TrainingData::Ggnn { graphs, .. } => {
            let structures: Vec<_> =
                graphs.iter().map(|g| xi::GraphStructure { conv: &g.op, aggregation: &g.aggregation }).collect();
            (0..samples).into_par_iter().map(|k| xi::ggnn_draw(&structures, kind, d, seed, k)).collect::<Result<_, _>>()?
        }
    };
    let mut acc = XiAccumulator::new(d);
    for m in &draws {
        acc.push(m);
    }
    acc.finish()
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Core(#[from] gnnlab_core::Error),
    #[error("{0}")]
    Train(#[from] TrainError),
    #[error("{0}")]
    Format(#[from] FormatError),
}

impl RunError {
    /// Whether the failure is numerical (divergence, conditioning, degenerate step).
    pub fn is_numerical(&self) -> bool {
        match self {
            RunError::Core(e) => e.is_numerical(),
            RunError::Train(e) => e.error.is_numerical(),
            RunError::Format(_) => false,
        }
    }
}

pub struct RunResult {
    pub spec: ExperimentSpec,
    pub teacher: Params,
    pub outcome: TrainOutcome,
}

impl RunResult {
    pub fn final_record(&self) -> &gnnlab_core::EpochRecord {
        self.outcome.trajectory.last().expect("trajectory holds at least epoch 0")
    }

    pub fn summary(&self) -> String {
        let last = self.final_record();
        let opt = |x: Option<f64>| x.map_or_else(String::new, real);
        format!(
            "final_dist_w={} final_dist_v={} final_loss={} confinement_violations={} epochs={}",
            opt(last.dist_w),
            opt(last.dist_v),
            real(last.loss),
            self.outcome.trajectory.confinement_violations(),
            last.epoch
        )
    }
}

pub fn run(spec: &ExperimentSpec) -> Result<RunResult, RunError> {
    let prepared = prepare(spec)?;
    run_prepared(spec, prepared)
}

pub fn run_prepared(spec: &ExperimentSpec, prepared: Prepared) -> Result<RunResult, RunError> {
    let cfg = spec.train_config();
    cfg.validate()?;
    let xi_op = estimate_xi(&prepared.data, spec.activation, spec.xi, spec.seed)?;
    let outcome = trainer::train_with_xi(&cfg, &prepared.data, Some(&prepared.teacher), xi_op)?;
    Ok(RunResult { spec: spec.clone(), teacher: prepared.teacher, outcome })
}

/// Writes `trajectory.csv`, `summary.txt` and `plot.svg` into `dir`.
pub fn write_run(dir: &Path, result: &RunResult) -> Result<(), FormatError> {
    let t = &result.outcome.trajectory;
    formats::write_atomic(&dir.join("trajectory.csv"), formats::trajectory_csv(t).as_bytes())?;
    let summary = format!("# {}\n{}\n", result.spec.describe(), result.summary());
    formats::write_atomic(&dir.join("summary.txt"), summary.as_bytes())?;
    formats::write_atomic(&dir.join("plot.svg"), crate::plot::distance_svg(t, &result.spec.describe()).as_bytes())
}

pub fn theory_input(spec: &ExperimentSpec, data: &TrainingData, init: &Params, teacher: &Params) -> TheoryInput {
    TheoryInput {
        structure: data.structure(),
        d: spec.d,
        d_out: spec.d_out,
        l_sigma: spec.activation.l_sigma(),
        alpha: spec.alpha,
        v0: init.v.clone(),
        v_star: teacher.v.clone(),
        c_abs: spec.c_abs,
    }
}

/// Structured text listing every constant, the learning-rate bound and both
/// sides of the sample condition.
pub fn theory_report(spec: &ExperimentSpec, c: &TheoryConstants, xi_inv_norm: f64, tr_w0: f64) -> String {
    let s = SampleInput { n: spec.samples(), sigma0: spec.activation.sigma0(), nu: spec.noise_var.sqrt(), xi_inv_norm };
    let stat = theory::statistical_terms(c, &s);
    let cond = theory::sample_condition(c, &s, tr_w0);
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k:<22} {v}");
    };
    line("spec", spec.describe());
    match c.structure {
        theory::Structure::Node { dbar, d_min } => {
            line("dbar", real(dbar));
            line("d_min", d_min.to_string());
        }
        theory::Structure::Graph { n_max } => line("n_max", n_max.to_string()),
    }
    line("l_sigma", real(c.l_sigma));
    line("sigma0", real(s.sigma0));
    line("c_abs", real(c.c_abs));
    line("gamma1_radicand", real(c.gamma1_radicand));
    line("gamma1_valid", c.gamma1_valid.to_string());
    if !c.gamma1_valid {
        line("gamma1_invalid_alpha", real(c.alpha));
    }
    line("gamma1", real(c.gamma1));
    line("gamma2", real(c.gamma2));
    line("gamma3", real(c.gamma3));
    line("D", real(c.radius));
    line("rho", real(c.rho));
    line("D0", real(c.d0));
    line("alpha", real(c.alpha));
    line("alpha_bound_terms", format!("{} {}", real(c.alpha_bound_terms.0), real(c.alpha_bound_terms.1)));
    line("alpha_max", real(c.alpha_max));
    line("alpha_within_bound", c.alpha_within_bound().to_string());
    line("xi_inv_norm", real(xi_inv_norm));
    line("a_w", real(stat.a_w));
    line("eta_w", real(stat.eta_w));
    line("a_v", real(stat.a_v));
    line("eta_v", real(stat.eta_v));
    line("sample_condition_lhs", real(cond.lhs));
    line("sample_condition_rhs", real(cond.rhs));
    line("sample_condition_holds", cond.holds.to_string());
    out
}
