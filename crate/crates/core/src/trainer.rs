//! Approximate gradient descent with renormalization of W.
//!
//! Each epoch, with convolved features `C = PH` and residual `r = y − ŷ`:
//!
//! ```text
//! NGNN  G^W = −(1/n) Ξ⁻¹ Cᵀ r vᵀ                g^v = −(1/n) σ(CW)ᵀ r
//! GGNN  G^W = −(1/n) Ξ⁻¹ Σ_j r_j (a_jC_j)ᵀ vᵀ   g^v = −(1/n) Σ_j r_j (a_jσ(C_jW))ᵀ
//! U = W − αG^W,  W ← U/‖U‖_F,  v ← v − αg^v
//! ```
//!
//! g^v is the exact gradient of `(1/2n)‖y − ŷ‖²`. G^W replaces the
//! activation derivative with Ξ⁻¹. Ξ is estimated once, before the loop.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::graph::{self, conv_operator, ConvOperator, DegreeConvention};
use crate::linalg::{self, Matrix};
use crate::model::{self, Aggregation, Params};
use crate::rng::{self, streams};
use crate::teacher::{unit_gaussian_matrix, GgnnDataset, NgnnDataset};
use crate::theory::{self, Structure, TheoryConstants, TheoryInput};
use crate::xi::{self, XiEstimator, XiOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Ngnn,
    Ggnn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMode {
    /// Race all four sign flips of a random draw.
    RandomSignSearch,
    /// Flip signs against the known teacher so `Tr(W*ᵀW₀) ≥ 0` and `v*ᵀv₀ ≥ 0`.
    OracleSigns,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XiConfig {
    MonteCarlo { samples: usize },
    Empirical,
}

impl Default for XiConfig {
    fn default() -> Self {
        XiConfig::MonteCarlo { samples: xi::DEFAULT_MC_SAMPLES }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub alpha: f64,
    pub epochs: usize,
    pub activation: Activation,
    pub xi: XiConfig,
    pub seed: u64,
    pub init: InitMode,
    pub cond_threshold: f64,
    /// Probe length of the sign search, capped at `epochs`.
    pub probe_epochs: usize,
    /// Loss above which a run is aborted.
    pub divergence_threshold: f64,
    pub c_abs: f64,
    pub degree_convention: DegreeConvention,
}

impl TrainConfig {
    pub fn new(alpha: f64, epochs: usize, activation: Activation, seed: u64) -> Self {
        TrainConfig {
            alpha,
            epochs,
            activation,
            xi: XiConfig::default(),
            seed,
            init: InitMode::OracleSigns,
            cond_threshold: xi::DEFAULT_COND_THRESHOLD,
            probe_epochs: 50,
            divergence_threshold: 1e12,
            c_abs: 1.0,
            degree_convention: DegreeConvention::ReciprocalMean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!("learning rate must be positive, got {}", self.alpha)));
        }
        if let XiConfig::MonteCarlo { samples: 0 } = self.xi {
            return Err(Error::InvalidConfig("Monte-Carlo estimate needs at least one sample".into()));
        }
        if !(self.c_abs > 0.0) {
            return Err(Error::InvalidConfig("c_abs must be positive".into()));
        }
        Ok(())
    }
}

/// One graph of graph-level training data with its convolved features.
#[derive(Clone, Debug)]
pub struct ConvolvedGraph {
    pub op: ConvOperator,
    pub features: Matrix,
    pub aggregation: Aggregation,
    /// `C_j = P_j H_j`.
    pub conv: Matrix,
    /// `a_j C_j`.
    pub agg_conv: Vec<f64>,
}

/// Training data with the graph convolution applied once up front.
#[derive(Clone, Debug)]
pub enum TrainingData {
    Ngnn {
        op: ConvOperator,
        features: Matrix,
        conv: Matrix,
        labels: Vec<f64>,
        dbar: f64,
        d_min: usize,
    },
    Ggnn {
        graphs: Vec<ConvolvedGraph>,
        labels: Vec<f64>,
        n_max: usize,
    },
}

impl TrainingData {
    pub fn ngnn(ds: &NgnnDataset, convention: DegreeConvention) -> Result<Self> {
        let op = conv_operator(&ds.graph);
        let conv = op.apply(&ds.features)?;
        if ds.labels.len() != conv.rows() {
            return Err(Error::InvalidSize("one label per node is required"));
        }
        Ok(TrainingData::Ngnn {
            op,
            features: ds.features.clone(),
            conv,
            labels: ds.labels.clone(),
            dbar: graph::dbar(&ds.graph, convention),
            d_min: ds.graph.min_degree(),
        })
    }

    pub fn ggnn(ds: &GgnnDataset) -> Result<Self> {
        if ds.labels.len() != ds.graphs.len() {
            return Err(Error::InvalidSize("one label per graph is required"));
        }
        if ds.graphs.is_empty() {
            return Err(Error::InvalidSize("need at least one graph"));
        }
        let graphs = ds
            .graphs
            .iter()
            .map(|g| {
                let op = conv_operator(&g.graph);
                let conv = op.apply(&g.features)?;
                let agg_conv = g.aggregation.reduce(&conv)?;
                Ok(ConvolvedGraph { op, features: g.features.clone(), aggregation: g.aggregation.clone(), conv, agg_conv })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainingData::Ggnn { graphs, labels: ds.labels.clone(), n_max: ds.n_max() })
    }

    pub fn mode(&self) -> Mode {
        match self {
            TrainingData::Ngnn { .. } => Mode::Ngnn,
            TrainingData::Ggnn { .. } => Mode::Ggnn,
        }
    }

    /// Number of samples: nodes for NGNN, graphs for GGNN.
    pub fn n(&self) -> usize {
        self.labels().len()
    }

    pub fn labels(&self) -> &[f64] {
        match self {
            TrainingData::Ngnn { labels, .. } | TrainingData::Ggnn { labels, .. } => labels,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            TrainingData::Ngnn { conv, .. } => conv.cols(),
            TrainingData::Ggnn { graphs, .. } => graphs[0].conv.cols(),
        }
    }

    pub fn structure(&self) -> Structure {
        match self {
            TrainingData::Ngnn { dbar, d_min, .. } => Structure::Node { dbar: *dbar, d_min: *d_min },
            TrainingData::Ggnn { n_max, .. } => Structure::Graph { n_max: *n_max },
        }
    }

    /// Model predictions `ŷ`.
    pub fn predict(&self, params: &Params, kind: Activation) -> Result<Vec<f64>> {
        match self {
            TrainingData::Ngnn { conv, .. } => model::forward_convolved(conv, params, kind),
            TrainingData::Ggnn { graphs, .. } => {
                graphs.iter().map(|g| model::ggnn_forward_one(&g.conv, &g.aggregation, params, kind)).collect()
            }
        }
    }

    pub fn residuals(&self, params: &Params, kind: Activation) -> Result<Vec<f64>> {
        let pred = self.predict(params, kind)?;
        Ok(linalg::sub_vec(self.labels(), &pred))
    }

    /// Reported loss `(1/n)‖y − ŷ‖²`.
    pub fn loss(&self, params: &Params, kind: Activation) -> Result<f64> {
        let r = self.residuals(params, kind)?;
        Ok(linalg::dot(&r, &r) / self.n() as f64)
    }

    /// Objective `(1/2n)‖y − ŷ‖²` whose v-gradient is [`grad_v`].
    pub fn objective(&self, params: &Params, kind: Activation) -> Result<f64> {
        Ok(0.5 * self.loss(params, kind)?)
    }

    pub fn estimate_xi(&self, kind: Activation, cfg: XiConfig, seed: u64) -> Result<XiOperator> {
        let d = self.feature_dim();
        match self {
            TrainingData::Ngnn { op, features, .. } => {
                let est = match cfg {
                    XiConfig::MonteCarlo { samples } => XiEstimator::MonteCarlo { samples, seed },
                    XiConfig::Empirical => XiEstimator::Empirical(features),
                };
                xi::estimate_xi_ngnn(op, kind, d, est)
            }
            TrainingData::Ggnn { graphs, .. } => {
                let structures: Vec<_> =
                    graphs.iter().map(|g| xi::GraphStructure { conv: &g.op, aggregation: &g.aggregation }).collect();
                match cfg {
                    XiConfig::MonteCarlo { samples } => {
                        xi::estimate_xi_ggnn(&structures, kind, d, XiEstimator::MonteCarlo { samples, seed })
                    }
                    XiConfig::Empirical => {
                        let feats: Vec<Matrix> = graphs.iter().map(|g| g.features.clone()).collect();
                        xi::estimate_xi_ggnn(&structures, kind, d, XiEstimator::Empirical(&feats))
                    }
                }
            }
        }
    }
}

/// `Σ` of the per-sample feature term of G^W: `Cᵀr` or `Σ_j r_j (a_jC_j)ᵀ`.
fn feature_residual(data: &TrainingData, r: &[f64]) -> Result<Vec<f64>> {
    match data {
        TrainingData::Ngnn { conv, .. } => conv.t_matvec(r),
        TrainingData::Ggnn { graphs, .. } => {
            let mut s = alloc::vec![0.0; data.feature_dim()];
            for (g, &rj) in graphs.iter().zip(r) {
                for (sk, &ck) in s.iter_mut().zip(&g.agg_conv) {
                    *sk += rj * ck;
                }
            }
            Ok(s)
        }
    }
}

fn grad_w_from_residuals(data: &TrainingData, params: &Params, r: &[f64], xi_op: &XiOperator, cond_threshold: f64) -> Result<Matrix> {
    let s = feature_residual(data, r)?;
    let stack = Matrix::column(&s).matmul(&Matrix::from_rows(&[&params.v]))?;
    let solved = xi::solve_inverse(xi_op, &stack, cond_threshold)?;
    Ok(solved.scale(-1.0 / data.n() as f64))
}

fn grad_v_from_residuals(data: &TrainingData, params: &Params, kind: Activation, r: &[f64]) -> Result<Vec<f64>> {
    let n = data.n() as f64;
    let mut g = match data {
        TrainingData::Ngnn { conv, .. } => model::hidden(conv, params, kind)?.t_matvec(r)?,
        TrainingData::Ggnn { graphs, .. } => {
            let mut acc = alloc::vec![0.0; params.d_out()];
            for (gr, &rj) in graphs.iter().zip(r) {
                let pooled = gr.aggregation.reduce(&model::hidden(&gr.conv, params, kind)?)?;
                for (a, &p) in acc.iter_mut().zip(&pooled) {
                    *a += rj * p;
                }
            }
            acc
        }
    };
    g.iter_mut().for_each(|x| *x *= -1.0 / n);
    Ok(g)
}

/// Approximate W-gradient.
pub fn grad_w(data: &TrainingData, params: &Params, kind: Activation, xi_op: &XiOperator, cond_threshold: f64) -> Result<Matrix> {
    let r = data.residuals(params, kind)?;
    grad_w_from_residuals(data, params, &r, xi_op, cond_threshold)
}

/// Exact gradient of `(1/2n)‖y − ŷ‖²` with respect to v.
pub fn grad_v(data: &TrainingData, params: &Params, kind: Activation) -> Result<Vec<f64>> {
    let r = data.residuals(params, kind)?;
    grad_v_from_residuals(data, params, kind, &r)
}

pub const DEGENERATE_NORM: f64 = 1e-14;

pub fn step(params: &Params, grad_w: &Matrix, grad_v: &[f64], alpha: f64) -> Result<Params> {
    let mut u = params.w.clone();
    u.axpy(-alpha, grad_w)?;
    let norm = u.frobenius_norm();
    if !(norm > DEGENERATE_NORM) {
        return Err(Error::DegenerateUpdate(norm));
    }
    let v = params.v.iter().zip(grad_v).map(|(v, g)| v - alpha * g).collect();
    Params::new(u.scale(1.0 / norm), v)
}

/// Initial parameters: one candidate for oracle signs, four sign flips of
/// one random draw for the sign search.
pub fn init_params(teacher: Option<&Params>, d: usize, d_out: usize, mode: InitMode, seed: u64) -> Result<Vec<Params>> {
    let mut r = rng::stream(seed, streams::INIT);
    let base = Params::new(unit_gaussian_matrix(&mut r, d, d_out), rng::gaussian_vec(&mut r, d_out))?;
    match mode {
        InitMode::RandomSignSearch => Ok(sign_combos(&base)),
        InitMode::OracleSigns => {
            let t = teacher.ok_or_else(|| Error::InvalidConfig("oracle sign initialization needs the teacher".into()))?;
            let flip_w = t.w.inner(&base.w) < 0.0;
            let flip_v = linalg::dot(&t.v, &base.v) < 0.0;
            Ok(alloc::vec![base.negated(flip_w, flip_v)])
        }
    }
}

/// `(W, v), (−W, v), (W, −v), (−W, −v)`.
pub fn sign_combos(p: &Params) -> Vec<Params> {
    alloc::vec![p.negated(false, false), p.negated(true, false), p.negated(false, true), p.negated(true, true)]
}

/// Whether `Tr(W*ᵀW₀) ≥ 0` and `v*ᵀv₀ ≥ 0`.
pub fn satisfies_init_condition(init: &Params, teacher: &Params) -> bool {
    teacher.w.inner(&init.w) >= 0.0 && linalg::dot(&teacher.v, &init.v) >= 0.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub dist_w: Option<f64>,
    pub dist_v: Option<f64>,
    pub loss: f64,
    pub confined_w: Option<bool>,
    pub confined_v: Option<bool>,
    pub w_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<EpochRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// Epochs at which either confinement flag is false.
    pub fn confinement_violations(&self) -> usize {
        self.records.iter().filter(|r| r.confined_w == Some(false) || r.confined_v == Some(false)).count()
    }

    pub fn max_unit_norm_error(&self) -> f64 {
        self.records.iter().skip(1).map(|r| (r.w_norm - 1.0).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: Params,
    pub init: Params,
    pub trajectory: Trajectory,
    pub xi: XiOperator,
    pub constants: Option<TheoryConstants>,
    /// Index into [`sign_combos`] and the probe losses, when sign search ran.
    pub sign_search: Option<(usize, [f64; 4])>,
}

#[derive(Clone, Debug)]
pub struct TrainError {
    pub epoch: usize,
    pub error: Error,
    pub trajectory: Trajectory,
}

impl core::fmt::Display for TrainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "epoch {}: {}", self.epoch, self.error)
    }
}

impl core::error::Error for TrainError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for TrainError {
    fn from(error: Error) -> Self {
        TrainError { epoch: 0, error, trajectory: Trajectory::default() }
    }
}

/// State of a single run of the update loop.
struct Run<'a> {
    data: &'a TrainingData,
    cfg: &'a TrainConfig,
    xi: &'a XiOperator,
    teacher: Option<&'a Params>,
    constants: Option<TheoryConstants>,
    init: Params,
    params: Params,
    epoch: usize,
    trajectory: Trajectory,
}

impl<'a> Run<'a> {
    fn new(data: &'a TrainingData, cfg: &'a TrainConfig, xi: &'a XiOperator, teacher: Option<&'a Params>, init: Params) -> Self {
        let constants = teacher.map(|t| {
            theory::constants(&TheoryInput {
                structure: data.structure(),
                d: init.d(),
                d_out: init.d_out(),
                l_sigma: cfg.activation.l_sigma(),
                alpha: cfg.alpha,
                v0: init.v.clone(),
                v_star: t.v.clone(),
                c_abs: cfg.c_abs,
            })
        });
        Run { data, cfg, xi, teacher, constants, params: init.clone(), init, epoch: 0, trajectory: Trajectory::default() }
    }

    fn fail(&self, error: Error) -> Box<TrainError> {
        Box::new(TrainError { epoch: self.epoch, error, trajectory: self.trajectory.clone() })
    }

    /// Records the current epoch and, unless `last`, advances one step.
    fn tick(&mut self, last: bool) -> core::result::Result<(), Box<TrainError>> {
        let kind = self.cfg.activation;
        let r = self.data.residuals(&self.params, kind).map_err(|e| self.fail(e))?;
        let loss = linalg::dot(&r, &r) / self.data.n() as f64;

        let (dist_w, dist_v, confined_w, confined_v) = match (self.teacher, &self.constants) {
            (Some(t), Some(c)) => {
                let (dw, dv) = self.params.distance(t);
                let (cw, cv) = theory::check_confinement(&self.params.w, &self.params.v, &t.w, &t.v, &self.init.w, c);
                (Some(dw), Some(dv), Some(cw), Some(cv))
            }
            _ => (None, None, None, None),
        };
        self.trajectory.records.push(EpochRecord {
            epoch: self.epoch,
            dist_w,
            dist_v,
            loss,
            confined_w,
            confined_v,
            w_norm: self.params.w.frobenius_norm(),
        });
        if !loss.is_finite() || loss > self.cfg.divergence_threshold {
            return Err(self.fail(Error::Diverged(loss)));
        }
        if last {
            return Ok(());
        }
        let gw = grad_w_from_residuals(self.data, &self.params, &r, self.xi, self.cfg.cond_threshold)
            .map_err(|e| self.fail(e))?;
        let gv = grad_v_from_residuals(self.data, &self.params, kind, &r).map_err(|e| self.fail(e))?;
        self.params = step(&self.params, &gw, &gv, self.cfg.alpha).map_err(|e| self.fail(e))?;
        self.epoch += 1;
        Ok(())
    }

    /// Runs until `self.epoch == until`, recording that epoch too.
    fn run_to(&mut self, until: usize) -> core::result::Result<(), Box<TrainError>> {
        while self.epoch < until {
            self.tick(false)?;
        }
        self.tick(true)
    }

    fn final_loss(&self) -> f64 {
        self.trajectory.last().map_or(f64::INFINITY, |r| r.loss)
    }
}

/// Estimates Ξ and runs [`train_with_xi`].
pub fn train(cfg: &TrainConfig, data: &TrainingData, teacher: Option<&Params>) -> core::result::Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let xi_op = data.estimate_xi(cfg.activation, cfg.xi, cfg.seed)?;
    train_with_xi(cfg, data, teacher, xi_op)
}

/// Runs `cfg.epochs` steps from the configured initialization using a
/// precomputed Ξ. The trajectory holds `epochs + 1` records.
pub fn train_with_xi(
    cfg: &TrainConfig,
    data: &TrainingData,
    teacher: Option<&Params>,
    xi_op: XiOperator,
) -> core::result::Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let d = data.feature_dim();
    if xi_op.dim() != d {
        return Err(Error::Shape { op: "train", expected: (d, d), got: (xi_op.dim(), xi_op.dim()) }.into());
    }
    let d_out = teacher.map_or(1, |t| t.d_out());
    if let Some(t) = teacher {
        if t.d() != d {
            return Err(Error::Shape { op: "train (teacher)", expected: (d, d_out), got: t.w.shape() }.into());
        }
    }
    let candidates = init_params(teacher, d, d_out, cfg.init, cfg.seed)?;

    let (winner, sign_search) = if candidates.len() == 1 {
        let mut run = Run::new(data, cfg, &xi_op, teacher, candidates[0].clone());
        run.run_to(cfg.epochs).map_err(|e| *e)?;
        (finish(run), None)
    } else {
        let probe = cfg.probe_epochs.min(cfg.epochs);
        let mut runs = Vec::with_capacity(4);
        let mut losses = [0.0; 4];
        for (i, c) in candidates.into_iter().enumerate() {
            let mut run = Run::new(data, cfg, &xi_op, teacher, c);
            // a diverging probe simply loses the race
            losses[i] = match run.run_to(probe) {
                Ok(()) => run.final_loss(),
                Err(_) => f64::INFINITY,
            };
            runs.push(run);
        }
        let best = (0..4).fold(0, |b, i| if losses[i] < losses[b] { i } else { b });
        let mut run = runs.swap_remove(best);
        if !losses[best].is_finite() {
            return Err(*run.fail(Error::Diverged(losses[best])));
        }
        // the probe already recorded epoch `probe`; drop it so the loop records it once
        run.trajectory.records.pop();
        run.run_to(cfg.epochs).map_err(|e| *e)?;
        (finish(run), Some((best, losses)))
    };
    let (params, init, trajectory, constants) = winner;
    Ok(TrainOutcome { params, init, trajectory, xi: xi_op, constants, sign_search })
}

fn finish(run: Run<'_>) -> (Params, Params, Trajectory, Option<TheoryConstants>) {
    (run.params, run.init, run.trajectory, run.constants)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{er_graph, Graph};
    use crate::model::AggregationMode;
    use crate::teacher::{sample_teacher, synth_ggnn, synth_ngnn, GgnnSynth};
    use crate::xi::XiSource;

    fn ngnn_data(n: usize, d: usize, kind: Activation, noise: f64, seed: u64) -> (TrainingData, Params) {
        let t = sample_teacher(d, 1, seed).unwrap();
        let ds = synth_ngnn(er_graph(n, 0.5, seed).unwrap(), &t, kind, noise, seed).unwrap();
        (TrainingData::ngnn(&ds, DegreeConvention::ReciprocalMean).unwrap(), t)
    }

    fn identity_xi(d: usize) -> XiOperator {
        XiOperator::new(Matrix::identity(d), XiSource::Empirical).unwrap()
    }

    #[test]
    fn gradients_vanish_at_teacher_without_noise() {
        let (data, t) = ngnn_data(30, 2, Activation::Relu, 0.0, 1);
        let gw = grad_w(&data, &t, Activation::Relu, &identity_xi(2), 1e8).unwrap();
        assert!(gw.as_slice().iter().all(|&x| x == 0.0));
        assert!(grad_v(&data, &t, Activation::Relu).unwrap().iter().all(|&x| x == 0.0));
        assert!(data.loss(&t, Activation::Relu).unwrap() < 1e-20);
    }

    #[test]
    fn zero_output_vector_kills_w_gradient() {
        let (data, t) = ngnn_data(30, 2, Activation::Tanh, 0.04, 2);
        let p = Params::new(t.w.clone(), alloc::vec![0.0]).unwrap();
        let gw = grad_w(&data, &p, Activation::Tanh, &identity_xi(2), 1e8).unwrap();
        assert!(gw.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_node_v_gradient_by_hand() {
        let g = Graph::isolated(1).unwrap();
        let op = conv_operator(&g);
        let features = Matrix::from_rows(&[[1.0]]);
        let data = TrainingData::Ngnn { conv: op.apply(&features).unwrap(), op, features, labels: alloc::vec![3.0], dbar: 1.0, d_min: 1 };
        let p = Params::new(Matrix::from_rows(&[[1.0]]), alloc::vec![0.0]).unwrap();
        assert_eq!(grad_v(&data, &p, Activation::Relu).unwrap(), alloc::vec![-3.0]);
    }

    #[test]
    fn step_behaviour() {
        let p = Params::new(Matrix::from_rows(&[[0.6], [0.8]]), alloc::vec![1.5]).unwrap();
        let same = step(&p, &Matrix::zeros(2, 1), &[0.0], 0.1).unwrap();
        assert_eq!(same, p);
        assert!(matches!(step(&p, &p.w, &[0.0], 1.0), Err(Error::DegenerateUpdate(_))));
        let g = Matrix::from_rows(&[[0.3], [-2.0]]);
        let next = step(&p, &g, &[0.5], 0.7).unwrap();
        assert!((next.w.frobenius_norm() - 1.0).abs() <= 1e-12);
        assert_eq!(next.v, alloc::vec![1.5 - 0.35]);
    }

    #[test]
    fn init_modes() {
        let t = sample_teacher(3, 2, 4).unwrap();
        for seed in 0..40 {
            let one = init_params(Some(&t), 3, 2, InitMode::OracleSigns, seed).unwrap();
            assert_eq!(one.len(), 1);
            assert!(satisfies_init_condition(&one[0], &t));
            let four = init_params(Some(&t), 3, 2, InitMode::RandomSignSearch, seed).unwrap();
            assert_eq!(four.iter().filter(|p| satisfies_init_condition(p, &t)).count(), 1);
        }
        assert!(init_params(None, 2, 1, InitMode::OracleSigns, 0).is_err());
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (data, t) = ngnn_data(40, 2, Activation::Relu, 0.04, 3);
        let mut cfg = TrainConfig::new(0.1, 0, Activation::Relu, 3);
        cfg.xi = XiConfig::MonteCarlo { samples: 20 };
        let out = train(&cfg, &data, Some(&t)).unwrap();
        assert_eq!(out.params, out.init);
        assert_eq!(out.trajectory.len(), 1);
        assert_eq!(out.trajectory.records[0].confined_w, Some(true));
        assert_eq!(out.trajectory.records[0].confined_v, Some(true));
    }

    #[test]
    fn teacher_is_a_fixed_point() {
        let n = 1000;
        let (data, t) = ngnn_data(n, 2, Activation::Relu, 0.0, 4);
        let cfg = TrainConfig::new(0.1, 25, Activation::Relu, 4);
        let xi_op = data.estimate_xi(Activation::Relu, XiConfig::MonteCarlo { samples: 10 }, 4).unwrap();
        let mut run = Run::new(&data, &cfg, &xi_op, Some(&t), t.clone());
        run.run_to(25).unwrap();
        assert_eq!(run.params, t);
        assert!(run.trajectory.records.iter().all(|r| r.dist_w == Some(0.0) && r.dist_v == Some(0.0)));
    }

    #[test]
    fn trajectory_without_teacher_leaves_distances_empty() {
        let (data, _) = ngnn_data(30, 2, Activation::Relu, 0.04, 5);
        let mut cfg = TrainConfig::new(0.1, 5, Activation::Relu, 5);
        cfg.init = InitMode::RandomSignSearch;
        cfg.xi = XiConfig::Empirical;
        let out = train(&cfg, &data, None).unwrap();
        assert_eq!(out.trajectory.len(), 6);
        assert!(out.trajectory.records.iter().all(|r| r.dist_w.is_none() && r.confined_v.is_none()));
        assert!(out.sign_search.is_some());
        let epochs: Vec<usize> = out.trajectory.records.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, (0..=5).collect::<Vec<_>>());
    }

    #[test]
    fn sign_search_trajectory_is_contiguous_after_probe() {
        let (data, t) = ngnn_data(30, 2, Activation::Relu, 0.04, 6);
        let mut cfg = TrainConfig::new(0.1, 80, Activation::Relu, 6);
        cfg.init = InitMode::RandomSignSearch;
        cfg.xi = XiConfig::MonteCarlo { samples: 20 };
        let out = train(&cfg, &data, Some(&t)).unwrap();
        let epochs: Vec<usize> = out.trajectory.records.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, (0..=80).collect::<Vec<_>>());
        // same result as running the winning start directly
        let (best, _) = out.sign_search.unwrap();
        let init = &init_params(None, 2, 1, InitMode::RandomSignSearch, 6).unwrap()[best];
        let mut run = Run::new(&data, &cfg, &out.xi, Some(&t), init.clone());
        run.run_to(80).unwrap();
        assert_eq!(run.trajectory, out.trajectory);
    }

    #[test]
    fn divergence_is_reported_with_partial_trajectory() {
        let (data, t) = ngnn_data(30, 2, Activation::Relu, 0.04, 7);
        let mut cfg = TrainConfig::new(0.1, 10, Activation::Relu, 7);
        cfg.divergence_threshold = 1e-9;
        cfg.xi = XiConfig::MonteCarlo { samples: 10 };
        let err = train(&cfg, &data, Some(&t)).unwrap_err();
        assert!(matches!(err.error, Error::Diverged(_)));
        assert_eq!(err.epoch, 0);
        assert_eq!(err.trajectory.len(), 1);
    }

    #[test]
    fn ill_conditioned_xi_is_propagated() {
        let (data, t) = ngnn_data(20, 2, Activation::Relu, 0.04, 8);
        let cfg = TrainConfig::new(0.1, 3, Activation::Relu, 8);
        let bad = XiOperator::new(Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]), XiSource::Empirical).unwrap();
        let err = train_with_xi(&cfg, &data, Some(&t), bad).unwrap_err();
        assert!(matches!(err.error, Error::IllConditioned { .. }));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (data, t) = ngnn_data(10, 2, Activation::Relu, 0.0, 9);
        let cfg = TrainConfig::new(0.0, 3, Activation::Relu, 9);
        assert!(matches!(train(&cfg, &data, Some(&t)).unwrap_err().error, Error::InvalidConfig(_)));
    }

    #[test]
    fn ggnn_runs_and_keeps_unit_norm() {
        let t = sample_teacher(2, 1, 10).unwrap();
        let spec = GgnnSynth { n_graphs: 100, nodes_per_graph: 5, p: 0.5, aggregation: AggregationMode::Uniform };
        let ds = synth_ggnn(&spec, &t, Activation::Relu, 0.04, 10).unwrap();
        let data = TrainingData::ggnn(&ds).unwrap();
        assert_eq!(data.mode(), Mode::Ggnn);
        let mut cfg = TrainConfig::new(0.005, 50, Activation::Relu, 10);
        cfg.xi = XiConfig::MonteCarlo { samples: 20 };
        let out = train(&cfg, &data, Some(&t)).unwrap();
        assert_eq!(out.trajectory.len(), 51);
        assert!(out.trajectory.max_unit_norm_error() <= 1e-12);
    }
}
