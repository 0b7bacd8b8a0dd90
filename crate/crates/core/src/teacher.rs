//! Ground-truth parameters and synthetic label generation.

use alloc::vec::Vec;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::graph::{conv_operator, er_graph_with, Graph};
use crate::linalg::Matrix;
use crate::model::{self, make_aggregation, Aggregation, AggregationMode, Params};
use crate::rng::{self, streams};

/// `W* = G/‖G‖_F` with Gaussian `G`, and Gaussian `v*`.
pub fn sample_teacher(d: usize, d_out: usize, seed: u64) -> Result<Params> {
    if d == 0 || d_out == 0 {
        return Err(Error::InvalidSize("teacher dimensions must be positive"));
    }
    let mut r = rng::stream(seed, streams::TEACHER);
    let w = unit_gaussian_matrix(&mut r, d, d_out);
    let v = rng::gaussian_vec(&mut r, d_out);
    Params::new(w, v)
}

/// Gaussian matrix scaled onto the unit Frobenius sphere.
pub(crate) fn unit_gaussian_matrix<R: rand::Rng + ?Sized>(r: &mut R, d: usize, d_out: usize) -> Matrix {
    loop {
        let g = rng::gaussian_matrix(r, d, d_out);
        let norm = g.frobenius_norm();
        if norm > 0.0 {
            return g.scale(1.0 / norm);
        }
    }
}

fn check_noise(noise_var: f64) -> Result<()> {
    if noise_var.is_finite() && noise_var >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidNoise(noise_var))
    }
}

#[derive(Clone, Debug)]
pub struct NgnnDataset {
    pub graph: Graph,
    pub features: Matrix,
    pub labels: Vec<f64>,
    pub noise_var: f64,
    pub activation: Activation,
    pub seed: u64,
}

pub fn synth_ngnn(graph: Graph, teacher: &Params, kind: Activation, noise_var: f64, seed: u64) -> Result<NgnnDataset> {
    check_noise(noise_var)?;
    let features = rng::gaussian_matrix(&mut rng::stream(seed, streams::FEATURES), graph.n(), teacher.d());
    let mut labels = model::ngnn_forward(&conv_operator(&graph), &features, teacher, kind)?;
    add_noise(&mut labels, noise_var, seed);
    Ok(NgnnDataset { graph, features, labels, noise_var, activation: kind, seed })
}

fn add_noise(labels: &mut [f64], noise_var: f64, seed: u64) {
    if noise_var == 0.0 {
        return;
    }
    let sd = libm::sqrt(noise_var);
    let mut r = rng::stream(seed, streams::NOISE);
    for y in labels {
        *y += sd * rng::standard_normal(&mut r);
    }
}

/// One graph of a graph-level dataset.
#[derive(Clone, Debug)]
pub struct GraphSample {
    pub graph: Graph,
    pub features: Matrix,
    pub aggregation: Aggregation,
}

#[derive(Clone, Debug)]
pub struct GgnnDataset {
    pub graphs: Vec<GraphSample>,
    pub labels: Vec<f64>,
    pub noise_var: f64,
    pub activation: Activation,
    pub aggregation: AggregationMode,
    pub seed: u64,
}

impl GgnnDataset {
    /// Largest graph size.
    pub fn n_max(&self) -> usize {
        self.graphs.iter().map(|g| g.graph.n()).max().unwrap_or(0)
    }

    pub fn feature_dim(&self) -> usize {
        self.graphs.first().map_or(0, |g| g.features.cols())
    }
}

/// Shape of a synthetic graph-level dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct GgnnSynth {
    pub n_graphs: usize,
    pub nodes_per_graph: usize,
    pub p: f64,
    pub aggregation: AggregationMode,
}

pub fn synth_ggnn(spec: &GgnnSynth, teacher: &Params, kind: Activation, noise_var: f64, seed: u64) -> Result<GgnnDataset> {
    check_noise(noise_var)?;
    if spec.n_graphs == 0 {
        return Err(Error::InvalidSize("need at least one graph"));
    }
    if spec.nodes_per_graph == 0 {
        return Err(Error::InvalidSize("graphs need at least one node"));
    }
    let mut graph_rng = rng::stream(seed, streams::GRAPH);
    let mut feature_rng = rng::stream(seed, streams::FEATURES);
    let mut graphs = Vec::with_capacity(spec.n_graphs);
    let mut labels = Vec::with_capacity(spec.n_graphs);
    for _ in 0..spec.n_graphs {
        let graph = er_graph_with(spec.nodes_per_graph, spec.p, &mut graph_rng)?;
        let features = rng::gaussian_matrix(&mut feature_rng, graph.n(), teacher.d());
        let aggregation = make_aggregation(&spec.aggregation, graph.n())?;
        let c = conv_operator(&graph).apply(&features)?;
        labels.push(model::ggnn_forward_one(&c, &aggregation, teacher, kind)?);
        graphs.push(GraphSample { graph, features, aggregation });
    }
    add_noise(&mut labels, noise_var, seed);
    Ok(GgnnDataset { graphs, labels, noise_var, activation: kind, aggregation: spec.aggregation.clone(), seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::er_graph;
    use crate::model::GraphInput;

    #[test]
    fn teacher_is_unit_norm() {
        for seed in 0..50 {
            let t = sample_teacher(3, 2, seed).unwrap();
            assert!((t.w.frobenius_norm() - 1.0).abs() <= 1e-12);
            assert_eq!(t.v.len(), 2);
        }
        for seed in 0..50 {
            let t = sample_teacher(1, 1, seed).unwrap();
            assert!((t.w[(0, 0)].abs() - 1.0).abs() <= 1e-15);
        }
        assert!(sample_teacher(0, 1, 0).is_err());
    }

    #[test]
    fn mean_squared_output_norm_is_d_out() {
        // ‖v*‖² ~ χ²(3): mean 3, variance 6
        let trials = 10_000;
        let mean = (0..trials)
            .map(|s| sample_teacher(2, 3, s).unwrap().v.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            / trials as f64;
        let se = (6.0f64 / trials as f64).sqrt();
        assert!((mean - 3.0).abs() <= 5.0 * se, "{mean}");
    }

    #[test]
    fn noise_free_labels_equal_forward() {
        let g = er_graph(30, 0.3, 5).unwrap();
        let t = sample_teacher(2, 1, 5).unwrap();
        let ds = synth_ngnn(g.clone(), &t, Activation::Swish, 0.0, 9).unwrap();
        let y = model::ngnn_forward(&conv_operator(&g), &ds.features, &t, Activation::Swish).unwrap();
        assert_eq!(ds.labels, y);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let g = er_graph(40, 0.5, 1).unwrap();
        let t = sample_teacher(2, 1, 2).unwrap();
        let a = synth_ngnn(g.clone(), &t, Activation::Relu, 0.04, 3).unwrap();
        let b = synth_ngnn(g.clone(), &t, Activation::Relu, 0.04, 3).unwrap();
        let c = synth_ngnn(g, &t, Activation::Relu, 0.04, 4).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.labels, b.labels);
        assert_ne!(a.labels, c.labels);
    }

    #[test]
    fn noise_variance_is_respected() {
        let g = er_graph(1000, 0.5, 17).unwrap();
        let t = sample_teacher(2, 1, 17).unwrap();
        let ds = synth_ngnn(g.clone(), &t, Activation::Relu, 0.04, 17).unwrap();
        let clean = model::ngnn_forward(&conv_operator(&g), &ds.features, &t, Activation::Relu).unwrap();
        let var = ds.labels.iter().zip(&clean).map(|(y, f)| (y - f) * (y - f)).sum::<f64>() / 1000.0;
        assert!((0.03..=0.05).contains(&var), "{var}");
    }

    #[test]
    fn rejects_negative_noise() {
        let g = er_graph(5, 0.5, 1).unwrap();
        let t = sample_teacher(2, 1, 1).unwrap();
        assert_eq!(synth_ngnn(g, &t, Activation::Relu, -0.1, 0).unwrap_err(), Error::InvalidNoise(-0.1));
        let spec = GgnnSynth { n_graphs: 2, nodes_per_graph: 3, p: 0.5, aggregation: AggregationMode::Uniform };
        assert!(matches!(synth_ggnn(&spec, &t, Activation::Relu, f64::NAN, 0), Err(Error::InvalidNoise(_))));
        let empty = GgnnSynth { n_graphs: 0, ..spec };
        assert!(matches!(synth_ggnn(&empty, &t, Activation::Relu, 0.0, 0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn ggnn_noise_free_labels_equal_forward() {
        let t = sample_teacher(2, 1, 8).unwrap();
        let spec = GgnnSynth { n_graphs: 20, nodes_per_graph: 5, p: 0.5, aggregation: AggregationMode::Particular(0) };
        let ds = synth_ggnn(&spec, &t, Activation::Tanh, 0.0, 8).unwrap();
        let convs: Vec<_> = ds.graphs.iter().map(|g| conv_operator(&g.graph)).collect();
        let inputs: Vec<_> = ds
            .graphs
            .iter()
            .zip(&convs)
            .map(|(g, c)| GraphInput { conv: c, features: &g.features, aggregation: &g.aggregation })
            .collect();
        assert_eq!(model::ggnn_forward(&inputs, &t, Activation::Tanh).unwrap(), ds.labels);
        assert_eq!(ds.n_max(), 5);
    }

    #[test]
    fn replication_shape_has_five_node_graphs() {
        let t = sample_teacher(2, 1, 0).unwrap();
        let spec = GgnnSynth { n_graphs: 1000, nodes_per_graph: 5, p: 0.5, aggregation: AggregationMode::Uniform };
        let ds = synth_ggnn(&spec, &t, Activation::Relu, 0.04, 0).unwrap();
        assert_eq!(ds.graphs.len(), 1000);
        assert_eq!(ds.n_max(), 5);
    }

    #[test]
    fn one_single_node_graph_is_one_ngnn_sample() {
        let t = sample_teacher(3, 2, 4).unwrap();
        let spec = GgnnSynth { n_graphs: 1, nodes_per_graph: 1, p: 0.5, aggregation: AggregationMode::Uniform };
        let gg = synth_ggnn(&spec, &t, Activation::Softplus, 0.0, 6).unwrap();
        let ng = synth_ngnn(Graph::isolated(1).unwrap(), &t, Activation::Softplus, 0.0, 6).unwrap();
        assert_eq!(gg.graphs[0].features, ng.features);
        assert_eq!(gg.labels, ng.labels);
    }
}
