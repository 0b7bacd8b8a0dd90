//! Forward passes of the one-convolution-layer networks.
//!
//! NGNN: `ŷ = σ(PHW)v ∈ ℝⁿ`. GGNN: `ŷ_j = a_j σ(P_jH_jW)v`. The output
//! vector v has length `d_out` in both cases.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::graph::ConvOperator;
use crate::linalg::{self, Matrix};

/// Network parameters: transition matrix `W` (d×d_out) and output vector `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub w: Matrix,
    pub v: Vec<f64>,
}

impl Params {
    pub fn new(w: Matrix, v: Vec<f64>) -> Result<Params> {
        if w.cols() != v.len() {
            return Err(Error::Shape { op: "Params::new", expected: (w.rows(), v.len()), got: w.shape() });
        }
        Ok(Params { w, v })
    }

    pub fn d(&self) -> usize {
        self.w.rows()
    }

    pub fn d_out(&self) -> usize {
        self.w.cols()
    }

    /// `(‖W − W'‖_F, ‖v − v'‖₂)`.
    pub fn distance(&self, other: &Params) -> (f64, f64) {
        let dw = self.w.sub(&other.w).map(|m| m.frobenius_norm()).unwrap_or(f64::NAN);
        let dv = linalg::norm(&linalg::sub_vec(&self.v, &other.v));
        (dw, dv)
    }

    pub fn negated(&self, flip_w: bool, flip_v: bool) -> Params {
        let sw = if flip_w { -1.0 } else { 1.0 };
        let sv = if flip_v { -1.0 } else { 1.0 };
        Params { w: self.w.scale(sw), v: self.v.iter().map(|x| sv * x).collect() }
    }
}

/// Fixed, non-negative node weights of one graph summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregation {
    weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AggregationMode {
    /// One-hot at the given node.
    Particular(usize),
    Uniform,
    Attention(Vec<f64>),
}

const AGGREGATION_TOL: f64 = 1e-12;

impl Aggregation {
    pub fn new(weights: Vec<f64>) -> Result<Aggregation> {
        if weights.is_empty() {
            return Err(Error::InvalidAggregation("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidAggregation(format!("weight {w} is negative or non-finite")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > AGGREGATION_TOL {
            return Err(Error::InvalidAggregation(format!("weights sum to {sum}, not 1")));
        }
        Ok(Aggregation { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `‖a‖²`.
    pub fn norm_sq(&self) -> f64 {
        linalg::dot(&self.weights, &self.weights)
    }

    /// `a · M` for an n_j×k matrix, returning a length-k row.
    pub fn reduce(&self, m: &Matrix) -> Result<Vec<f64>> {
        m.t_matvec(&self.weights)
    }
}

pub fn make_aggregation(mode: &AggregationMode, n_j: usize) -> Result<Aggregation> {
    if n_j == 0 {
        return Err(Error::InvalidSize("aggregation over an empty graph"));
    }
    match mode {
        AggregationMode::Particular(i) => {
            if *i >= n_j {
                return Err(Error::InvalidAggregation(format!("node {i} out of range for {n_j} nodes")));
            }
            let mut w = vec![0.0; n_j];
            w[*i] = 1.0;
            Aggregation::new(w)
        }
        AggregationMode::Uniform => Ok(Aggregation { weights: vec![1.0 / n_j as f64; n_j] }),
        AggregationMode::Attention(w) => {
            if w.len() != n_j {
                return Err(Error::InvalidAggregation(format!("{} weights for {n_j} nodes", w.len())));
            }
            Aggregation::new(w.clone())
        }
    }
}

fn check_params_against(c: &Matrix, params: &Params) -> Result<()> {
    if c.cols() != params.d() {
        return Err(Error::Shape { op: "σ(CW)", expected: (c.rows(), params.d()), got: c.shape() });
    }
    Ok(())
}

/// `σ(C W)` for already convolved features `C = P H`.
pub fn hidden(c: &Matrix, params: &Params, kind: Activation) -> Result<Matrix> {
    check_params_against(c, params)?;
    Ok(kind.apply_matrix(&c.matmul(&params.w)?))
}

/// `σ(C W) v` for already convolved features `C = P H`.
pub fn forward_convolved(c: &Matrix, params: &Params, kind: Activation) -> Result<Vec<f64>> {
    hidden(c, params, kind)?.matvec(&params.v)
}

pub fn ngnn_forward(p: &ConvOperator, h: &Matrix, params: &Params, kind: Activation) -> Result<Vec<f64>> {
    let c = p.apply(h)?;
    forward_convolved(&c, params, kind)
}

/// One graph of a GGNN input.
#[derive(Clone, Copy, Debug)]
pub struct GraphInput<'a> {
    pub conv: &'a ConvOperator,
    pub features: &'a Matrix,
    pub aggregation: &'a Aggregation,
}

/// `a_j σ(C_j W) v` for one graph with convolved features `C_j`.
pub fn ggnn_forward_one(c: &Matrix, a: &Aggregation, params: &Params, kind: Activation) -> Result<f64> {
    if a.len() != c.rows() {
        return Err(Error::InvalidAggregation(format!("{} weights for {} nodes", a.len(), c.rows())));
    }
    let node_out = forward_convolved(c, params, kind)?;
    Ok(linalg::dot(a.weights(), &node_out))
}

pub fn ggnn_forward(graphs: &[GraphInput<'_>], params: &Params, kind: Activation) -> Result<Vec<f64>> {
    graphs
        .iter()
        .map(|g| {
            let c = g.conv.apply(g.features)?;
            ggnn_forward_one(&c, g.aggregation, params, kind)
        })
        .collect()
}
