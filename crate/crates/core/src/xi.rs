//! The auxiliary matrices that stand in for the activation derivative.
//!
//! ```text
//! Ξ_N = E[ (PH)ᵀ σ(PH) ]
//! Ξ_G = (1/n) Σ_j E[ (P_jH_j)ᵀ a_jᵀ a_j σ(P_jH_j) ]
//! ```
//!
//! Both are d×d and depend only on the graphs, the aggregations and σ, never
//! on the trained parameters, so they are estimated once per run. Two
//! estimators exist: Monte-Carlo over fresh standard-Gaussian feature draws,
//! and a single pass over the training features.
//!
//! Monte-Carlo draw `k` uses its own random stream, and draws are summed in
//! index order, so a caller computing draws in parallel with
//! [`ngnn_draw`]/[`ggnn_draw`] and reducing with [`XiAccumulator`] gets
//! bit-identical results to the serial estimators here.

use alloc::vec::Vec;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::graph::ConvOperator;
use crate::linalg::{self, Lu, Matrix};
use crate::model::Aggregation;
use crate::rng::{self, streams};

pub const DEFAULT_MC_SAMPLES: usize = 200;
pub const DEFAULT_COND_THRESHOLD: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XiSource {
    MonteCarlo { samples: usize },
    Empirical,
}

#[derive(Clone, Copy, Debug)]
pub enum XiEstimator<F> {
    MonteCarlo { samples: usize, seed: u64 },
    /// Single pass over the given training features.
    Empirical(F),
}

#[derive(Clone, Debug, PartialEq)]
pub struct XiOperator {
    xi: Matrix,
    cond: f64,
    source: XiSource,
    /// Entrywise standard error of a Monte-Carlo estimate.
    stderr: Option<Matrix>,
}

impl XiOperator {
    pub fn new(xi: Matrix, source: XiSource) -> Result<XiOperator> {
        if xi.rows() != xi.cols() {
            return Err(Error::Shape { op: "XiOperator::new", expected: (xi.rows(), xi.rows()), got: xi.shape() });
        }
        if !xi.is_finite() {
            return Err(Error::NonFinite("auxiliary matrix estimate"));
        }
        let cond = linalg::condition_number_1(&xi);
        Ok(XiOperator { xi, cond, source, stderr: None })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.xi
    }

    pub fn dim(&self) -> usize {
        self.xi.rows()
    }

    /// 1-norm condition number.
    pub fn cond(&self) -> f64 {
        self.cond
    }

    pub fn source(&self) -> XiSource {
        self.source
    }

    pub fn stderr(&self) -> Option<&Matrix> {
        self.stderr.as_ref()
    }

    /// `‖Ξ⁻¹‖_F`.
    pub fn inverse_norm(&self, cond_threshold: f64) -> Result<f64> {
        Ok(solve_inverse(self, &Matrix::identity(self.dim()), cond_threshold)?.frobenius_norm())
    }
}

/// Solves `Ξ X = B` by LU with one step of iterative refinement.
pub fn solve_inverse(op: &XiOperator, b: &Matrix, cond_threshold: f64) -> Result<Matrix> {
    if b.rows() != op.dim() {
        return Err(Error::Shape { op: "solve_inverse", expected: (op.dim(), b.cols()), got: b.shape() });
    }
    if !(op.cond <= cond_threshold) {
        return Err(Error::IllConditioned { cond: op.cond, threshold: cond_threshold });
    }
    let lu = Lu::factor(&op.xi).ok_or(Error::IllConditioned { cond: f64::INFINITY, threshold: cond_threshold })?;
    let mut x = lu.solve(b);
    let residual = b.sub(&op.xi.matmul(&x)?)?;
    x.axpy(1.0, &lu.solve(&residual))?;
    Ok(x)
}

/// Running sum of Monte-Carlo draws, reduced strictly in push order.
#[derive(Clone, Debug)]
pub struct XiAccumulator {
    sum: Matrix,
    sum_sq: Matrix,
    count: usize,
}

impl XiAccumulator {
    pub fn new(d: usize) -> Self {
        XiAccumulator { sum: Matrix::zeros(d, d), sum_sq: Matrix::zeros(d, d), count: 0 }
    }

    pub fn push(&mut self, draw: &Matrix) {
        for ((s, q), &x) in self.sum.as_mut_slice().iter_mut().zip(self.sum_sq.as_mut_slice()).zip(draw.as_slice()) {
            *s += x;
            *q += x * x;
        }
        self.count += 1;
    }

    pub fn finish(self) -> Result<XiOperator> {
        if self.count == 0 {
            return Err(Error::InvalidSize("Monte-Carlo estimate needs at least one draw"));
        }
        let m = self.count as f64;
        let mean = self.sum.scale(1.0 / m);
        let stderr = if self.count > 1 {
            let mut se = Matrix::zeros(mean.rows(), mean.cols());
            for ((o, &q), &mu) in se.as_mut_slice().iter_mut().zip(self.sum_sq.as_slice()).zip(mean.as_slice()) {
                let var = ((q - m * mu * mu) / (m - 1.0)).max(0.0);
                *o = libm::sqrt(var / m);
            }
            Some(se)
        } else {
            None
        };
        let mut op = XiOperator::new(mean, XiSource::MonteCarlo { samples: self.count })?;
        op.stderr = stderr;
        Ok(op)
    }
}

/// `Cᵀ σ(C)` for convolved features `C`.
pub fn ngnn_term(c: &Matrix, kind: Activation) -> Result<Matrix> {
    let term = c.t_matmul(&kind.apply_matrix(c))?;
    if term.is_finite() {
        Ok(term)
    } else {
        Err(Error::NonFinite("Cᵀσ(C)"))
    }
}

/// `(aC)ᵀ (a σ(C))` for one graph.
pub fn ggnn_term(c: &Matrix, a: &Aggregation, kind: Activation) -> Result<Matrix> {
    let ac = a.reduce(c)?;
    let asig = a.reduce(&kind.apply_matrix(c))?;
    let term = Matrix::column(&ac).matmul(&Matrix::from_rows(&[asig]))?;
    if term.is_finite() {
        Ok(term)
    } else {
        Err(Error::NonFinite("(aC)ᵀaσ(C)"))
    }
}

/// Monte-Carlo draw `index` of the NGNN auxiliary matrix.
pub fn ngnn_draw(p: &ConvOperator, kind: Activation, d: usize, seed: u64, index: usize) -> Result<Matrix> {
    let mut r = rng::stream(seed, streams::XI_BASE + index as u64);
    let h = rng::gaussian_matrix(&mut r, p.n(), d);
    ngnn_term(&p.apply(&h)?, kind)
}

/// One graph's structure as seen by the GGNN estimator.
#[derive(Clone, Copy, Debug)]
pub struct GraphStructure<'a> {
    pub conv: &'a ConvOperator,
    pub aggregation: &'a Aggregation,
}

/// Monte-Carlo draw `index` of the GGNN auxiliary matrix (one fresh feature
/// matrix per graph, averaged over graphs).
pub fn ggnn_draw(graphs: &[GraphStructure<'_>], kind: Activation, d: usize, seed: u64, index: usize) -> Result<Matrix> {
    let mut r = rng::stream(seed, streams::XI_BASE + index as u64);
    let mut acc = Matrix::zeros(d, d);
    for g in graphs {
        let h = rng::gaussian_matrix(&mut r, g.conv.n(), d);
        acc.axpy(1.0, &ggnn_term(&g.conv.apply(&h)?, g.aggregation, kind)?)?;
    }
    Ok(acc.scale(1.0 / graphs.len() as f64))
}

pub fn estimate_xi_ngnn(p: &ConvOperator, kind: Activation, d: usize, estimator: XiEstimator<&Matrix>) -> Result<XiOperator> {
    match estimator {
        XiEstimator::MonteCarlo { samples, seed } => {
            let mut acc = XiAccumulator::new(d);
            for k in 0..samples {
                acc.push(&ngnn_draw(p, kind, d, seed, k)?);
            }
            acc.finish()
        }
        XiEstimator::Empirical(h) => {
            if h.cols() != d {
                return Err(Error::Shape { op: "estimate_xi_ngnn", expected: (p.n(), d), got: h.shape() });
            }
            XiOperator::new(ngnn_term(&p.apply(h)?, kind)?, XiSource::Empirical)
        }
    }
}

pub fn estimate_xi_ggnn(
    graphs: &[GraphStructure<'_>],
    kind: Activation,
    d: usize,
    estimator: XiEstimator<&[Matrix]>,
) -> Result<XiOperator> {
    if graphs.is_empty() {
        return Err(Error::InvalidSize("need at least one graph"));
    }
    match estimator {
        XiEstimator::MonteCarlo { samples, seed } => {
            let mut acc = XiAccumulator::new(d);
            for k in 0..samples {
                acc.push(&ggnn_draw(graphs, kind, d, seed, k)?);
            }
            acc.finish()
        }
        XiEstimator::Empirical(features) => {
            if features.len() != graphs.len() {
                return Err(Error::InvalidSize("one feature matrix per graph is required"));
            }
            let mut acc = Matrix::zeros(d, d);
            for (g, h) in graphs.iter().zip(features) {
                acc.axpy(1.0, &ggnn_term(&g.conv.apply(h)?, g.aggregation, kind)?)?;
            }
            XiOperator::new(acc.scale(1.0 / graphs.len() as f64), XiSource::Empirical)
        }
    }
}

/// Pairs each graph's convolution operator with its aggregation.
pub fn structures<'a>(convs: &'a [ConvOperator], aggs: impl IntoIterator<Item = &'a Aggregation>) -> Vec<GraphStructure<'a>> {
    convs.iter().zip(aggs).map(|(conv, aggregation)| GraphStructure { conv, aggregation }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{conv_operator, er_graph, Graph};
    use crate::model::{make_aggregation, AggregationMode};

    fn op(rows: &[[f64; 2]]) -> XiOperator {
        XiOperator::new(Matrix::from_rows(rows), XiSource::Empirical).unwrap()
    }

    #[test]
    fn solve_examples() {
        let b = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let x = solve_inverse(&op(&[[1.0, 0.0], [0.0, 1.0]]), &b, DEFAULT_COND_THRESHOLD).unwrap();
        assert_eq!(x, b);
        let x = solve_inverse(&op(&[[2.0, 0.0], [0.0, 4.0]]), &Matrix::column(&[2.0, 4.0]), DEFAULT_COND_THRESHOLD).unwrap();
        assert_eq!(x, Matrix::column(&[1.0, 1.0]));
        let bad = op(&[[1.0, 1.0], [1.0, 1.0 + 1e-10]]);
        assert!(bad.cond() > 1e8);
        assert!(matches!(
            solve_inverse(&bad, &Matrix::column(&[1.0, 1.0]), DEFAULT_COND_THRESHOLD),
            Err(Error::IllConditioned { .. })
        ));
        let singular = op(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(solve_inverse(&singular, &Matrix::column(&[1.0, 1.0]), DEFAULT_COND_THRESHOLD).is_err());
    }

    #[test]
    fn solve_residual_is_small_on_moderate_conditioning() {
        let a = op(&[[1.0, 0.999], [0.999, 1.0]]);
        let b = Matrix::from_rows(&[[0.3, -1.0], [2.0, 0.5]]);
        let x = solve_inverse(&a, &b, DEFAULT_COND_THRESHOLD).unwrap();
        let r = a.matrix().matmul(&x).unwrap().sub(&b).unwrap();
        assert!(r.frobenius_norm() <= 1e-8 * b.frobenius_norm());
    }

    #[test]
    fn single_node_relu_is_half() {
        let p = conv_operator(&Graph::isolated(1).unwrap());
        let xi = estimate_xi_ngnn(&p, Activation::Relu, 1, XiEstimator::MonteCarlo { samples: 20_000, seed: 3 }).unwrap();
        let se = xi.stderr().unwrap()[(0, 0)];
        assert!((xi.matrix()[(0, 0)] - 0.5).abs() <= 4.0 * se, "{:?}", xi.matrix());
        assert_eq!(xi.source(), XiSource::MonteCarlo { samples: 20_000 });
    }

    #[test]
    fn linear_activation_on_complete_graph_is_identity() {
        let p = conv_operator(&Graph::complete(4).unwrap());
        let xi = estimate_xi_ngnn(&p, Activation::LeakyRelu(1.0), 2, XiEstimator::MonteCarlo { samples: 20_000, seed: 5 }).unwrap();
        let se = xi.stderr().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((xi.matrix()[(i, j)] - target).abs() <= 4.0 * se[(i, j)]);
            }
        }
    }

    #[test]
    fn ggnn_reduces_to_ngnn_on_single_nodes() {
        let g = Graph::isolated(1).unwrap();
        let convs = [conv_operator(&g), conv_operator(&g), conv_operator(&g)];
        let a = make_aggregation(&AggregationMode::Uniform, 1).unwrap();
        let gs = structures(&convs, [&a, &a, &a]);
        let hs = [Matrix::from_rows(&[[0.5, -1.0]]), Matrix::from_rows(&[[2.0, 0.1]]), Matrix::from_rows(&[[-0.3, 0.7]])];
        let gg = estimate_xi_ggnn(&gs, Activation::Relu, 2, XiEstimator::Empirical(&hs)).unwrap();
        let mut expected = Matrix::zeros(2, 2);
        for h in &hs {
            let one = estimate_xi_ngnn(&convs[0], Activation::Relu, 2, XiEstimator::Empirical(h)).unwrap();
            expected.axpy(1.0 / 3.0, one.matrix()).unwrap();
        }
        assert!(gg.matrix().sub(&expected).unwrap().frobenius_norm() < 1e-15);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let p = conv_operator(&er_graph(10, 0.5, 1).unwrap());
        let a = estimate_xi_ngnn(&p, Activation::Tanh, 2, XiEstimator::MonteCarlo { samples: 50, seed: 9 }).unwrap();
        let b = estimate_xi_ngnn(&p, Activation::Tanh, 2, XiEstimator::MonteCarlo { samples: 50, seed: 9 }).unwrap();
        assert_eq!(a, b);
        let mut acc = XiAccumulator::new(2);
        let draws: Vec<_> = (0..50).map(|k| ngnn_draw(&p, Activation::Tanh, 2, 9, k).unwrap()).collect();
        draws.iter().for_each(|m| acc.push(m));
        assert_eq!(acc.finish().unwrap(), a);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = conv_operator(&Graph::isolated(3).unwrap());
        assert!(estimate_xi_ngnn(&p, Activation::Relu, 2, XiEstimator::MonteCarlo { samples: 0, seed: 0 }).is_err());
        assert!(estimate_xi_ngnn(&p, Activation::Relu, 2, XiEstimator::Empirical(&Matrix::zeros(3, 3))).is_err());
        assert!(estimate_xi_ggnn(&[], Activation::Relu, 2, XiEstimator::MonteCarlo { samples: 1, seed: 0 }).is_err());
        assert!(XiOperator::new(Matrix::from_rows(&[[f64::NAN]]), XiSource::Empirical).is_err());
    }
}
