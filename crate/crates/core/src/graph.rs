//! Random graphs and the row-normalized convolution operator `P = D⁻¹A`.
//!
//! Adjacency always carries self-loops: a node's neighborhood includes the
//! node itself, so `P·H` averages a node's own features with its neighbors'
//! and every degree is at least 1.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{self, streams};

#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adjacency: Vec<bool>,
    degrees: Vec<usize>,
}

impl Graph {
    /// Builds a graph from undirected edges. Self-loops are added for every
    /// node; `(i, i)` pairs and duplicates in the input are ignored.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(Error::InvalidSize("graph needs at least one node"));
        }
        let mut adjacency = vec![false; n * n];
        for i in 0..n {
            adjacency[i * n + i] = true;
        }
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidEdge(i, j, n));
            }
            adjacency[i * n + j] = true;
            adjacency[j * n + i] = true;
        }
        let degrees = (0..n).map(|i| adjacency[i * n..(i + 1) * n].iter().filter(|&&a| a).count()).collect();
        Ok(Graph { n, adjacency, degrees })
    }

    /// Self-loops only.
    pub fn isolated(n: usize) -> Result<Graph> {
        Graph::from_edges(n, core::iter::empty())
    }

    pub fn complete(n: usize) -> Result<Graph> {
        Graph::from_edges(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn min_degree(&self) -> usize {
        self.degrees.iter().copied().min().unwrap_or(0)
    }

    /// Neighborhood of `i`, including `i` itself, in increasing order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i * self.n..(i + 1) * self.n].iter().enumerate().filter(|(_, &a)| a).map(|(j, _)| j)
    }

    /// Undirected edges `(i, j)` with `i < j`; self-loops are not listed.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).filter(move |&j| self.has_edge(i, j)).map(move |j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn adjacency_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| if self.has_edge(i, j) { 1.0 } else { 0.0 })
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::InvalidSize("permutation length differs from node count"));
        }
        Graph::from_edges(self.n, self.edges().map(|(i, j)| (perm[i], perm[j])))
    }
}

impl core::fmt::Debug for Graph {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Graph").field("n", &self.n).field("edges", &self.edge_count()).finish()
    }
}

/// Erdős–Rényi G(n, p) with mandatory self-loops.
pub fn er_graph(n: usize, p: f64, seed: u64) -> Result<Graph> {
    er_graph_with(n, p, &mut rng::stream(seed, streams::GRAPH))
}

/// Same as [`er_graph`] but draws from a caller-supplied generator.
pub fn er_graph_with<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidSize("graph needs at least one node"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            // one uniform per unordered pair keeps the draw sequence independent of p
            let u: f64 = rng.random();
            if u < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// `P = D⁻¹A` in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvOperator {
    offsets: Vec<usize>,
    cols: Vec<u32>,
    inv_degree: Vec<f64>,
}

pub fn conv_operator(g: &Graph) -> ConvOperator {
    ConvOperator::from(g)
}

impl From<&Graph> for ConvOperator {
    fn from(g: &Graph) -> Self {
        let mut offsets = Vec::with_capacity(g.n + 1);
        let mut cols = Vec::new();
        offsets.push(0);
        for i in 0..g.n {
            cols.extend(g.neighbors(i).map(|j| j as u32));
            offsets.push(cols.len());
        }
        let inv_degree = g.degrees.iter().map(|&d| 1.0 / d as f64).collect();
        ConvOperator { offsets, cols, inv_degree }
    }
}

impl ConvOperator {
    pub fn n(&self) -> usize {
        self.inv_degree.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.cols[self.offsets[i]..self.offsets[i + 1]];
        if row.binary_search(&(j as u32)).is_ok() {
            self.inv_degree[i]
        } else {
            0.0
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        let len = self.offsets[i + 1] - self.offsets[i];
        (0..len).map(|_| self.inv_degree[i]).sum()
    }

    pub fn to_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n(), self.n());
        for i in 0..self.n() {
            for &j in &self.cols[self.offsets[i]..self.offsets[i + 1]] {
                m[(i, j as usize)] = self.inv_degree[i];
            }
        }
        m
    }

    /// `P · H`.
    pub fn apply(&self, h: &Matrix) -> Result<Matrix> {
        if h.rows() != self.n() {
            return Err(Error::Shape { op: "P·H", expected: (self.n(), h.cols()), got: h.shape() });
        }
        let d = h.cols();
        let mut out = Matrix::zeros(self.n(), d);
        for i in 0..self.n() {
            let o = out.row_mut(i);
            for &j in &self.cols[self.offsets[i]..self.offsets[i + 1]] {
                for (ok, &hk) in o.iter_mut().zip(h.row(j as usize)) {
                    *ok += hk;
                }
            }
            let s = self.inv_degree[i];
            o.iter_mut().for_each(|x| *x *= s);
        }
        Ok(out)
    }
}

/// Which degree statistic plays the role of d̄ in the theory constants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DegreeConvention {
    /// `(1/n) Σᵢ 1/dᵢ`.
    #[default]
    ReciprocalMean,
    /// `(1/n) Σᵢ dᵢ`, kept for sensitivity checks.
    MeanDegree,
}

/// `(1/n) Σᵢ 1/dᵢ`.
pub fn avg_inv_degree(g: &Graph) -> f64 {
    reciprocal_mean(&g.degrees)
}

/// `(1/n) Σᵢ 1/dᵢ` over a raw degree sequence.
pub fn reciprocal_mean(degrees: &[usize]) -> f64 {
    degrees.iter().map(|&d| 1.0 / d as f64).sum::<f64>() / degrees.len() as f64
}

pub fn avg_degree(g: &Graph) -> f64 {
    g.degrees.iter().sum::<usize>() as f64 / g.n as f64
}

pub fn dbar(g: &Graph, convention: DegreeConvention) -> f64 {
    match convention {
        DegreeConvention::ReciprocalMean => avg_inv_degree(g),
        DegreeConvention::MeanDegree => avg_degree(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn check_invariants(g: &Graph) {
        for i in 0..g.n() {
            assert!(g.has_edge(i, i));
            for j in 0..g.n() {
                assert_eq!(g.has_edge(i, j), g.has_edge(j, i));
            }
            assert_eq!(g.degrees()[i], (0..g.n()).filter(|&j| g.has_edge(i, j)).count());
            assert!(g.degrees()[i] >= 1);
        }
    }

    #[test]
    fn p_one_is_complete() {
        let g = er_graph(3, 1.0, 7).unwrap();
        assert_eq!(g.degrees(), &[3, 3, 3]);
        assert_eq!(g, Graph::complete(3).unwrap());
    }

    #[test]
    fn p_zero_is_identity() {
        let g = er_graph(4, 0.0, 7).unwrap();
        assert_eq!(g.degrees(), &[1, 1, 1, 1]);
        assert_eq!(g.adjacency_matrix(), Matrix::identity(4));
    }

    #[test]
    fn rejects_empty_graph_and_bad_probability() {
        assert_eq!(er_graph(0, 0.5, 1), Err(Error::InvalidSize("graph needs at least one node")));
        assert!(matches!(er_graph(3, 1.5, 1), Err(Error::InvalidProbability(_))));
        assert!(matches!(Graph::from_edges(2, [(0, 2)]), Err(Error::InvalidEdge(0, 2, 2))));
    }

    #[test]
    fn mean_degree_matches_binomial() {
        let n = 1000;
        let g = er_graph(n, 0.5, 2024).unwrap();
        let mean = avg_degree(&g);
        // edge count ~ Bin(n(n-1)/2, 1/2); mean degree = 1 + 2E/n
        let pairs = (n * (n - 1) / 2) as f64;
        let expected = 1.0 + 2.0 * pairs * 0.5 / n as f64;
        let sd = 2.0 * (pairs * 0.25).sqrt() / n as f64;
        assert_relative_eq!(expected, 500.5);
        assert!((mean - expected).abs() <= 5.0 * sd, "mean {mean} vs {expected} ± {sd}");
    }

    #[test]
    fn conv_operator_examples() {
        let p = conv_operator(&Graph::complete(3).unwrap()).to_matrix();
        assert!(p.as_slice().iter().all(|&x| x == 1.0 / 3.0));
        assert_eq!(conv_operator(&Graph::isolated(4).unwrap()).to_matrix(), Matrix::identity(4));
        let path = Graph::from_edges(2, [(0, 1)]).unwrap();
        assert!(conv_operator(&path).to_matrix().as_slice().iter().all(|&x| x == 0.5));
    }

    #[test]
    fn apply_matches_dense_product() {
        let g = er_graph(12, 0.4, 3).unwrap();
        let p = conv_operator(&g);
        let h = Matrix::from_fn(12, 3, |i, j| (i as f64 - 2.0 * j as f64).sin());
        let dense = p.to_matrix().matmul(&h).unwrap();
        let fast = p.apply(&h).unwrap();
        assert!(dense.sub(&fast).unwrap().frobenius_norm() < 1e-14);
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(p.get(i, j), p.to_matrix()[(i, j)]);
            }
        }
    }

    #[test]
    fn degree_statistics() {
        let id = Graph::isolated(4).unwrap();
        assert_eq!(avg_inv_degree(&id), 1.0);
        assert_eq!(id.min_degree(), 1);
        let k3 = Graph::complete(3).unwrap();
        assert_relative_eq!(avg_inv_degree(&k3), 1.0 / 3.0);
        assert_eq!(k3.min_degree(), 3);
        let three = Graph::from_edges(3, [(1, 2)]).unwrap();
        assert_eq!(three.degrees(), &[1, 2, 2]);
        assert_relative_eq!(avg_inv_degree(&three), (1.0 + 0.5 + 0.5) / 3.0);
        assert_relative_eq!(dbar(&three, DegreeConvention::MeanDegree), 5.0 / 3.0);
    }

    #[test]
    fn reciprocal_mean_for_degrees_one_two_four() {
        // no 3-node graph has degrees (1, 2, 4); take them from a 5-node graph
        let g = Graph::from_edges(5, [(1, 3), (3, 2), (3, 4)]).unwrap();
        let picked: Vec<usize> = [0, 1, 3].iter().map(|&i| g.degrees()[i]).collect();
        assert_eq!(picked, vec![1, 2, 4]);
        assert_relative_eq!(reciprocal_mean(&picked), (1.0 + 0.5 + 0.25) / 3.0);
        assert_relative_eq!(reciprocal_mean(&picked), 7.0 / 12.0);
    }

    #[test]
    fn same_seed_same_graph() {
        assert_eq!(er_graph(60, 0.3, 11).unwrap(), er_graph(60, 0.3, 11).unwrap());
        assert_ne!(er_graph(60, 0.3, 11).unwrap(), er_graph(60, 0.3, 12).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn generated_graphs_are_valid(n in 1usize..40, p in 0.0f64..=1.0, seed in any::<u64>()) {
            let g = er_graph(n, p, seed).unwrap();
            check_invariants(&g);
            let op = conv_operator(&g);
            for i in 0..n {
                prop_assert!((op.row_sum(i) - 1.0).abs() <= 1e-12);
                for j in 0..n {
                    let v = op.get(i, j);
                    prop_assert!(v == 0.0 || v == 1.0 / g.degrees()[i] as f64);
                }
            }
        }
    }
}
