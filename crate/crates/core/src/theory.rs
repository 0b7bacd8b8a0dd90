//! Convergence constants, sample-size conditions and confinement sets,
//! evaluated as plain numbers.
//!
//! With `s = d + 4d·d̄` for node-level tasks:
//!
//! ```text
//!            NGNN                                   GGNN
//! γ₁²  αL²d_out/2 − 3α²s²L⁴                 αL²d_out/2 − 12α²d²L⁴n_max⁴
//! γ₂²  2αs²/d_out + 6α²s²L²                 8αd²n_max⁴/d_out + 24α²d²L⁴n_max²
//! γ₃²  (2α + 3α²L²d_out) / (γ₁²L²d_out)
//! D    max{‖v₀−v*‖, √(2γ₂‖v*‖²/γ₁ + γ₃)}
//! ρ    min{v₀ᵀv*, L²d_out‖v*‖²/(sL²+1)}      min{v₀ᵀv*, L²d_out‖v*‖²/(2dL²n_max²+1)}
//! D₀   D + ‖v*‖
//! α ≤  1/(2(‖v₀−v*‖²+‖v*‖²)) ∧ d_out/(6s²L²)   … ∧ d_out/(24d²L²n_max⁴)
//! ```
//!
//! When γ₁'s radicand is negative the constant is undefined; it is reported
//! as NaN with `gamma1_valid = false`, γ₃ inherits the NaN, and D falls back
//! to its first branch `‖v₀ − v*‖`.

use alloc::vec::Vec;

use crate::linalg::{self, Matrix};

/// Graph statistics entering the constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Structure {
    /// Node-level task on one graph.
    Node { dbar: f64, d_min: usize },
    /// Graph-level task; `n_max` is the largest graph size.
    Graph { n_max: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoryInput {
    pub structure: Structure,
    pub d: usize,
    pub d_out: usize,
    pub l_sigma: f64,
    pub alpha: f64,
    pub v0: Vec<f64>,
    pub v_star: Vec<f64>,
    /// Absolute constant `c` of the statistical terms.
    pub c_abs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoryConstants {
    pub structure: Structure,
    pub d: usize,
    pub d_out: usize,
    pub l_sigma: f64,
    pub alpha: f64,
    pub c_abs: f64,
    pub gamma1_radicand: f64,
    pub gamma1_valid: bool,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    /// D.
    pub radius: f64,
    pub rho: f64,
    /// D₀.
    pub d0: f64,
    /// Both terms of the learning-rate bound; `alpha_max` is their minimum.
    pub alpha_bound_terms: (f64, f64),
    pub alpha_max: f64,
    pub v_star_norm: f64,
    pub v0_dist: f64,
    pub v0_dot_v_star: f64,
}

impl TheoryConstants {
    pub fn alpha_within_bound(&self) -> bool {
        self.alpha <= self.alpha_max
    }

    /// The α at which γ₁'s radicand crosses zero.
    pub fn gamma1_root(&self) -> f64 {
        gamma1_root(self.structure, self.d, self.d_out, self.l_sigma)
    }
}

fn s_node(d: usize, dbar: f64) -> f64 {
    let d = d as f64;
    d + 4.0 * d * dbar
}

/// Radicand of γ₁ as a function of α.
pub fn gamma1_radicand(structure: Structure, d: usize, d_out: usize, l_sigma: f64, alpha: f64) -> f64 {
    let l2 = l_sigma * l_sigma;
    let lead = alpha * l2 * d_out as f64 / 2.0;
    match structure {
        Structure::Node { dbar, .. } => {
            let s = s_node(d, dbar);
            lead - 3.0 * alpha * alpha * s * s * l2 * l2
        }
        Structure::Graph { n_max } => {
            let (d, nm) = (d as f64, n_max as f64);
            lead - 12.0 * alpha * alpha * d * d * l2 * l2 * libm::pow(nm, 4.0)
        }
    }
}

/// Positive root in α of the (quadratic) γ₁ radicand.
pub fn gamma1_root(structure: Structure, d: usize, d_out: usize, l_sigma: f64) -> f64 {
    let l2 = l_sigma * l_sigma;
    match structure {
        Structure::Node { dbar, .. } => {
            let s = s_node(d, dbar);
            d_out as f64 / (6.0 * s * s * l2)
        }
        Structure::Graph { n_max } => d_out as f64 / (24.0 * (d * d) as f64 * l2 * libm::pow(n_max as f64, 4.0)),
    }
}

pub fn constants(input: &TheoryInput) -> TheoryConstants {
    let TheoryInput { structure, d, d_out, l_sigma, alpha, c_abs, .. } = *input;
    let l2 = l_sigma * l_sigma;
    let dout = d_out as f64;
    let v_star_norm = linalg::norm(&input.v_star);
    let v0_dist = linalg::norm(&linalg::sub_vec(&input.v0, &input.v_star));
    let v0_dot_v_star = linalg::dot(&input.v0, &input.v_star);

    let radicand = gamma1_radicand(structure, d, d_out, l_sigma, alpha);
    let gamma1_valid = radicand >= 0.0;
    let gamma1 = if gamma1_valid { libm::sqrt(radicand) } else { f64::NAN };

    let gamma2_sq = match structure {
        Structure::Node { dbar, .. } => {
            let s = s_node(d, dbar);
            2.0 * alpha * s * s / dout + 6.0 * alpha * alpha * s * s * l2
        }
        Structure::Graph { n_max } => {
            let (df, nm) = (d as f64, n_max as f64);
            8.0 * alpha * df * df * libm::pow(nm, 4.0) / dout + 24.0 * alpha * alpha * df * df * l2 * l2 * nm * nm
        }
    };
    let gamma2 = libm::sqrt(gamma2_sq);
    let gamma3 = libm::sqrt((2.0 * alpha + 3.0 * alpha * alpha * l2 * dout) / (gamma1 * gamma1 * l2 * dout));

    let second = libm::sqrt(2.0 * gamma2 * v_star_norm * v_star_norm / gamma1 + gamma3);
    let radius = if second.is_nan() { v0_dist } else { v0_dist.max(second) };

    let rho_second = match structure {
        Structure::Node { dbar, .. } => l2 * dout * v_star_norm * v_star_norm / (s_node(d, dbar) * l2 + 1.0),
        Structure::Graph { n_max } => {
            l2 * dout * v_star_norm * v_star_norm / (2.0 * d as f64 * l2 * (n_max * n_max) as f64 + 1.0)
        }
    };
    let rho = v0_dot_v_star.min(rho_second);

    let first_bound = 1.0 / (2.0 * (v0_dist * v0_dist + v_star_norm * v_star_norm));
    let second_bound = gamma1_root(structure, d, d_out, l_sigma);

    TheoryConstants {
        structure,
        d,
        d_out,
        l_sigma,
        alpha,
        c_abs,
        gamma1_radicand: radicand,
        gamma1_valid,
        gamma1,
        gamma2,
        gamma3,
        radius,
        rho,
        d0: radius + v_star_norm,
        alpha_bound_terms: (first_bound, second_bound),
        alpha_max: first_bound.min(second_bound),
        v_star_norm,
        v0_dist,
        v0_dot_v_star,
    }
}

/// Statistical-error terms. These carry the unknown absolute constant and
/// are for reporting only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatisticalTerms {
    pub a_w: f64,
    pub eta_w: f64,
    pub a_v: f64,
    pub eta_v: f64,
}

/// Inputs shared by the statistical terms and the sample condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleInput {
    pub n: usize,
    pub sigma0: f64,
    /// Noise scale ν (the square root of the noise variance for Gaussian noise).
    pub nu: f64,
    /// `‖Ξ⁻¹‖`.
    pub xi_inv_norm: f64,
}

fn rate(n: usize) -> f64 {
    let n = n as f64;
    libm::sqrt(libm::log(n) / n)
}

pub fn statistical_terms(c: &TheoryConstants, s: &SampleInput) -> StatisticalTerms {
    let r = rate(s.n);
    let k = 1.0 + s.sigma0.abs();
    let a_w = 4.0 / c.c_abs * r * s.xi_inv_norm * c.d0;
    let a_v = 2.0 / c.c_abs * r;
    let (eta_w, eta_v) = match c.structure {
        Structure::Node { d_min, .. } => {
            let ratio = c.d as f64 / d_min as f64;
            (
                a_w * (c.d0 * ratio * k + libm::sqrt(ratio) * s.nu),
                a_v * (c.d0 * ratio * k * k + libm::sqrt(ratio) * k * s.nu),
            )
        }
        Structure::Graph { n_max } => {
            let sq = libm::sqrt(n_max as f64);
            (a_w * sq * (sq * k * c.d0 + s.nu), a_v * sq * k * (sq * k * c.d0 + s.nu))
        }
    };
    StatisticalTerms { a_w, eta_w, a_v, eta_v }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleCondition {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Sample-size sufficiency condition; `tr_w0 = Tr(W*ᵀW₀)`.
pub fn sample_condition(c: &TheoryConstants, s: &SampleInput, tr_w0: f64) -> SampleCondition {
    let lhs = 2.0 / c.c_abs * rate(s.n);
    let k = 1.0 + s.sigma0.abs();
    let w_term = c.rho / (16.0 * (1.0 + c.alpha * c.rho) * s.xi_inv_norm * c.d0) * tr_w0;
    let v_term = c.rho / (c.v_star_norm * k);
    let numerator = w_term.min(v_term);
    let denominator = match c.structure {
        Structure::Node { d_min, .. } => {
            let dm = d_min as f64;
            c.d0 * (c.d as f64 / (dm * dm)) * k + (c.d as f64 / dm) * s.nu
        }
        Structure::Graph { n_max } => n_max as f64 * k * c.d0 + libm::sqrt(n_max as f64) * s.nu,
    };
    let rhs = numerator / denominator;
    SampleCondition { lhs, rhs, holds: lhs <= rhs }
}

pub const UNIT_NORM_TOL: f64 = 1e-9;

/// Membership of `(W_t, v_t)` in the confinement sets.
pub fn check_confinement(
    w_t: &Matrix,
    v_t: &[f64],
    w_star: &Matrix,
    v_star: &[f64],
    w_0: &Matrix,
    c: &TheoryConstants,
) -> (bool, bool) {
    let unit = (w_t.frobenius_norm() - 1.0).abs() <= UNIT_NORM_TOL;
    let confined_w = unit && w_star.inner(w_t) >= w_star.inner(w_0) / 2.0;
    let dist = linalg::norm(&linalg::sub_vec(v_t, v_star));
    let confined_v = dist <= c.radius && linalg::dot(v_t, v_star) >= c.rho;
    (confined_w, confined_v)
}
