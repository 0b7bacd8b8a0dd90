//! Monotone activations and the constants the convergence analysis needs.
//!
//! | kind       | σ(0)  | Lipschitz bound used in checks |
//! |------------|-------|--------------------------------|
//! | ReLU       | 0     | 1                              |
//! | LeakyReLU  | 0     | 1                              |
//! | Sigmoid    | 1/2   | 1                              |
//! | Tanh       | 0     | 1                              |
//! | Softplus   | ln 2  | 1                              |
//! | Swish      | 0     | 1.1 (sup of σ′ is ≈ 1.0998)    |

use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    /// Negative-side slope. Parsing only accepts slopes in (0, 1); a slope
    /// of exactly 1 (the identity) is constructible directly for tests.
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
    Softplus,
    Swish,
}

impl Activation {
    pub const ALL_DEFAULT: [Activation; 6] = [
        Activation::Relu,
        Activation::LeakyRelu(0.2),
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Softplus,
        Activation::Swish,
    ];

    pub fn leaky_relu(slope: f64) -> Result<Activation> {
        if slope > 0.0 && slope < 1.0 {
            Ok(Activation::LeakyRelu(slope))
        } else {
            Err(Error::UnknownActivation(alloc::format!("leaky_relu:{slope} (slope must lie in (0, 1))")))
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(a) => {
                if x >= 0.0 {
                    x
                } else {
                    a * x
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => libm::tanh(x),
            Activation::Softplus => x.max(0.0) + libm::log1p(libm::exp(-x.abs())),
            Activation::Swish => x * sigmoid(x),
        }
    }

    pub fn apply_checked(self, x: f64) -> Result<f64> {
        if x.is_finite() {
            Ok(self.apply(x))
        } else {
            Err(Error::NonFiniteInput(x))
        }
    }

    /// Elementwise application.
    pub fn apply_matrix(self, m: &Matrix) -> Matrix {
        m.map(|x| self.apply(x))
    }

    pub fn apply_matrix_checked(self, m: &Matrix) -> Result<Matrix> {
        if let Some(&bad) = m.as_slice().iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput(bad));
        }
        Ok(self.apply_matrix(m))
    }

    /// `L_σ` in `|σ(x)| ≤ L_σ|x|`, taken as 1 for every built-in kind.
    pub fn l_sigma(self) -> f64 {
        1.0
    }

    /// Lipschitz constant used by the contract checks.
    pub fn lipschitz_bound(self) -> f64 {
        match self {
            Activation::Swish => 1.1,
            _ => 1.0,
        }
    }

    pub fn sigma0(self) -> f64 {
        match self {
            Activation::Sigmoid => 0.5,
            Activation::Softplus => core::f64::consts::LN_2,
            _ => 0.0,
        }
    }

    /// Whether `|σ(x)| ≤ L_σ|x|` holds for all x.
    pub fn vanishes_at_origin(self) -> bool {
        self.sigma0() == 0.0
    }

    pub fn name(self) -> String {
        self.to_string()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => f.write_str("relu"),
            Activation::LeakyRelu(a) => write!(f, "leaky_relu:{a}"),
            Activation::Sigmoid => f.write_str("sigmoid"),
            Activation::Tanh => f.write_str("tanh"),
            Activation::Softplus => f.write_str("softplus"),
            Activation::Swish => f.write_str("swish"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, arg) = match lower.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (lower.as_str(), None),
        };
        let unknown = || Error::UnknownActivation(s.to_string());
        match (name, arg) {
            ("relu", None) => Ok(Activation::Relu),
            ("sigmoid", None) => Ok(Activation::Sigmoid),
            ("tanh", None) => Ok(Activation::Tanh),
            ("softplus", None) => Ok(Activation::Softplus),
            ("swish", None) => Ok(Activation::Swish),
            ("leaky_relu" | "leakyrelu", Some(a)) => {
                let slope: f64 = a.parse().map_err(|_| unknown())?;
                Activation::leaky_relu(slope)
            }
            _ => Err(unknown()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn definitions() {
        assert_eq!(Activation::Relu.apply(-1.0), 0.0);
        assert_eq!(Activation::Relu.apply(2.0), 2.0);
        assert_relative_eq!(Activation::LeakyRelu(0.2).apply(-1.0), -0.2);
        assert_eq!(Activation::Swish.apply(0.0), 0.0);
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert_relative_eq!(Activation::Softplus.apply(0.0), core::f64::consts::LN_2);
        for kind in Activation::ALL_DEFAULT {
            assert_relative_eq!(kind.apply(0.0), kind.sigma0());
        }
    }

    #[test]
    fn softplus_is_stable_far_out() {
        assert_eq!(Activation::Softplus.apply(800.0), 800.0);
        assert!(Activation::Softplus.apply(-800.0) >= 0.0);
        assert!(Activation::Sigmoid.apply(-800.0).is_finite());
        assert_relative_eq!(Activation::Softplus.apply(1.0), (1.0f64 + 1.0f64.exp()).ln(), max_relative = 1e-15);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        assert_eq!(Activation::Relu.apply_checked(f64::NAN).unwrap_err().to_string(), "non-finite activation input NaN");
        assert!(Activation::Tanh.apply_checked(f64::INFINITY).is_err());
        let m = Matrix::from_rows(&[[1.0, f64::NEG_INFINITY]]);
        assert!(Activation::Swish.apply_matrix_checked(&m).is_err());
    }

    #[test]
    fn parses_config_strings() {
        assert_eq!("ReLU".parse::<Activation>().unwrap(), Activation::Relu);
        assert_eq!("leaky_relu:0.2".parse::<Activation>().unwrap(), Activation::LeakyRelu(0.2));
        assert_eq!("LEAKY_RELU:0.05".parse::<Activation>().unwrap(), Activation::LeakyRelu(0.05));
        assert_eq!(" Swish ".parse::<Activation>().unwrap(), Activation::Swish);
        assert!("leaky_relu".parse::<Activation>().is_err());
        assert!("leaky_relu:1".parse::<Activation>().is_err());
        assert!("gelu".parse::<Activation>().is_err());
        for kind in Activation::ALL_DEFAULT {
            assert_eq!(kind.to_string().parse::<Activation>().unwrap(), kind);
        }
    }

    #[test]
    fn swish_derivative_exceeds_one() {
        // σ′ of swish peaks near x ≈ 2.4 at ≈ 1.0998
        let h = 1e-6;
        let peak = (0..4000)
            .map(|i| i as f64 * 0.001 + 1.0)
            .map(|x| (Activation::Swish.apply(x + h) - Activation::Swish.apply(x - h)) / (2.0 * h))
            .fold(0.0, f64::max);
        assert!(peak > 1.09 && peak < 1.1, "{peak}");
    }

    fn kinds() -> impl Strategy<Value = Activation> {
        prop_oneof![
            Just(Activation::Relu),
            Just(Activation::LeakyRelu(0.2)),
            Just(Activation::LeakyRelu(0.05)),
            Just(Activation::Sigmoid),
            Just(Activation::Tanh),
            Just(Activation::Softplus),
            Just(Activation::Swish),
        ]
    }

    proptest! {
        #[test]
        fn monotone_and_lipschitz(kind in kinds(), a in -50.0f64..50.0, b in -50.0f64..50.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            // swish dips below zero on the negative axis
            if kind != Activation::Swish {
                prop_assert!(kind.apply(lo) <= kind.apply(hi));
            }
            prop_assert!((kind.apply(hi) - kind.apply(lo)).abs() <= kind.lipschitz_bound() * (hi - lo) + 1e-12);
        }

        #[test]
        fn linear_growth_bound_for_kinds_vanishing_at_zero(kind in kinds(), x in -50.0f64..50.0) {
            if kind.vanishes_at_origin() {
                prop_assert!(kind.apply(x).abs() <= kind.l_sigma() * x.abs() + 1e-15);
            }
        }
    }
}
