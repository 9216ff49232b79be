use std::fmt;
use std::str::FromStr;

use ndarray::{Array, Dimension, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest double below 1; keeps squashing activations strictly inside their open range.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Bottleneck nonlinearity applied to the content embedding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    None,
    Relu,
    Elu,
    Tanh,
    /// `1 / (1 + exp(-alpha * x))`
    Sigmoid { alpha: f64 },
}

impl Activation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Activation::Sigmoid { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::Config(format!("sigmoid alpha must be positive, got {alpha}")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Activation::None => x,
            Activation::Relu => x.max(0.0),
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Tanh => x.tanh().clamp(-BELOW_ONE, BELOW_ONE),
            Activation::Sigmoid { alpha } => {
                let z = alpha * x;
                let y = if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                };
                y.clamp(f64::MIN_POSITIVE, BELOW_ONE)
            }
        }
    }

    /// Derivative at `x`, given `y = apply(x)`.
    #[inline]
    pub fn derivative(&self, x: f64, y: f64) -> f64 {
        match *self {
            Activation::None => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    y + 1.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid { alpha } => alpha * y * (1.0 - y),
        }
    }

    /// Open or closed interval every output is guaranteed to lie in.
    pub fn contains(&self, y: f64) -> bool {
        match self {
            Activation::None => y.is_finite(),
            Activation::Relu => y >= 0.0,
            Activation::Elu => y >= -1.0,
            Activation::Tanh => y > -1.0 && y < 1.0,
            Activation::Sigmoid { .. } => y > 0.0 && y < 1.0,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Activation::None => "none",
            Activation::Relu => "relu",
            Activation::Elu => "elu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid { .. } => "sigmoid",
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            Activation::Sigmoid { alpha } => Some(alpha),
            _ => None,
        }
    }

    pub fn backward<D: Dimension>(&self, x: &Array<f64, D>, y: &Array<f64, D>, dy: &Array<f64, D>) -> Array<f64, D> {
        Zip::from(x).and(y).and(dy).map_collect(|&x, &y, &d| d * self.derivative(x, y))
    }
}

/// Elementwise activation; `Activation::None` is the identity.
pub fn apply_activation<D: Dimension>(x: &Array<f64, D>, spec: Activation) -> Array<f64, D> {
    if spec == Activation::None {
        return x.clone();
    }
    x.mapv(|v| spec.apply(v))
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.alpha() {
            Some(alpha) => write!(f, "sigmoid:{alpha}"),
            None => f.write_str(self.kind_name()),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    /// Parses `none`, `relu`, `elu`, `tanh`, `sigmoid` or `sigmoid:<alpha>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let act = match (kind.to_ascii_lowercase().as_str(), arg) {
            ("none", None) => Activation::None,
            ("relu", None) => Activation::Relu,
            ("elu", None) => Activation::Elu,
            ("tanh", None) => Activation::Tanh,
            ("sigmoid", None) => Activation::Sigmoid { alpha: 1.0 },
            ("sigmoid", Some(a)) => Activation::Sigmoid {
                alpha: a.parse().map_err(|_| Error::Config(format!("bad sigmoid alpha '{a}'")))?,
            },
            _ => return Err(Error::Config(format!("unknown activation '{s}'"))),
        };
        act.validate()?;
        Ok(act)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;
    use proptest::prelude::*;

    #[test]
    fn sigmoid_is_half_at_zero() {
        for alpha in [0.01, 0.1, 1.0, 7.0] {
            assert_eq!(Activation::Sigmoid { alpha }.apply(0.0), 0.5);
        }
    }

    #[test]
    fn sigmoid_tenth_at_ten() {
        let want = 1.0 / (1.0 + (-1.0_f64).exp());
        assert!((Activation::Sigmoid { alpha: 0.1 }.apply(10.0) - want).abs() < 1e-15);
        assert!((want - 0.731059).abs() < 1e-6);
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("sigmoid:0.1".parse::<Activation>().unwrap(), Activation::Sigmoid { alpha: 0.1 });
        assert_eq!("ReLU".parse::<Activation>().unwrap(), Activation::Relu);
        assert_eq!(Activation::Sigmoid { alpha: 0.01 }.to_string(), "sigmoid:0.01");
        assert!("sigmoid:-1".parse::<Activation>().is_err());
        assert!("gelu".parse::<Activation>().is_err());
    }

    #[test]
    fn serde_is_tagged() {
        let json = serde_json::to_string(&Activation::Sigmoid { alpha: 0.1 }).unwrap();
        assert_eq!(json, r#"{"kind":"sigmoid","alpha":0.1}"#);
        assert_eq!(serde_json::from_str::<Activation>(r#"{"kind":"none"}"#).unwrap(), Activation::None);
    }

    #[test]
    fn none_is_identity() {
        let x = Array1::from(vec![-3.0, 0.0, 2.5]);
        assert_eq!(apply_activation(&x, Activation::None), x);
    }

    proptest! {
        #[test]
        fn tanh_is_shifted_sigmoid(x in -50.0f64..50.0) {
            let lhs = Activation::Tanh.apply(x);
            let rhs = 2.0 * Activation::Sigmoid { alpha: 2.0 }.apply(x) - 1.0;
            prop_assert!((lhs - rhs).abs() < 1e-7);
        }

        #[test]
        fn sigmoid_alpha_scales_input(x in -1e3f64..1e3, alpha in 1e-3f64..10.0) {
            let lhs = Activation::Sigmoid { alpha }.apply(x);
            let rhs = Activation::Sigmoid { alpha: 1.0 }.apply(alpha * x);
            prop_assert!((lhs - rhs).abs() < 1e-7);
        }

        #[test]
        fn outputs_stay_in_range(x in -1e6f64..1e6) {
            for act in [Activation::Relu, Activation::Elu, Activation::Tanh, Activation::Sigmoid { alpha: 0.1 }, Activation::Sigmoid { alpha: 5.0 }] {
                prop_assert!(act.contains(act.apply(x)), "{act} produced {}", act.apply(x));
            }
        }
    }
}
