//! Lipschitz losses: absolute error, Huber, and the margin logistic loss.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::Network;

/// Per-example loss `ℓ(prediction, y)` with its derivative in the prediction.
pub trait PointLoss: Sync {
    fn value(&self, prediction: f64, y: f64) -> f64;

    fn derivative(&self, prediction: f64, y: f64) -> f64;

    /// Lipschitz constant `K_ℓ` in the prediction.
    fn lipschitz(&self) -> f64;

    /// Rejects targets outside the loss's domain.
    fn validate(&self, _y: f64) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    L1,
    Huber { delta: f64 },
    Logistic,
}

impl LossSpec {
    pub fn huber(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Config(format!("huber delta must be positive, got {delta}")));
        }
        Ok(LossSpec::Huber { delta })
    }

    pub fn lipschitz_const(&self) -> f64 {
        match self {
            LossSpec::L1 | LossSpec::Logistic => 1.0,
            LossSpec::Huber { delta } => *delta,
        }
    }
}

/// `log(1 + e^{-v})` without overflow.
#[inline]
pub fn logistic_phi(v: f64) -> f64 {
    (-v.abs()).exp().ln_1p() + (-v).max(0.0)
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl PointLoss for LossSpec {
    #[inline]
    fn value(&self, prediction: f64, y: f64) -> f64 {
        match *self {
            LossSpec::L1 => (prediction - y).abs(),
            LossSpec::Huber { delta } => {
                let r = (prediction - y).abs();
                if r <= delta {
                    0.5 * r * r
                } else {
                    delta * r - 0.5 * delta * delta
                }
            }
            LossSpec::Logistic => logistic_phi(y * prediction),
        }
    }

    #[inline]
    fn derivative(&self, prediction: f64, y: f64) -> f64 {
        match *self {
            LossSpec::L1 => {
                let r = prediction - y;
                if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossSpec::Huber { delta } => (prediction - y).clamp(-delta, delta),
            LossSpec::Logistic => -y * sigmoid(-y * prediction),
        }
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz_const()
    }

    fn validate(&self, y: f64) -> Result<()> {
        match self {
            LossSpec::Logistic if y != 1.0 && y != -1.0 => Err(Error::InvalidLabel(y)),
            _ => Ok(()),
        }
    }
}

pub fn loss_value(spec: &LossSpec, prediction: f64, y: f64) -> Result<f64> {
    spec.validate(y)?;
    Ok(spec.value(prediction, y))
}

pub fn loss_grad(spec: &LossSpec, prediction: f64, y: f64) -> Result<f64> {
    spec.validate(y)?;
    Ok(spec.derivative(prediction, y))
}

/// Mean loss of the clamped network over `data`.
pub fn empirical_risk<L: PointLoss + ?Sized>(loss: &L, net: &Network, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::DegenerateSample("empty dataset".into()));
    }
    if data.dim() != net.architecture().input_dim() {
        return Err(Error::Shape {
            expected: net.architecture().input_dim(),
            got: data.dim(),
        });
    }
    let mut total = 0.0;
    for (x, y) in data.iter() {
        loss.validate(y)?;
        total += loss.value(net.clamp_output(net.forward_raw(x)), y);
    }
    Ok(total / data.len() as f64)
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossSpec::L1 => write!(f, "l1"),
            LossSpec::Huber { delta } => write!(f, "huber:{delta}"),
            LossSpec::Logistic => write!(f, "logistic"),
        }
    }
}

impl FromStr for LossSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "l1" => Ok(LossSpec::L1),
            "logistic" => Ok(LossSpec::Logistic),
            _ => match s.strip_prefix("huber:") {
                Some(d) => {
                    let delta: f64 = d
                        .parse()
                        .map_err(|_| Error::Config(format!("bad huber delta in {s:?}")))?;
                    LossSpec::huber(delta)
                }
                None => Err(Error::Config(format!(
                    "unknown loss {s:?}; expected l1, huber:<delta> or logistic"
                ))),
            },
        }
    }
}

impl Serialize for LossSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LossSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Architecture;

    #[test]
    fn huber_branches() {
        let h = LossSpec::Huber { delta: 1.0 };
        assert_eq!(loss_value(&h, 0.5, 0.0).unwrap(), 0.125);
        assert_eq!(loss_value(&h, 2.0, 0.0).unwrap(), 1.5);
        assert_eq!(loss_grad(&h, 0.5, 0.0).unwrap(), 0.5);
        assert_eq!(loss_grad(&h, 5.0, 0.0).unwrap(), 1.0);
        assert_eq!(loss_grad(&h, -5.0, 0.0).unwrap(), -1.0);
    }

    #[test]
    fn huber_continuous_at_delta() {
        let delta = 2.5;
        let h = LossSpec::Huber { delta };
        let inner = 0.5 * delta * delta;
        assert!((h.value(delta, 0.0) - inner).abs() < 1e-12);
        let above = h.value(delta * (1.0 + 1e-13), 0.0);
        assert!((above - inner).abs() < 1e-11);
        assert!((h.derivative(delta, 0.0) - delta).abs() < 1e-12);
    }

    #[test]
    fn logistic_values() {
        let l = LossSpec::Logistic;
        assert!((loss_value(&l, 0.0, 1.0).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert_eq!(loss_grad(&l, 0.0, 1.0).unwrap(), -0.5);
        assert!(matches!(loss_value(&l, 0.0, 0.0), Err(Error::InvalidLabel(_))));
        assert!(loss_value(&l, 800.0, -1.0).unwrap().is_finite());
        assert!((loss_value(&l, 800.0, -1.0).unwrap() - 800.0).abs() < 1e-9);
    }

    #[test]
    fn l1_kink_convention() {
        assert_eq!(loss_grad(&LossSpec::L1, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(loss_value(&LossSpec::L1, 0.0, -2.0).unwrap(), 2.0);
    }

    #[test]
    fn lipschitz_constants() {
        assert_eq!(LossSpec::L1.lipschitz_const(), 1.0);
        assert_eq!(LossSpec::Logistic.lipschitz_const(), 1.0);
        assert_eq!(LossSpec::Huber { delta: 10.0 }.lipschitz_const(), 10.0);
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("l1".parse::<LossSpec>().unwrap(), LossSpec::L1);
        assert_eq!("huber:10".parse::<LossSpec>().unwrap(), LossSpec::Huber { delta: 10.0 });
        assert_eq!("logistic".parse::<LossSpec>().unwrap(), LossSpec::Logistic);
        assert!("huber:-1".parse::<LossSpec>().is_err());
        assert!("hinge".parse::<LossSpec>().is_err());
        assert_eq!(LossSpec::Huber { delta: 2.5 }.to_string(), "huber:2.5");
    }

    fn zero_net() -> Network {
        Network::zeros(Architecture::new(vec![1, 2, 1], 1.0, 1.0).unwrap())
    }

    #[test]
    fn empirical_risk_examples() {
        let net = zero_net();
        let data = Dataset::from_rows(&[(vec![0.3], 1.0), (vec![0.9], -1.0)]).unwrap();
        assert_eq!(empirical_risk(&LossSpec::L1, &net, &data).unwrap(), 1.0);

        let doubled = Dataset::from_rows(&[
            (vec![0.3], 1.0),
            (vec![0.3], 1.0),
            (vec![0.9], -1.0),
            (vec![0.9], -1.0),
        ])
        .unwrap();
        assert_eq!(empirical_risk(&LossSpec::L1, &net, &doubled).unwrap(), 1.0);

        let single = Dataset::from_rows(&[(vec![0.3], 0.5)]).unwrap();
        let h = LossSpec::Huber { delta: 1.0 };
        assert_eq!(
            empirical_risk(&h, &net, &single).unwrap(),
            loss_value(&h, 0.0, 0.5).unwrap()
        );
    }
}
