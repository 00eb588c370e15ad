use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Dependence, MarginSpec, SmithParams};

/// Layout of the free parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// `(s11, s12, s22, mu, sigma, xi)`.
    Constant,
    /// `(s11, s12, s22, alpha0, alpha1, alpha2, beta0, beta1, beta2, xi)`.
    Spatial,
    /// `n` unconstrained parameters with the identity transform (generic objectives).
    Free(usize),
}

impl ParamKind {
    pub fn len(&self) -> usize {
        match self {
            ParamKind::Constant => 6,
            ParamKind::Spatial => 10,
            ParamKind::Free(n) => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> Vec<String> {
        let fixed: &[&str] = match self {
            ParamKind::Constant => &["sigma11", "sigma12", "sigma22", "mu", "sigma", "xi"],
            ParamKind::Spatial => &[
                "sigma11", "sigma12", "sigma22", "alpha0", "alpha1", "alpha2", "beta0", "beta1", "beta2", "xi",
            ],
            ParamKind::Free(n) => return (0..*n).map(|i| format!("theta{i}")).collect(),
        };
        fixed.iter().map(|s| s.to_string()).collect()
    }

    /// Index of the scale coordinate that is log-transformed, if any.
    fn log_scale_index(&self) -> Option<usize> {
        match self {
            ParamKind::Constant => Some(4),
            ParamKind::Spatial => Some(6),
            ParamKind::Free(_) => None,
        }
    }

    fn has_dependence(&self) -> bool {
        !matches!(self, ParamKind::Free(_))
    }

    fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.len(),
                values.len()
            )));
        }
        Ok(())
    }

    /// Maps natural parameters to the unconstrained optimization space:
    /// log-Cholesky for the dependence matrix, log for the (base) scale.
    pub fn to_unconstrained(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_len(values)?;
        let mut u = values.to_vec();
        if self.has_dependence() {
            Dependence::new(values[0], values[1], values[2])?;
            let l11 = values[0].sqrt();
            let l21 = values[1] / l11;
            let l22 = (values[2] - l21 * l21).sqrt();
            u[0] = l11.ln();
            u[1] = l21;
            u[2] = l22.ln();
        }
        if let Some(i) = self.log_scale_index() {
            if !(values[i] > 0.0) {
                return Err(Error::InvalidModel(format!("{} must be positive, got {}", self.names()[i], values[i])));
            }
            u[i] = values[i].ln();
        }
        Ok(u)
    }

    /// Inverse of [`ParamKind::to_unconstrained`].
    pub fn from_unconstrained(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        let mut v = u.to_vec();
        if self.has_dependence() {
            let l11 = u[0].exp();
            let l21 = u[1];
            let l22 = u[2].exp();
            v[0] = l11 * l11;
            v[1] = l11 * l21;
            v[2] = l21 * l21 + l22 * l22;
        }
        if let Some(i) = self.log_scale_index() {
            v[i] = u[i].exp();
        }
        Ok(v)
    }

    pub fn to_smith(&self, values: &[f64]) -> Result<SmithParams> {
        if !self.has_dependence() {
            return Err(Error::InvalidArgument("free parameters do not describe a Smith model".into()));
        }
        self.check_len(values)?;
        let dependence = Dependence::new(values[0], values[1], values[2])?;
        let margins = match self {
            ParamKind::Constant => MarginSpec::Constant { mu: values[3], sigma: values[4], xi: values[5] },
            ParamKind::Spatial => MarginSpec::SpatiallyVarying {
                alpha: [values[3], values[4], values[5]],
                beta: [values[6], values[7], values[8]],
                xi: values[9],
            },
            ParamKind::Free(_) => unreachable!("rejected above"),
        };
        Ok(SmithParams { dependence, margins })
    }
}

/// Ordered free parameters together with their layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub kind: ParamKind,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn new(kind: ParamKind, values: Vec<f64>) -> Result<Self> {
        kind.check_len(&values)?;
        Ok(Self { kind, values })
    }

    pub fn from_smith(params: &SmithParams) -> Self {
        let d = params.dependence;
        let (kind, mut values) = match params.margins {
            MarginSpec::Constant { mu, sigma, xi } => (ParamKind::Constant, vec![mu, sigma, xi]),
            MarginSpec::SpatiallyVarying { alpha, beta, xi } => {
                let mut v = alpha.to_vec();
                v.extend_from_slice(&beta);
                v.push(xi);
                (ParamKind::Spatial, v)
            }
        };
        values.splice(0..0, [d.s11, d.s12, d.s22]);
        Self { kind, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.kind.names()
    }

    pub fn to_smith(&self) -> Result<SmithParams> {
        self.kind.to_smith(&self.values)
    }

    pub fn to_unconstrained(&self) -> Result<Vec<f64>> {
        self.kind.to_unconstrained(&self.values)
    }

    pub fn from_unconstrained(kind: ParamKind, u: &[f64]) -> Result<Self> {
        Ok(Self { kind, values: kind.from_unconstrained(u)? })
    }
}
