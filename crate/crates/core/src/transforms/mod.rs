//! Monotone scalar transformations with forward, inverse, log-derivative,
//! and parameter-gradient contracts. Five families: identity, Wallace,
//! Yeo-Johnson, a positive-weight tanh mixture, and a neural-ODE flow.

mod node;
mod tanh_mix;
mod wallace;
mod yeo_johnson;

pub use node::{MlpParams, NodeConfig, NodeTransform, MLP_PARAM_COUNT};
pub use tanh_mix::TanhMixParams;
pub use wallace::WallaceParams;
pub use yeo_johnson::YeoJohnsonParams;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value, log-derivative, and their gradients with respect to the raw
/// parameter vector, all evaluated at one input point.
#[derive(Debug, Clone)]
pub struct PointGrad {
    pub z: f64,
    pub log_deriv: f64,
    pub d_z: Vec<f64>,
    pub d_log_deriv: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityParams {}

/// A parameterized strictly-increasing map of the real line.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum Transform {
    #[serde(rename = "identity")]
    Identity {
        #[serde(default)]
        params: IdentityParams,
    },
    #[serde(rename = "wallace")]
    Wallace { params: WallaceParams },
    #[serde(rename = "yeo_johnson")]
    YeoJohnson { params: YeoJohnsonParams },
    #[serde(rename = "tanh_mix")]
    TanhMix { params: TanhMixParams },
    #[serde(rename = "node")]
    Node(NodeTransform),
}

impl Transform {
    pub fn identity() -> Self {
        Transform::Identity { params: IdentityParams {} }
    }

    pub fn wallace(raw_d: f64) -> Self {
        Transform::Wallace { params: WallaceParams { raw_d } }
    }

    pub fn yeo_johnson(lambda: f64) -> Self {
        Transform::YeoJohnson { params: YeoJohnsonParams { lambda } }
    }

    pub fn tanh_mix(params: TanhMixParams) -> Self {
        Transform::TanhMix { params }
    }

    pub fn node(node: NodeTransform) -> Self {
        Transform::Node(node)
    }

    pub fn family(&self) -> &'static str {
        match self {
            Transform::Identity { .. } => "identity",
            Transform::Wallace { .. } => "wallace",
            Transform::YeoJohnson { .. } => "yeo_johnson",
            Transform::TanhMix { .. } => "tanh_mix",
            Transform::Node(_) => "node",
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Transform::Identity { .. } => 0,
            Transform::Wallace { .. } | Transform::YeoJohnson { .. } => 1,
            Transform::TanhMix { params } => 3 * params.k(),
            Transform::Node(_) => MLP_PARAM_COUNT,
        }
    }

    /// Raw (unconstrained) parameter vector, in the canonical order used
    /// by `with_params` and the gradient routines.
    pub fn params(&self) -> Vec<f64> {
        match self {
            Transform::Identity { .. } => Vec::new(),
            Transform::Wallace { params } => vec![params.raw_d],
            Transform::YeoJohnson { params } => vec![params.lambda],
            Transform::TanhMix { params } => params.to_vec(),
            Transform::Node(node) => node.mlp.to_vec(),
        }
    }

    /// New transform of the same family with the given raw parameters.
    pub fn with_params(&self, p: &[f64]) -> Transform {
        assert_eq!(p.len(), self.param_count(), "parameter vector length mismatch");
        match self {
            Transform::Identity { .. } => Transform::identity(),
            Transform::Wallace { .. } => Transform::wallace(p[0]),
            Transform::YeoJohnson { .. } => Transform::yeo_johnson(p[0]),
            Transform::TanhMix { params } => {
                Transform::TanhMix { params: TanhMixParams::from_vec(params.k(), p) }
            }
            Transform::Node(node) => {
                let mut n = node.clone();
                n.mlp = MlpParams::from_slice(p);
                Transform::Node(n)
            }
        }
    }

    pub fn forward(&self, x: f64) -> Result<f64> {
        match self {
            Transform::Identity { .. } => Ok(x),
            Transform::Wallace { params } => Ok(params.forward(x)),
            Transform::YeoJohnson { params } => Ok(params.forward(x)),
            Transform::TanhMix { params } => Ok(params.forward(x)),
            Transform::Node(node) => node.forward(x),
        }
    }

    pub fn inverse(&self, z: f64) -> Result<f64> {
        match self {
            Transform::Identity { .. } => Ok(z),
            Transform::Wallace { params } => Ok(params.inverse(z)),
            Transform::YeoJohnson { params } => params.inverse(z),
            Transform::TanhMix { params } => params.inverse(z),
            Transform::Node(node) => node.inverse(z),
        }
    }

    /// log |f'(x)|; every family here has f' > 0 everywhere.
    pub fn log_abs_deriv(&self, x: f64) -> Result<f64> {
        match self {
            Transform::Identity { .. } => Ok(0.0),
            Transform::Wallace { params } => Ok(params.log_abs_deriv(x)),
            Transform::YeoJohnson { params } => Ok(params.log_abs_deriv(x)),
            Transform::TanhMix { params } => Ok(params.log_abs_deriv(x)),
            Transform::Node(node) => node.forward_with_log_deriv(x).map(|(_, lj)| lj),
        }
    }

    /// Forward value, log-derivative, and both parameter gradients at x.
    pub fn point_grad(&self, x: f64) -> Result<PointGrad> {
        match self {
            Transform::Identity { .. } => Ok(PointGrad {
                z: x,
                log_deriv: 0.0,
                d_z: Vec::new(),
                d_log_deriv: Vec::new(),
            }),
            Transform::Wallace { params } => Ok(params.point_grad(x)),
            Transform::YeoJohnson { params } => Ok(params.point_grad(x)),
            Transform::TanhMix { params } => Ok(params.point_grad(x)),
            Transform::Node(node) => node.point_grad(x),
        }
    }

    pub fn forward_series(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.forward(x)).collect()
    }

    /// Structural checks after deserialization.
    pub fn validate(&self) -> Result<()> {
        match self {
            Transform::TanhMix { params } => params.validate(),
            Transform::Node(node) => node.validate(),
            Transform::Wallace { params } => {
                if !params.raw_d.is_finite() {
                    return Err(Error::Input("wallace raw_d must be finite".into()));
                }
                Ok(())
            }
            Transform::YeoJohnson { params } => {
                if !params.lambda.is_finite() {
                    return Err(Error::Input("yeo_johnson lambda must be finite".into()));
                }
                Ok(())
            }
            Transform::Identity { .. } => Ok(()),
        }
    }
}
