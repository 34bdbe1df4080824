//! Parameterized message-passing layers.
//!
//! A layer applies `activation(bias + sum_f f(A) . H . W)` for a family of
//! graph operators `f(A)`. The common special case uses a single symmetric
//! degree-normalized operator. When the input activations are the identity
//! matrix (the featureless base case), `f(A) . I . W` collapses to
//! `f(A) . W` and the identity is never materialized.

use serde::{Deserialize, Serialize};

use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
}

impl Activation {
    pub fn apply(&self, x: &Tensor) -> Result<Tensor, TensorError> {
        match self {
            Activation::Relu => x.relu(),
            Activation::Identity => Ok(x.clone()),
            Activation::Sigmoid => x.sigmoid(),
        }
    }
}

/// Shape and activation of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GnnLayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub has_bias: bool,
    /// When true the bias is a full n x out_dim matrix instead of a
    /// broadcast 1 x out_dim row. Per-node biases break permutation
    /// equivariance and tie parameters to the node count; the broadcast
    /// form is the default everywhere except the mean-field construction.
    pub per_node_bias: bool,
}

impl GnnLayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        GnnLayerSpec { in_dim, out_dim, activation, has_bias: true, per_node_bias: false }
    }
}

/// One layer's bound parameters for a forward pass.
#[derive(Clone)]
pub struct GnnLayer {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
    pub activation: Activation,
}

/// `activation(bias + sum_f f(A) . H . W)` over an operator family.
///
/// `input` of `None` means the identity base case. A 1 x d bias is broadcast
/// over rows; an n x d bias is added elementwise.
pub fn gnn_layer(
    operators: &[Tensor],
    input: Option<&Tensor>,
    layer: &GnnLayer,
) -> Result<Tensor, TensorError> {
    if operators.is_empty() {
        return Err(TensorError::Invalid { op: "gnn_layer", msg: "empty operator family".into() });
    }
    // Right-multiply first: f(A) . (H . W) costs O(n^2 d_out + n d_in d_out).
    let projected = match input {
        Some(h) => h.matmul(&layer.weight)?,
        None => layer.weight.clone(),
    };
    let mut total = operators[0].matmul(&projected)?;
    for op in &operators[1..] {
        total = total.add(&op.matmul(&projected)?)?;
    }
    if let Some(bias) = &layer.bias {
        total = if bias.rows() == 1 { total.add_bias(bias)? } else { total.add(bias)? };
    }
    layer.activation.apply(&total)
}

/// The single-operator propagation rule over a symmetric degree-normalized
/// adjacency.
pub fn gcn_layer(
    norm_adj: &Tensor,
    input: Option<&Tensor>,
    layer: &GnnLayer,
) -> Result<Tensor, TensorError> {
    gnn_layer(std::slice::from_ref(norm_adj), input, layer)
}

/// Multi-layer forward pass sharing one operator family across layers.
/// Returns the input unchanged for an empty layer stack.
pub fn gnn_forward(
    operators: &[Tensor],
    input: Option<&Tensor>,
    layers: &[GnnLayer],
) -> Result<Tensor, TensorError> {
    let Some((first, rest)) = layers.split_first() else {
        return match input {
            Some(h) => Ok(h.clone()),
            None => Err(TensorError::Invalid {
                op: "gnn_forward",
                msg: "empty stack needs explicit input activations".into(),
            }),
        };
    };
    let mut h = gnn_layer(operators, input, first)?;
    for layer in rest {
        h = gnn_layer(operators, Some(&h), layer)?;
    }
    Ok(h)
}
