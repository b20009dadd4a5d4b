use serde::{Deserialize, Serialize};

use super::CemError;

/// Two-layer tanh MLP mapping the state vector to ten squashed outputs.
///
/// Flat weight layout: `W1` row-major `[hidden][input]`, `b1`, `W2` row-major
/// `[output][hidden]`, `b2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyShape {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
}

impl Default for PolicyShape {
    fn default() -> Self {
        Self {
            input_dim: crate::kpi::FEATURE_LEN,
            hidden_dim: 16,
            output_dim: crate::action::PARAM_COUNT,
        }
    }
}

impl PolicyShape {
    pub fn weight_count(&self) -> usize {
        self.input_dim * self.hidden_dim
            + self.hidden_dim
            + self.hidden_dim * self.output_dim
            + self.output_dim
    }

    pub fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.input_dim * self.hidden_dim
    }

    pub fn b1_range(&self) -> std::ops::Range<usize> {
        let s = self.w1_range().end;
        s..s + self.hidden_dim
    }

    pub fn w2_range(&self) -> std::ops::Range<usize> {
        let s = self.b1_range().end;
        s..s + self.hidden_dim * self.output_dim
    }

    pub fn b2_range(&self) -> std::ops::Range<usize> {
        let s = self.w2_range().end;
        s..s + self.output_dim
    }

    pub fn validate(&self) -> Result<(), CemError> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(CemError::Config(format!("degenerate policy shape {self:?}")));
        }
        Ok(())
    }
}

/// `tanh(W2 · tanh(W1 · state + b1) + b2)`.
pub fn policy_forward(
    shape: &PolicyShape,
    weights: &[f64],
    state: &[f64],
) -> Result<Vec<f64>, CemError> {
    if weights.len() != shape.weight_count() {
        return Err(CemError::Dimension {
            what: "weights",
            expected: shape.weight_count(),
            got: weights.len(),
        });
    }
    if state.len() != shape.input_dim {
        return Err(CemError::Dimension {
            what: "state",
            expected: shape.input_dim,
            got: state.len(),
        });
    }
    let w1 = &weights[shape.w1_range()];
    let b1 = &weights[shape.b1_range()];
    let w2 = &weights[shape.w2_range()];
    let b2 = &weights[shape.b2_range()];
    let hidden: Vec<f64> = w1
        .chunks_exact(shape.input_dim)
        .zip(b1)
        .map(|(row, b)| (dot(row, state) + b).tanh())
        .collect();
    Ok(w2
        .chunks_exact(shape.hidden_dim)
        .zip(b2)
        .map(|(row, b)| (dot(row, &hidden) + b).tanh())
        .collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
