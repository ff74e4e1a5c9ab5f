use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of Riemann steps.
pub const DEFAULT_STEPS: usize = 16;

/// Row-major `rows x dim` matrix of input embeddings (one row per token).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embeddings {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Embeddings {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::Attribution(format!(
                "embedding payload {} does not match {rows}x{dim}",
                data.len()
            )));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn same_shape(&self, other: &Embeddings) -> bool {
        self.rows == other.rows && self.dim == other.dim
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// A differentiable scalar output of the embedded input.
pub trait ScalarFunction {
    fn value(&self, x: &Embeddings) -> f64;
    fn gradient(&self, x: &Embeddings) -> Embeddings;
}

/// Integrated Gradients with a right-endpoint Riemann sum:
///
/// ```text
/// (x - x') * (1/m) * sum_{k=1..m} grad F(x' + (k/m)(x - x'))
/// ```
pub fn integrated_gradients<F: ScalarFunction + ?Sized>(
    function: &F,
    input: &Embeddings,
    baseline: &Embeddings,
    steps: usize,
) -> Result<Embeddings> {
    if steps == 0 {
        return Err(Error::Attribution("integration steps must be >= 1".into()));
    }
    if !input.same_shape(baseline) {
        return Err(Error::Attribution(format!(
            "input {}x{} and baseline {}x{} differ in shape",
            input.rows, input.dim, baseline.rows, baseline.dim
        )));
    }
    for (what, x) in [("input", input), ("baseline", baseline)] {
        if !function.value(x).is_finite() {
            return Err(Error::Attribution(format!(
                "non-finite forward value at {what}"
            )));
        }
    }
    let delta: Vec<f64> = input
        .data
        .iter()
        .zip(&baseline.data)
        .map(|(x, b)| x - b)
        .collect();
    let mut total = vec![0.0f64; delta.len()];
    let mut point = baseline.clone();
    for k in 1..=steps {
        let alpha = k as f64 / steps as f64;
        for ((p, b), d) in point.data.iter_mut().zip(&baseline.data).zip(&delta) {
            *p = b + alpha * d;
        }
        let grad = function.gradient(&point);
        for (t, g) in total.iter_mut().zip(&grad.data) {
            *t += g;
        }
    }
    let scale = 1.0 / steps as f64;
    let data: Vec<f64> = total
        .iter()
        .zip(&delta)
        .map(|(g, d)| d * g * scale)
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Attribution(
            "non-finite gradient along the path".into(),
        ));
    }
    Embeddings::new(input.rows, input.dim, data)
}
