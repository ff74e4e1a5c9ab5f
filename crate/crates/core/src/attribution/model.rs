//! Seeded one-hidden-layer surrogate used to exercise the attribution
//! pipeline without a pretrained checkpoint.
//!
//! For source embeddings `x_0..x_{S-1}` (rows of width `dim`) and a target
//! token `t`:
//!
//! ```text
//! z      = b + (1/sqrt(S)) * sum_i p_i * W x_i
//! F_t(x) = u_t . tanh(z)
//! ```
//!
//! `W`, `b`, the position weights `p_i`, token embeddings and output vectors
//! `u_t` are all pure functions of the seed, so token tables need not be
//! stored.

use super::ig::{integrated_gradients, Embeddings, ScalarFunction};
use super::AttributionTensor;
use crate::corpus::words;
use crate::error::Result;
use crate::rng::{derive_seed, SplitMix64};

const MAX_PIECE_CHARS: usize = 4;

#[derive(Debug, Clone)]
pub struct ReferenceModel {
    seed: u64,
    dim: usize,
    hidden: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn uniform(rng: &mut SplitMix64) -> f64 {
    // [-1, 1)
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn stream(seed: u64, domain: &str, key: &[u8]) -> SplitMix64 {
    SplitMix64::new(derive_seed(seed ^ fnv1a(domain.as_bytes()), fnv1a(key)))
}

impl ReferenceModel {
    pub fn new(seed: u64, dim: usize, hidden: usize) -> Self {
        assert!(dim > 0 && hidden > 0, "model shape must be positive");
        let mut rng = stream(seed, "layer", b"");
        let scale = 1.0 / (dim as f64).sqrt();
        let weights = (0..hidden * dim)
            .map(|_| uniform(&mut rng) * scale)
            .collect();
        let bias = (0..hidden).map(|_| 0.2 * uniform(&mut rng)).collect();
        Self {
            seed,
            dim,
            hidden,
            weights,
            bias,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embed_token(&self, token: &str) -> Vec<f64> {
        let mut rng = stream(self.seed, "embed", token.as_bytes());
        (0..self.dim).map(|_| uniform(&mut rng)).collect()
    }

    pub fn embed<S: AsRef<str>>(&self, tokens: &[S]) -> Embeddings {
        let data = tokens
            .iter()
            .flat_map(|t| self.embed_token(t.as_ref()))
            .collect();
        Embeddings {
            rows: tokens.len(),
            dim: self.dim,
            data,
        }
    }

    fn position_weight(&self, position: usize) -> f64 {
        let mut rng = stream(self.seed, "position", &position.to_le_bytes());
        0.75 + 0.25 * uniform(&mut rng)
    }

    fn output_weights(&self, token: &str) -> Vec<f64> {
        let mut rng = stream(self.seed, "output", token.as_bytes());
        (0..self.hidden).map(|_| uniform(&mut rng)).collect()
    }

    /// Scalar score of one target token, as a differentiable function of the source embeddings.
    pub fn target(&self, token: &str) -> TargetScore<'_> {
        TargetScore {
            model: self,
            output: self.output_weights(token),
        }
    }

    fn pre_activation(&self, x: &Embeddings) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(x.dim, self.dim, "embedding width mismatch");
        let norm = 1.0 / (x.rows.max(1) as f64).sqrt();
        let positions: Vec<f64> = (0..x.rows)
            .map(|i| self.position_weight(i) * norm)
            .collect();
        let mut z = self.bias.clone();
        for (i, p) in positions.iter().enumerate() {
            let row = x.row(i);
            for (k, zk) in z.iter_mut().enumerate() {
                let w = &self.weights[k * self.dim..(k + 1) * self.dim];
                *zk += p * w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        (z, positions)
    }

    /// Raw IG tensor for a source/target sentence pair, one slice per target token.
    pub fn attribute(
        &self,
        instance_id: &str,
        source: &str,
        target: &str,
        steps: usize,
    ) -> Result<AttributionTensor> {
        let (source_tokens, source_word_map) = subword_tokenize(source);
        let (target_tokens, target_word_map) = subword_tokenize(target);
        let x = self.embed(&source_tokens);
        let baseline = Embeddings::zeros(x.rows, x.dim);
        let (s, t, h) = (source_tokens.len(), target_tokens.len(), self.dim);
        let mut scores = vec![0.0f32; s * t * h];
        for (k, token) in target_tokens.iter().enumerate() {
            let slice = integrated_gradients(&self.target(token), &x, &baseline, steps)?;
            for i in 0..s {
                for d in 0..h {
                    scores[(i * t + k) * h + d] = slice.data[i * h + d] as f32;
                }
            }
        }
        let mut metadata = serde_json::Map::new();
        metadata.insert("scalar_output".into(), "reference-pre-activation".into());
        metadata.insert("steps".into(), steps.into());
        metadata.insert("model_seed".into(), self.seed.into());
        let tensor = AttributionTensor {
            instance_id: instance_id.to_string(),
            source_tokens,
            target_tokens,
            hidden_size: h,
            source_word_map,
            target_word_map,
            scores,
            metadata,
        };
        tensor.validate()?;
        Ok(tensor)
    }
}

pub struct TargetScore<'a> {
    model: &'a ReferenceModel,
    output: Vec<f64>,
}

impl ScalarFunction for TargetScore<'_> {
    fn value(&self, x: &Embeddings) -> f64 {
        let (z, _) = self.model.pre_activation(x);
        z.iter()
            .zip(&self.output)
            .map(|(zk, u)| u * zk.tanh())
            .sum()
    }

    fn gradient(&self, x: &Embeddings) -> Embeddings {
        let model = self.model;
        let (z, positions) = model.pre_activation(x);
        // dF/dz_k = u_k (1 - tanh^2 z_k); dF/dx_i = p_i W^T dF/dz
        let dz: Vec<f64> = z
            .iter()
            .zip(&self.output)
            .map(|(zk, u)| u * (1.0 - zk.tanh().powi(2)))
            .collect();
        let mut shared = vec![0.0f64; model.dim];
        for (k, g) in dz.iter().enumerate() {
            let w = &model.weights[k * model.dim..(k + 1) * model.dim];
            for (s, wd) in shared.iter_mut().zip(w) {
                *s += g * wd;
            }
        }
        let data = positions
            .iter()
            .flat_map(|p| shared.iter().map(move |s| p * s))
            .collect();
        Embeddings {
            rows: x.rows,
            dim: x.dim,
            data,
        }
    }
}

/// Splits whitespace words into pieces of at most four characters and
/// returns the pieces with their word indices.
pub fn subword_tokenize(text: &str) -> (Vec<String>, Vec<usize>) {
    let mut tokens = Vec::new();
    let mut map = Vec::new();
    for (w, word) in words(text).into_iter().enumerate() {
        let chars: Vec<char> = word.chars().collect();
        for piece in chars.chunks(MAX_PIECE_CHARS) {
            tokens.push(piece.iter().collect());
            map.push(w);
        }
    }
    (tokens, map)
}
