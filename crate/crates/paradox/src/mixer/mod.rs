//! Prompt-conditioned layer mixing: per-layer projectors into the LLM token
//! space, a small weighting net that turns a prompt embedding into softmax
//! mixing weights, cloning initialization from the final-layer projector, and
//! the static concatenation variant with token scaling.

pub mod dpo;
pub mod fit;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Linear, Mlp};
use crate::seeded::{hash_str, rng_for};

/// Full-scale training defaults for deployments that attach the mixer to a
/// real model: projector alignment and the subsequent fine-tuning stage both
/// run at this learning rate. The desk-scale toy fit has its own schedule.
pub const STAGE_SFT_LEARNING_RATE: f64 = 5e-5;

/// Learning rate for the preference-optimization stage that follows the
/// supervised stages.
pub const PREFERENCE_LEARNING_RATE: f64 = 5e-7;

/// Identifier of one tapped encoder layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerId {
    Numbered(u32),
    Final,
}

impl std::fmt::Display for LayerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LayerId::Numbered(n) => write!(f, "{n}"),
            LayerId::Final => f.write_str("final"),
        }
    }
}

/// The default tapped layer set: four intermediate layers spread across the
/// encoder depth plus the final layer.
pub fn default_layer_set() -> Vec<LayerId> {
    vec![
        LayerId::Numbered(5),
        LayerId::Numbered(15),
        LayerId::Numbered(25),
        LayerId::Numbered(30),
        LayerId::Final,
    ]
}

/// Hidden states for one example at each tapped layer: [tokens x d_enc].
#[derive(Debug, Clone)]
pub struct LayerStack {
    layers: Vec<(LayerId, Array2<f64>)>,
}

impl LayerStack {
    pub fn new(layers: Vec<(LayerId, Array2<f64>)>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("layer stack must be non-empty"));
        }
        if !layers.iter().any(|(id, _)| *id == LayerId::Final) {
            return Err(Error::invalid("layer stack must include the final layer"));
        }
        let d_enc = layers[0].1.ncols();
        if layers.iter().any(|(_, h)| h.ncols() != d_enc) {
            return Err(Error::invalid("all layers must share one encoder width"));
        }
        let mut ids: Vec<LayerId> = layers.iter().map(|(id, _)| *id).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != layers.len() {
            return Err(Error::invalid("duplicate layer id in stack"));
        }
        Ok(LayerStack { layers })
    }

    pub fn layer_ids(&self) -> Vec<LayerId> {
        self.layers.iter().map(|(id, _)| *id).collect()
    }

    pub fn get(&self, id: LayerId) -> Option<&Array2<f64>> {
        self.layers.iter().find(|(l, _)| *l == id).map(|(_, h)| h)
    }

    pub fn encoder_dim(&self) -> usize {
        self.layers[0].1.ncols()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(LayerId, Array2<f64>)> {
        self.layers.iter()
    }
}

/// Linear map from encoder width to LLM width: `z = h W^T + b` per token.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub linear: Linear,
}

impl Projector {
    pub fn seeded(d_enc: usize, d_llm: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, &["projector"]);
        Projector { linear: Linear::init_xavier(d_enc, d_llm, &mut rng) }
    }

    pub fn output_dim(&self) -> usize {
        self.linear.weight.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.linear.weight.ncols()
    }

    /// tokens [T x d_enc] -> [T x d_llm]
    pub fn apply(&self, tokens: &Array2<f64>) -> Array2<f64> {
        self.linear.forward(tokens)
    }
}

/// Prompt-to-weights net: one tanh hidden layer, then logits over the layer
/// set. A zero final layer yields uniform mixing for any prompt.
#[derive(Debug, Clone)]
pub struct WeightingNet {
    pub net: Mlp,
}

impl WeightingNet {
    pub fn zero_final(prompt_dim: usize, hidden_dim: usize, n_layers: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, &["weighting"]);
        let hidden = Linear::init_xavier(prompt_dim, hidden_dim, &mut rng);
        let output = Linear::zeros(hidden_dim, n_layers);
        WeightingNet { net: Mlp { layers: vec![hidden, output], activation: Activation::Tanh } }
    }

    pub fn logits(&self, prompt: &Array1<f64>) -> Array1<f64> {
        let x = prompt.clone().insert_axis(ndarray::Axis(0));
        self.net.forward(&x).row(0).to_owned()
    }

    pub fn prompt_dim(&self) -> usize {
        self.net.layers[0].weight.ncols()
    }

    pub fn n_layers(&self) -> usize {
        self.net.layers.last().unwrap().weight.nrows()
    }
}

/// Projectors plus weighting net over an ordered layer set.
#[derive(Debug, Clone)]
pub struct MixerParams {
    pub layer_set: Vec<LayerId>,
    pub projectors: Vec<Projector>,
    pub weighting: WeightingNet,
}

impl MixerParams {
    pub fn validate(&self) -> Result<()> {
        if self.layer_set.is_empty() || self.projectors.len() != self.layer_set.len() {
            return Err(Error::invalid("one projector per layer required"));
        }
        let d_llm = self.projectors[0].output_dim();
        if self.projectors.iter().any(|p| p.output_dim() != d_llm) {
            return Err(Error::invalid("projectors must share the output width"));
        }
        if self.weighting.n_layers() != self.layer_set.len() {
            return Err(Error::invalid("weighting net output must match the layer count"));
        }
        Ok(())
    }

    pub fn llm_dim(&self) -> usize {
        self.projectors[0].output_dim()
    }

    pub fn projector_for(&self, id: LayerId) -> Option<&Projector> {
        self.layer_set.iter().position(|l| *l == id).map(|i| &self.projectors[i])
    }
}

/// A prompt embedding with its provenance (external encoder id, or the
/// deterministic hash stub used in tests).
#[derive(Debug, Clone)]
pub struct PromptEmbedding {
    pub values: Array1<f64>,
    pub provenance: String,
}

impl PromptEmbedding {
    pub fn new(values: Array1<f64>, provenance: impl Into<String>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("prompt embedding must be finite"));
        }
        Ok(PromptEmbedding { values, provenance: provenance.into() })
    }
}

/// Deterministic stand-in for a text encoder: hash the prompt into a seeded
/// unit-scale Gaussian vector.
pub fn prompt_embedding_stub(prompt: &str, dim: usize) -> PromptEmbedding {
    let mut rng = rng_for(hash_str(prompt), &["prompt-embedding"]);
    let values = Array1::from_shape_fn(dim, |_| crate::nn::standard_normal(&mut rng));
    PromptEmbedding { values, provenance: format!("hash-stub:{dim}") }
}

/// Softmax of the weighting net's logits with max subtraction; sums to 1
/// within 1e-12 and every entry is strictly positive.
pub fn mixing_weights(prompt: &PromptEmbedding, params: &MixerParams) -> Result<Array1<f64>> {
    params.validate()?;
    if prompt.values.len() != params.weighting.prompt_dim() {
        return Err(Error::invalid(format!(
            "prompt embedding dim {} does not match weighting net input {}",
            prompt.values.len(),
            params.weighting.prompt_dim()
        )));
    }
    let logits = params.weighting.logits(&prompt.values);
    Ok(softmax(&logits))
}

pub fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.mapv(|v| (v - max).exp());
    let sum = out.sum();
    out.mapv_inplace(|v| v / sum);
    out
}

/// Project each layer and mix: `Z~ = sum_l alpha_l P_l(H_l)`. All layers must
/// be token-aligned to one length; mismatches are an error, never silently
/// resampled.
pub fn mixed_forward(
    stack: &LayerStack,
    params: &MixerParams,
    alpha: &Array1<f64>,
) -> Result<Array2<f64>> {
    params.validate()?;
    if alpha.len() != params.layer_set.len() {
        return Err(Error::invalid("alpha length must match the layer set"));
    }
    let mut tokens: Option<usize> = None;
    let mut out: Option<Array2<f64>> = None;
    for (id, projector) in params.layer_set.iter().zip(&params.projectors) {
        let h = stack
            .get(*id)
            .ok_or_else(|| Error::invalid(format!("stack missing layer {id}")))?;
        match tokens {
            None => tokens = Some(h.nrows()),
            Some(t) if t == h.nrows() => {}
            Some(t) => {
                return Err(Error::invalid(format!(
                    "token length mismatch: layer {id} has {} tokens, expected {t}",
                    h.nrows()
                )));
            }
        }
        let z = projector.apply(h);
        let weighted = z * alpha[params.layer_set.iter().position(|l| l == id).unwrap()];
        out = Some(match out {
            None => weighted,
            Some(acc) => acc + weighted,
        });
    }
    Ok(out.expect("layer set non-empty"))
}

/// Initialize a mixer by cloning the final-layer projector onto every tapped
/// layer (deep copies; mutating one clone later leaves the others intact)
/// and zeroing the weighting net's output layer so initial mixing is uniform
/// for any prompt.
pub fn clone_init(
    final_projector: &Projector,
    layer_set: &[LayerId],
    prompt_dim: usize,
    hidden_dim: usize,
    seed: u64,
) -> Result<MixerParams> {
    if layer_set.is_empty() {
        return Err(Error::invalid("layer set must be non-empty"));
    }
    let projectors: Vec<Projector> =
        layer_set.iter().map(|_| final_projector.clone()).collect();
    let weighting = WeightingNet::zero_final(prompt_dim, hidden_dim, layer_set.len(), seed);
    let params = MixerParams { layer_set: layer_set.to_vec(), projectors, weighting };
    params.validate()?;
    Ok(params)
}

/// The static interface variant: project every layer and concatenate token
/// sequences, final layer first, then the remaining layers in declared
/// order. `scaled_layer` tokens are multiplied by `scale` before
/// concatenation (scale > 0; 10 is the conventional emphasis setting).
pub fn concat_tokens(
    stack: &LayerStack,
    params: &MixerParams,
    scaled_layer: Option<LayerId>,
    scale: f64,
) -> Result<Array2<f64>> {
    params.validate()?;
    if scale <= 0.0 || !scale.is_finite() {
        return Err(Error::invalid("scale must be positive and finite"));
    }
    if let Some(target) = scaled_layer {
        if !params.layer_set.contains(&target) {
            return Err(Error::invalid(format!("scaled layer {target} not in the layer set")));
        }
    }
    let mut order: Vec<LayerId> = Vec::with_capacity(params.layer_set.len());
    if params.layer_set.contains(&LayerId::Final) {
        order.push(LayerId::Final);
    }
    order.extend(params.layer_set.iter().copied().filter(|id| *id != LayerId::Final));

    let d_llm = params.llm_dim();
    let total: usize = order
        .iter()
        .map(|id| stack.get(*id).map(Array2::nrows).unwrap_or(0))
        .sum();
    let mut out = Array2::zeros((total, d_llm));
    let mut row = 0usize;
    for id in order {
        let h = stack
            .get(id)
            .ok_or_else(|| Error::invalid(format!("stack missing layer {id}")))?;
        let mut z = params
            .projector_for(id)
            .ok_or_else(|| Error::invalid(format!("no projector for layer {id}")))?
            .apply(h);
        if scaled_layer == Some(id) && scale != 1.0 {
            z.mapv_inplace(|v| v * scale);
        }
        out.slice_mut(ndarray::s![row..row + z.nrows(), ..]).assign(&z);
        row += z.nrows();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::standard_normal;

    fn stack(token_len: usize, d_enc: usize, seed: u64) -> LayerStack {
        let mut rng = rng_for(seed, &["test", "stack"]);
        let layers = default_layer_set()
            .into_iter()
            .map(|id| (id, Array2::from_shape_fn((token_len, d_enc), |_| standard_normal(&mut rng))))
            .collect();
        LayerStack::new(layers).unwrap()
    }

    fn params(d_enc: usize, d_llm: usize, prompt_dim: usize, seed: u64) -> MixerParams {
        let final_projector = Projector::seeded(d_enc, d_llm, seed);
        clone_init(&final_projector, &default_layer_set(), prompt_dim, 64, seed).unwrap()
    }

    #[test]
    fn zero_initialized_net_gives_uniform_alpha() {
        let p = params(8, 12, 24, 1);
        for text in ["what is the pitch", "who is speaking", "x"] {
            let e = prompt_embedding_stub(text, 24);
            let alpha = mixing_weights(&e, &p).unwrap();
            for a in alpha.iter() {
                assert!((a - 0.2).abs() < 1e-12, "alpha {a}");
            }
        }
    }

    #[test]
    fn alpha_sums_to_one_and_matches_closed_form() {
        let logits = Array1::from(vec![10.0, 0.0, 0.0, 0.0, 0.0]);
        let alpha = softmax(&logits);
        let expected = 10f64.exp() / (10f64.exp() + 4.0);
        assert!((alpha[0] - expected).abs() < 1e-12);
        assert!((alpha.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_is_shift_invariant() {
        let logits = Array1::from(vec![0.3, -1.2, 2.5, 0.0, 1.1]);
        let shifted = logits.mapv(|v| v + 123.456);
        let a = softmax(&logits);
        let b = softmax(&shifted);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_alpha_selects_one_projected_layer() {
        let s = stack(6, 8, 3);
        let p = params(8, 12, 24, 3);
        let mut alpha = Array1::zeros(5);
        alpha[2] = 1.0;
        let out = mixed_forward(&s, &p, &alpha).unwrap();
        let direct = p.projectors[2].apply(s.get(p.layer_set[2]).unwrap());
        assert_eq!(out, direct);
    }

    #[test]
    fn cloned_projectors_commute_with_mixing() {
        // with all projectors equal, mixing then projecting equals projecting
        // the mixed hidden states (linearity)
        let s = stack(5, 8, 7);
        let p = params(8, 12, 24, 7);
        let alpha = Array1::from(vec![0.1, 0.25, 0.3, 0.2, 0.15]);
        let mixed = mixed_forward(&s, &p, &alpha).unwrap();
        let mut blended = Array2::zeros((5, 8));
        for (i, id) in p.layer_set.iter().enumerate() {
            blended = blended + s.get(*id).unwrap() * alpha[i];
        }
        let direct = p.projectors[0].apply(&blended);
        let max_err = (&mixed - &direct).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_err < 1e-10, "max err {max_err}");
    }

    #[test]
    fn mutating_one_clone_leaves_others_unchanged() {
        let mut p = params(8, 12, 24, 9);
        let before = p.projectors[1].clone();
        p.projectors[0].linear.weight[[0, 0]] += 5.0;
        assert_eq!(p.projectors[1], before);
        assert_ne!(p.projectors[0], before);
    }

    #[test]
    fn token_length_mismatch_is_rejected() {
        let mut rng = rng_for(11, &["test", "mismatch"]);
        let mut layers: Vec<(LayerId, Array2<f64>)> = default_layer_set()
            .into_iter()
            .map(|id| (id, Array2::from_shape_fn((6, 8), |_| standard_normal(&mut rng))))
            .collect();
        layers[2].1 = Array2::from_shape_fn((5, 8), |_| standard_normal(&mut rng));
        let s = LayerStack::new(layers).unwrap();
        let p = params(8, 12, 24, 11);
        let alpha = Array1::from(vec![0.2; 5]);
        assert!(matches!(mixed_forward(&s, &p, &alpha), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn mixing_is_linear_in_the_hidden_states() {
        let s1 = stack(4, 8, 13);
        let s2 = stack(4, 8, 14);
        let p = params(8, 12, 24, 13);
        let alpha = softmax(&Array1::from(vec![0.5, -0.2, 0.9, 0.0, 0.3]));
        let (a, b) = (0.7, -1.3);
        let combined = LayerStack::new(
            p.layer_set
                .iter()
                .map(|id| (*id, s1.get(*id).unwrap() * a + s2.get(*id).unwrap() * b))
                .collect(),
        )
        .unwrap();
        let lhs = mixed_forward(&combined, &p, &alpha).unwrap();
        let rhs = mixed_forward(&s1, &p, &alpha).unwrap() * a
            + mixed_forward(&s2, &p, &alpha).unwrap() * b;
        let max_err = (&lhs - &rhs).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_err < 1e-10, "max err {max_err}");
    }

    #[test]
    fn concat_orders_final_first_and_counts_tokens() {
        let s = stack(4, 8, 17);
        let p = params(8, 12, 24, 17);
        let out = concat_tokens(&s, &p, None, 1.0).unwrap();
        assert_eq!(out.nrows(), 4 * 5);
        let final_block = p.projector_for(LayerId::Final).unwrap().apply(s.get(LayerId::Final).unwrap());
        assert_eq!(out.slice(ndarray::s![0..4, ..]), final_block);
    }

    #[test]
    fn scaling_a_layer_multiplies_its_token_norms() {
        let s = stack(4, 8, 19);
        let p = params(8, 12, 24, 19);
        let plain = concat_tokens(&s, &p, None, 1.0).unwrap();
        let scaled = concat_tokens(&s, &p, Some(LayerId::Numbered(5)), 10.0).unwrap();
        // layer 5 occupies rows 4..8 (right after the final block)
        for row in 0..plain.nrows() {
            let n_plain = plain.row(row).dot(&plain.row(row)).sqrt();
            let n_scaled = scaled.row(row).dot(&scaled.row(row)).sqrt();
            if (4..8).contains(&row) {
                assert!((n_scaled - 10.0 * n_plain).abs() <= 1e-12 * n_plain.max(1.0));
            } else {
                assert_eq!(n_scaled, n_plain);
            }
        }
        // identity scale is a no-op
        let unit = concat_tokens(&s, &p, Some(LayerId::Numbered(5)), 1.0).unwrap();
        assert_eq!(unit, plain);
    }

    #[test]
    fn unknown_scaled_layer_is_invalid() {
        let s = stack(4, 8, 23);
        let p = params(8, 12, 24, 23);
        assert!(concat_tokens(&s, &p, Some(LayerId::Numbered(99)), 10.0).is_err());
    }
}
