//! Layer-wise representation probing: mean-pool token features per layer,
//! train small MLP probes under stratified k-fold cross-validation, and
//! report a per-layer accuracy curve with an optional end-to-end marker so
//! the utilization gap (best probe accuracy minus end-to-end accuracy) is
//! visible.

pub mod dumpfile;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{cross_entropy, standard_normal, Activation, Mlp};
use crate::seeded::rng_for;

/// Token representations for a set of examples at a sampled list of layers
/// (typically every second layer of an encoder + LLM stack).
#[derive(Debug, Clone)]
pub struct FeatureDump {
    pub layer_ids: Vec<i64>,
    /// Index into `layer_ids` of the encoder-to-LLM interface.
    pub boundary_index: usize,
    pub labels: Vec<u32>,
    /// `features[layer][example]`: `[tokens x dim]` matrix.
    pub features: Vec<Vec<Array2<f64>>>,
    /// Optional end-to-end task accuracy of the full model, for the
    /// utilization-gap diagnostic.
    pub end_to_end_accuracy: Option<f64>,
}

impl FeatureDump {
    pub fn n_examples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m as usize + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_ids.is_empty() {
            return Err(Error::invalid("dump has no layers"));
        }
        if self.features.len() != self.layer_ids.len() {
            return Err(Error::invalid("dump feature blocks do not match layer list"));
        }
        if self.boundary_index >= self.layer_ids.len() {
            return Err(Error::invalid("boundary index outside the layer list"));
        }
        let n = self.labels.len();
        if n == 0 {
            return Err(Error::invalid("dump has no examples"));
        }
        for (layer, per_example) in self.layer_ids.iter().zip(&self.features) {
            if per_example.len() != n {
                return Err(Error::invalid(format!("layer {layer} example count mismatch")));
            }
            let dim = per_example[0].ncols();
            if per_example.iter().any(|m| m.ncols() != dim || m.nrows() == 0) {
                return Err(Error::invalid(format!("layer {layer} has inconsistent matrices")));
            }
        }
        let distinct: std::collections::BTreeSet<u32> = self.labels.iter().copied().collect();
        if distinct.len() < 2 {
            return Err(Error::invalid("dump labels cover fewer than 2 classes"));
        }
        Ok(())
    }
}

/// Mean over the token axis. Summation is order-independent (values are
/// sorted before adding) so pooling commutes exactly with any token
/// permutation.
pub fn mean_pool(tokens: &Array2<f64>) -> Result<Array1<f64>> {
    if tokens.nrows() == 0 {
        return Err(Error::invalid("mean_pool requires at least one token"));
    }
    let mut out = Array1::zeros(tokens.ncols());
    let mut column: Vec<f64> = Vec::with_capacity(tokens.nrows());
    for (j, slot) in out.iter_mut().enumerate() {
        column.clear();
        column.extend(tokens.column(j).iter().copied());
        column.sort_by(f64::total_cmp);
        *slot = column.iter().sum::<f64>() / column.len() as f64;
    }
    Ok(out)
}

/// Stratified k-fold assignment: returns `fold[i]` per example. Within each
/// label, shuffled examples are dealt round-robin onto a global fold cursor,
/// so fold sizes differ by at most one and label proportions are preserved
/// where counts permit. Deterministic in `seed`.
pub fn kfold_split(n: usize, k: usize, labels: &[u32], seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid("k-fold needs k >= 2"));
    }
    if n < k {
        return Err(Error::invalid(format!("cannot split {n} examples into {k} folds")));
    }
    if labels.len() != n {
        return Err(Error::invalid("labels must cover all examples"));
    }
    let mut by_label: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for (i, label) in labels.iter().enumerate() {
        by_label.entry(*label).or_default().push(i);
    }
    let mut assignment = vec![0usize; n];
    let mut cursor = 0usize;
    for (label, mut idxs) in by_label {
        let mut rng = rng_for(seed, &["kfold", &label.to_string()]);
        use rand::seq::SliceRandom;
        idxs.shuffle(&mut rng);
        for i in idxs {
            assignment[i] = cursor % k;
            cursor += 1;
        }
    }
    Ok(assignment)
}

/// Probe architecture and training budget. `depth` counts the total linear
/// layers: 1 is a linear probe, 3 and 5 add ReLU hidden layers of
/// `hidden_dim`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub depth: usize,
    pub hidden_dim: usize,
    pub folds: usize,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            depth: 3,
            hidden_dim: 256,
            folds: 10,
            seed: 0,
            epochs: 200,
            learning_rate: 1e-2,
            batch_size: 32,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.depth, 1 | 3 | 5) {
            return Err(Error::invalid(format!("probe depth must be 1, 3, or 5, got {}", self.depth)));
        }
        if self.hidden_dim == 0 || self.folds < 2 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("probe config has a zero-sized field"));
        }
        Ok(())
    }
}

/// A trained probe plus its per-epoch training loss trace.
pub struct TrainedProbe {
    pub mlp: Mlp,
    pub n_classes: usize,
    pub epoch_losses: Vec<f64>,
}

/// Train a probe classifier with mini-batch gradient descent and
/// cross-entropy. Deterministic in (cfg.seed, data).
pub fn train_probe(x: &Array2<f64>, y: &[u32], cfg: &ProbeConfig) -> Result<TrainedProbe> {
    cfg.validate()?;
    if x.nrows() != y.len() || x.nrows() == 0 {
        return Err(Error::invalid("probe training data is empty or misaligned"));
    }
    let classes: std::collections::BTreeSet<u32> = y.iter().copied().collect();
    if classes.len() < 2 {
        return Err(Error::invalid("probe training requires at least 2 classes"));
    }
    let n_classes = *classes.iter().max().unwrap() as usize + 1;

    let mut dims = vec![x.ncols()];
    dims.extend(std::iter::repeat_n(cfg.hidden_dim, cfg.depth - 1));
    dims.push(n_classes);

    let mut rng = rng_for(cfg.seed, &["probe", "init"]);
    let mut mlp = Mlp::new(&dims, Activation::Relu, &mut rng);

    let n = x.nrows();
    let labels: Vec<usize> = y.iter().map(|v| *v as usize).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    use rand::seq::SliceRandom;
    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = rng_for(cfg.seed, &["probe", "epoch", &epoch.to_string()]);
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = gather_rows(x, chunk);
            let yb: Vec<usize> = chunk.iter().map(|i| labels[*i]).collect();
            let cached = mlp.forward_cached(&xb);
            let (loss, dlogits) = cross_entropy(cached.last().unwrap(), &yb);
            let (grads, _) = mlp.backward(&xb, &cached, &dlogits);
            mlp.sgd_step(&grads, cfg.learning_rate);
            epoch_loss += loss;
            batches += 1;
        }
        epoch_losses.push(epoch_loss / batches as f64);
    }
    Ok(TrainedProbe { mlp, n_classes, epoch_losses })
}

fn gather_rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), x.ncols()));
    for (r, i) in idx.iter().enumerate() {
        out.row_mut(r).assign(&x.row(*i));
    }
    out
}

/// Fraction of examples the probe classifies correctly.
pub fn probe_accuracy(probe: &TrainedProbe, x: &Array2<f64>, y: &[u32]) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    let logits = probe.mlp.forward(x);
    let mut correct = 0usize;
    for (i, label) in y.iter().enumerate() {
        let row = logits.row(i);
        let pred = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, _)| j)
            .unwrap();
        if pred == *label as usize {
            correct += 1;
        }
    }
    correct as f64 / x.nrows() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerAccuracy {
    pub layer_id: i64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

/// Per-layer probe accuracies with fold spread, plus the boundary marker and
/// the optional end-to-end accuracy copied through from the dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCurve {
    pub entries: Vec<LayerAccuracy>,
    pub boundary_index: usize,
    pub end_to_end_accuracy: Option<f64>,
}

impl LayerCurve {
    /// Best layer accuracy minus end-to-end accuracy: how much retrievable
    /// signal the full model leaves unused.
    pub fn utilization_gap(&self) -> Option<f64> {
        let best = self.entries.iter().map(|e| e.mean_accuracy).fold(f64::NEG_INFINITY, f64::max);
        self.end_to_end_accuracy.map(|e2e| best - e2e)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer_id,mean_accuracy,std_accuracy,is_boundary\n");
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(&format!(
                "{},{:.6},{:.6},{}\n",
                e.layer_id,
                e.mean_accuracy,
                e.std_accuracy,
                i == self.boundary_index
            ));
        }
        if let Some(e2e) = self.end_to_end_accuracy {
            out.push_str(&format!("end_to_end,{e2e:.6},,\n"));
        }
        out
    }
}

/// Pool, split, train, and score a probe per layer. Folds and layers train
/// independently; per-(layer, fold) seeds derive from `cfg.seed`, so a
/// parallel run reproduces the serial result exactly.
pub fn layer_curve(dump: &FeatureDump, cfg: &ProbeConfig) -> Result<LayerCurve> {
    dump.validate()?;
    cfg.validate()?;
    let n = dump.n_examples();
    let assignment = kfold_split(n, cfg.folds, &dump.labels, cfg.seed)?;

    let jobs: Vec<(usize, usize)> = (0..dump.layer_ids.len())
        .flat_map(|layer| (0..cfg.folds).map(move |fold| (layer, fold)))
        .collect();

    let pooled: Vec<Array2<f64>> = dump
        .features
        .iter()
        .map(|per_example| -> Result<Array2<f64>> {
            let dim = per_example[0].ncols();
            let mut x = Array2::zeros((n, dim));
            for (i, tokens) in per_example.iter().enumerate() {
                x.row_mut(i).assign(&mean_pool(tokens)?);
            }
            Ok(x)
        })
        .collect::<Result<_>>()?;

    let fold_accs: Vec<((usize, usize), f64)> = jobs
        .par_iter()
        .map(|(layer, fold)| -> Result<((usize, usize), f64)> {
            let x = &pooled[*layer];
            let train_idx: Vec<usize> =
                (0..n).filter(|i| assignment[*i] != *fold).collect();
            let test_idx: Vec<usize> = (0..n).filter(|i| assignment[*i] == *fold).collect();
            let xt = gather_rows(x, &train_idx);
            let yt: Vec<u32> = train_idx.iter().map(|i| dump.labels[*i]).collect();
            let xv = gather_rows(x, &test_idx);
            let yv: Vec<u32> = test_idx.iter().map(|i| dump.labels[*i]).collect();
            let fold_cfg = ProbeConfig {
                seed: crate::seeded::derive_seed(
                    cfg.seed,
                    &["layer", &dump.layer_ids[*layer].to_string(), "fold", &fold.to_string()],
                ),
                ..cfg.clone()
            };
            let probe = train_probe(&xt, &yt, &fold_cfg)?;
            Ok(((*layer, *fold), probe_accuracy(&probe, &xv, &yv)))
        })
        .collect::<Result<_>>()?;

    let mut entries = Vec::with_capacity(dump.layer_ids.len());
    for (layer, layer_id) in dump.layer_ids.iter().enumerate() {
        let accs: Vec<f64> = fold_accs
            .iter()
            .filter(|((l, _), _)| *l == layer)
            .map(|(_, a)| *a)
            .collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / accs.len() as f64;
        entries.push(LayerAccuracy {
            layer_id: *layer_id,
            mean_accuracy: mean,
            std_accuracy: var.sqrt(),
        });
    }
    Ok(LayerCurve {
        entries,
        boundary_index: dump.boundary_index,
        end_to_end_accuracy: dump.end_to_end_accuracy,
    })
}

/// Synthetic dump spec: class-separated features at exactly one planted
/// layer, pure noise everywhere else.
#[derive(Debug, Clone)]
pub struct SynthDumpSpec {
    pub n_examples: usize,
    pub layer_ids: Vec<i64>,
    pub planted_layer: i64,
    pub boundary_index: usize,
    pub dim: usize,
    pub tokens_per_example: usize,
    /// Token noise standard deviation around the class mean.
    pub noise: f64,
    /// Distance of each class mean from the origin along a seeded direction.
    pub offset: f64,
    pub n_classes: u32,
    pub seed: u64,
}

impl SynthDumpSpec {
    pub fn new(n_examples: usize, layer_ids: Vec<i64>, planted_layer: i64, noise: f64, seed: u64) -> Self {
        let boundary_index = layer_ids.len() / 2;
        SynthDumpSpec {
            n_examples,
            layer_ids,
            planted_layer,
            boundary_index,
            dim: 16,
            tokens_per_example: 4,
            noise,
            offset: 3.0,
            n_classes: 2,
            seed,
        }
    }
}

/// Generate a synthetic feature dump. The label signal exists only at the
/// planted layer, which makes the expected curve an oracle: high accuracy
/// there, chance everywhere else.
pub fn synth_dump(spec: &SynthDumpSpec) -> Result<FeatureDump> {
    if !spec.layer_ids.contains(&spec.planted_layer) {
        return Err(Error::invalid("planted layer must be in the layer list"));
    }
    if spec.n_classes < 2 || spec.n_examples < spec.n_classes as usize {
        return Err(Error::invalid("need at least 2 classes and one example per class"));
    }
    let labels: Vec<u32> =
        (0..spec.n_examples).map(|i| (i % spec.n_classes as usize) as u32).collect();

    // seeded class-mean directions
    let mut dir_rng = rng_for(spec.seed, &["synth", "directions"]);
    let mut means = Vec::new();
    for _ in 0..spec.n_classes {
        let mut v = Array1::from_shape_fn(spec.dim, |_| standard_normal(&mut dir_rng));
        let norm = v.dot(&v).sqrt().max(1e-12);
        v.mapv_inplace(|x| x / norm * spec.offset);
        means.push(v);
    }

    let mut features = Vec::with_capacity(spec.layer_ids.len());
    for layer_id in &spec.layer_ids {
        let planted = *layer_id == spec.planted_layer;
        let mut per_example = Vec::with_capacity(spec.n_examples);
        for (i, label) in labels.iter().enumerate() {
            let mut rng = rng_for(
                spec.seed,
                &["synth", &layer_id.to_string(), &i.to_string()],
            );
            let mut tokens = Array2::from_shape_fn(
                (spec.tokens_per_example, spec.dim),
                |_| {
                    if planted {
                        spec.noise * standard_normal(&mut rng)
                    } else {
                        standard_normal(&mut rng)
                    }
                },
            );
            if planted {
                for mut row in tokens.rows_mut() {
                    row += &means[*label as usize];
                }
            }
            per_example.push(tokens);
        }
        features.push(per_example);
    }

    let dump = FeatureDump {
        layer_ids: spec.layer_ids.clone(),
        boundary_index: spec.boundary_index,
        labels,
        features,
        end_to_end_accuracy: None,
    };
    dump.validate()?;
    Ok(dump)
}
