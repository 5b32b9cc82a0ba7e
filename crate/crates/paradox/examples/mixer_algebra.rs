//! The prompt-conditioned layer mixer's verified algebra: cloned projectors
//! make mixing commute with projection, zero-initialized weighting gives
//! uniform mixing for any prompt, one-hot weights select a single layer, and
//! the concatenation pilot scales one layer's token norms exactly.
//!
//!     cargo run --example mixer_algebra

use ndarray::{Array1, Array2};

use paradox::mixer::{
    clone_init, concat_tokens, default_layer_set, mixed_forward, mixing_weights,
    prompt_embedding_stub, softmax, LayerId, LayerStack, Projector,
};

fn main() -> paradox::Result<()> {
    let (d_enc, d_llm, prompt_dim, tokens) = (12usize, 16usize, 24usize, 6usize);
    let layer_set = default_layer_set();
    let final_projector = Projector::seeded(d_enc, d_llm, 1);
    let params = clone_init(&final_projector, &layer_set, prompt_dim, 64, 1)?;

    let mut rng = paradox::rng_for(2, &["example", "stack"]);
    use rand::Rng;
    let stack = LayerStack::new(
        layer_set
            .iter()
            .map(|id| (*id, Array2::from_shape_fn((tokens, d_enc), |_| rng.gen_range(-1.0..1.0))))
            .collect(),
    )?;

    for prompt in ["what is the pitch pattern", "who is the second speaker"] {
        let e = prompt_embedding_stub(prompt, prompt_dim);
        let alpha = mixing_weights(&e, &params)?;
        println!("alpha for '{prompt}': {:?} (sum {:.12})", alpha.to_vec(), alpha.sum());
    }

    let alpha = softmax(&Array1::from(vec![1.0, 0.5, 0.0, -0.5, -1.0]));
    let mixed = mixed_forward(&stack, &params, &alpha)?;
    let mut blended: Array2<f64> = Array2::zeros((tokens, d_enc));
    for (i, id) in layer_set.iter().enumerate() {
        blended = blended + stack.get(*id).unwrap() * alpha[i];
    }
    let direct = final_projector.apply(&blended);
    let max_err = (&mixed - &direct).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("cloned projectors: mix-then-project vs project-the-blend max error {max_err:.2e}");

    let mut one_hot = Array1::zeros(5);
    one_hot[0] = 1.0;
    let selected = mixed_forward(&stack, &params, &one_hot)?;
    let layer5 = params.projectors[0].apply(stack.get(LayerId::Numbered(5)).unwrap());
    println!("one-hot weights select layer 5 exactly: {}", selected == layer5);

    let plain = concat_tokens(&stack, &params, None, 1.0)?;
    let emphasized = concat_tokens(&stack, &params, Some(LayerId::Numbered(5)), 10.0)?;
    let norm = |m: &Array2<f64>, row: usize| m.row(row).dot(&m.row(row)).sqrt();
    println!(
        "concat pilot: {} tokens total; layer-5 token norm {:.3} -> {:.3} under x10 scaling",
        plain.nrows(),
        norm(&plain, tokens),
        norm(&emphasized, tokens)
    );
    Ok(())
}
