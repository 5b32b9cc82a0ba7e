//! Human-evaluation statistics: Fleiss' kappa, majority-vote accuracy (ties
//! count as incorrect), and per-response accuracy on small annotation
//! matrices.
//!
//!     cargo run --example human_agreement

use paradox::eval::agreement::{
    fleiss_kappa, majority_vote_accuracy, per_response_accuracy, AgreementMatrix, TiePolicy,
};

fn main() -> paradox::Result<()> {
    // five annotators, unanimous on every example
    let unanimous = AgreementMatrix::new(vec![vec![5, 0], vec![0, 5], vec![5, 0], vec![0, 5]])?;
    println!("unanimous matrix: kappa = {:.3}", fleiss_kappa(&unanimous)?);

    // mixed agreement
    let mixed = AgreementMatrix::new(vec![
        vec![4, 1],
        vec![1, 4],
        vec![3, 2],
        vec![5, 0],
        vec![2, 3],
    ])?;
    let gold = vec![0usize, 1, 0, 0, 1];
    println!(
        "mixed matrix: kappa = {:.3}, majority acc = {:.3}, per-response acc = {:.3}",
        fleiss_kappa(&mixed)?,
        majority_vote_accuracy(&mixed, &gold, TiePolicy::CountIncorrect)?,
        per_response_accuracy(&mixed, &gold)?
    );

    // the tie rule: a 2-2 split counts as incorrect unless ties are excluded
    let tied = AgreementMatrix::new(vec![vec![2, 2], vec![4, 0]])?;
    let gold = vec![0usize, 0];
    println!(
        "tie handling: strict = {:.3}, ties excluded = {:.3}",
        majority_vote_accuracy(&tied, &gold, TiePolicy::CountIncorrect)?,
        majority_vote_accuracy(&tied, &gold, TiePolicy::Exclude)?
    );
    Ok(())
}
