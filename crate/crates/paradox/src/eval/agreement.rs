//! Multi-annotator agreement statistics: Fleiss' kappa, majority-vote
//! accuracy, and per-response accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Annotation counts: one row per example, one column per category; each cell
/// is how many annotators chose that category. Every row must sum to the same
/// number of annotators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgreementMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl AgreementMatrix {
    pub fn new(counts: Vec<Vec<usize>>) -> Result<Self> {
        let m = AgreementMatrix { counts };
        m.annotators_per_example()?;
        Ok(m)
    }

    pub fn n_examples(&self) -> usize {
        self.counts.len()
    }

    pub fn n_categories(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    /// Validate shape and return the common row sum.
    pub fn annotators_per_example(&self) -> Result<usize> {
        if self.counts.is_empty() {
            return Err(Error::invalid("agreement matrix needs at least one example"));
        }
        let cats = self.counts[0].len();
        if cats < 2 {
            return Err(Error::invalid("agreement matrix needs at least two categories"));
        }
        if self.counts.iter().any(|r| r.len() != cats) {
            return Err(Error::invalid("agreement matrix rows have differing category counts"));
        }
        let n = self.counts[0].iter().sum::<usize>();
        if n < 2 {
            return Err(Error::invalid("agreement requires at least two annotators"));
        }
        if self.counts.iter().any(|r| r.iter().sum::<usize>() != n) {
            return Err(Error::invalid("agreement matrix rows must all sum to the annotator count"));
        }
        Ok(n)
    }
}

/// Fleiss' kappa: chance-corrected agreement across annotators.
/// `kappa = (P_bar - P_bar_e) / (1 - P_bar_e)`. Unanimous matrices yield
/// exactly 1.0; the degenerate case `P_bar_e = 1` (all votes in one category)
/// also returns 1.0 since it is necessarily unanimous.
pub fn fleiss_kappa(m: &AgreementMatrix) -> Result<f64> {
    let n = m.annotators_per_example()? as f64;
    let n_examples = m.n_examples() as f64;

    if m.counts.iter().all(|row| row.iter().any(|c| *c as f64 == n)) {
        return Ok(1.0);
    }

    let p_bar = m
        .counts
        .iter()
        .map(|row| {
            let agreements: f64 = row.iter().map(|c| (*c * *c) as f64).sum::<f64>() - n;
            agreements / (n * (n - 1.0))
        })
        .sum::<f64>()
        / n_examples;

    let mut p_e = 0.0;
    for j in 0..m.n_categories() {
        let p_j =
            m.counts.iter().map(|row| row[j] as f64).sum::<f64>() / (n_examples * n);
        p_e += p_j * p_j;
    }

    if (1.0 - p_e).abs() < 1e-15 {
        // all mass in one category implies unanimity, handled above
        return Err(Error::invalid("degenerate agreement matrix: expected agreement is 1"));
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// How tied majority votes score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// A tied example counts as incorrect (default).
    #[default]
    CountIncorrect,
    /// Tied examples are dropped from the denominator.
    Exclude,
}

/// Fraction of examples whose modal category equals the gold label.
pub fn majority_vote_accuracy(
    m: &AgreementMatrix,
    gold: &[usize],
    ties: TiePolicy,
) -> Result<f64> {
    m.annotators_per_example()?;
    validate_gold(m, gold)?;
    let mut correct = 0usize;
    let mut counted = 0usize;
    for (row, gold_cat) in m.counts.iter().zip(gold) {
        let max = *row.iter().max().unwrap();
        let modal: Vec<usize> =
            row.iter().enumerate().filter(|(_, c)| **c == max).map(|(j, _)| j).collect();
        if modal.len() > 1 {
            match ties {
                TiePolicy::CountIncorrect => counted += 1,
                TiePolicy::Exclude => {}
            }
            continue;
        }
        counted += 1;
        if modal[0] == *gold_cat {
            correct += 1;
        }
    }
    if counted == 0 {
        return Err(Error::invalid("all examples tied; majority accuracy undefined"));
    }
    Ok(correct as f64 / counted as f64)
}

/// Fraction of individual annotator responses equal to the gold label.
pub fn per_response_accuracy(m: &AgreementMatrix, gold: &[usize]) -> Result<f64> {
    let n = m.annotators_per_example()?;
    validate_gold(m, gold)?;
    let correct: usize = m.counts.iter().zip(gold).map(|(row, g)| row[*g]).sum();
    Ok(correct as f64 / (m.n_examples() * n) as f64)
}

fn validate_gold(m: &AgreementMatrix, gold: &[usize]) -> Result<()> {
    if gold.len() != m.n_examples() {
        return Err(Error::invalid("gold labels must match the number of examples"));
    }
    if gold.iter().any(|g| *g >= m.n_categories()) {
        return Err(Error::invalid("gold label outside the category range"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unanimous_matrix_is_exactly_one() {
        let m = AgreementMatrix::new(vec![vec![4, 0], vec![0, 4], vec![4, 0]]).unwrap();
        assert_eq!(fleiss_kappa(&m).unwrap(), 1.0);
        // including the single-category degenerate case
        let m = AgreementMatrix::new(vec![vec![4, 0], vec![4, 0]]).unwrap();
        assert_eq!(fleiss_kappa(&m).unwrap(), 1.0);
    }

    #[test]
    fn evenly_split_matrix_matches_closed_form() {
        // two examples, two categories, four annotators, rows [[2,2],[2,2]]:
        // P_i = (4+4-4)/12 = 1/3, P_e = 1/2, kappa = (1/3 - 1/2)/(1/2) = -1/3
        let m = AgreementMatrix::new(vec![vec![2, 2], vec![2, 2]]).unwrap();
        let k = fleiss_kappa(&m).unwrap();
        assert!((k - (-1.0 / 3.0)).abs() < 1e-12, "kappa {k}");
    }

    #[test]
    fn unequal_row_sums_are_invalid() {
        assert!(AgreementMatrix::new(vec![vec![2, 2], vec![3, 2]]).is_err());
        assert!(AgreementMatrix::new(vec![]).is_err());
        assert!(AgreementMatrix::new(vec![vec![4]]).is_err());
    }

    #[test]
    fn majority_tie_counts_incorrect_but_can_be_excluded() {
        let m = AgreementMatrix::new(vec![vec![2, 2], vec![4, 0]]).unwrap();
        let gold = vec![0, 0];
        let strict = majority_vote_accuracy(&m, &gold, TiePolicy::CountIncorrect).unwrap();
        assert_eq!(strict, 0.5);
        let lenient = majority_vote_accuracy(&m, &gold, TiePolicy::Exclude).unwrap();
        assert_eq!(lenient, 1.0);
        assert_eq!(per_response_accuracy(&m, &gold).unwrap(), 0.75);
    }

    #[test]
    fn unanimous_correct_matrix_scores_one_on_both_metrics() {
        let m = AgreementMatrix::new(vec![vec![5, 0], vec![0, 5]]).unwrap();
        let gold = vec![0, 1];
        assert_eq!(majority_vote_accuracy(&m, &gold, TiePolicy::CountIncorrect).unwrap(), 1.0);
        assert_eq!(per_response_accuracy(&m, &gold).unwrap(), 1.0);
    }

    #[test]
    fn three_example_hand_fixture() {
        // annotators = 3
        // row 0: [3,0] modal 0, gold 0 -> majority correct, responses 3/3
        // row 1: [1,2] modal 1, gold 0 -> majority wrong, responses 1/3
        // row 2: [2,1] modal 0, gold 0 -> majority correct, responses 2/3
        let m = AgreementMatrix::new(vec![vec![3, 0], vec![1, 2], vec![2, 1]]).unwrap();
        let gold = vec![0, 0, 0];
        assert!((majority_vote_accuracy(&m, &gold, TiePolicy::CountIncorrect).unwrap()
            - 2.0 / 3.0)
            .abs()
            < 1e-12);
        assert!((per_response_accuracy(&m, &gold).unwrap() - 6.0 / 9.0).abs() < 1e-12);
    }
}
