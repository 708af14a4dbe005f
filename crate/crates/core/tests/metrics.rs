mod common;

use common::*;
use textnmn::metrics::{consensus_score, exact_score, Metric};

#[test]
fn consensus_credit() {
    assert_eq!(consensus_score("yes", &humans(4)), 1.0);
    assert_eq!(consensus_score("yes", &humans(2)), 2.0 / 3.0);
    assert_eq!(consensus_score("maybe", &humans(2)), 0.0);
    assert_eq!(Metric::Consensus.score("yes", &humans(3)), 1.0);
}

#[test]
fn exact_match_uses_the_majority() {
    assert_eq!(exact_score("no", &humans(4)), 1.0);
    assert_eq!(exact_score("yes", &humans(4)), 0.0);
}

#[test]
fn example_questions_split_by_category() {
    let counts = category_counts(&EXAMPLE_QUESTIONS);
    assert_eq!(counts.get("number"), Some(&2));
    assert_eq!(counts.get("yes/no"), Some(&1));
    assert_eq!(counts.get("other"), Some(&3));
}
