//! Mutations of the checked-in fuzz seeds must never panic, and whatever
//! parses must satisfy the usual invariants.

use proptest::prelude::*;
use retrace_core::analysis::{inter_algorithm_scores, ScoreTable};
use retrace_core::Mdp;

const MDP_SEEDS: [&str; 3] = [
    include_str!("../../../fuzz/corpus/parse_mdp/one_state.mdp"),
    include_str!("../../../fuzz/corpus/parse_mdp/three_state.mdp"),
    include_str!("../../../fuzz/corpus/parse_mdp/comments.mdp"),
];

const SCORE_SEEDS: [&str; 3] = [
    include_str!("../../../fuzz/corpus/parse_score_csv/fixture.csv"),
    include_str!("../../../fuzz/corpus/parse_score_csv/degenerate.csv"),
    include_str!("../../../fuzz/corpus/parse_score_csv/duplicate.csv"),
];

#[derive(Debug, Clone)]
enum Edit {
    Delete(usize, usize),
    Insert(usize, String),
    Duplicate(usize, usize),
}

fn edits() -> impl Strategy<Value = Vec<Edit>> {
    let edit = prop_oneof![
        (any::<usize>(), 1usize..8).prop_map(|(a, n)| Edit::Delete(a, n)),
        (any::<usize>(), "[ \\n0-9a-z.,#eE+-]{1,6}").prop_map(|(a, s)| Edit::Insert(a, s)),
        (any::<usize>(), 1usize..40).prop_map(|(a, n)| Edit::Duplicate(a, n)),
    ];
    prop::collection::vec(edit, 1..6)
}

fn mutate(seed: &str, edits: &[Edit]) -> String {
    let mut chars: Vec<char> = seed.chars().collect();
    for e in edits {
        let len = chars.len().max(1);
        match e {
            Edit::Delete(at, n) => {
                let at = at % len;
                let end = (at + n).min(chars.len());
                if at < end {
                    chars.drain(at..end);
                }
            }
            Edit::Insert(at, s) => {
                let at = at % (chars.len() + 1);
                chars.splice(at..at, s.chars());
            }
            Edit::Duplicate(at, n) => {
                let at = at % len;
                let end = (at + n).min(chars.len());
                let piece: Vec<char> = chars.get(at..end).map(<[char]>::to_vec).unwrap_or_default();
                chars.splice(end..end, piece);
            }
        }
    }
    chars.into_iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn mutated_mdp_text_never_panics(which in 0usize..3, e in edits()) {
        let text = mutate(MDP_SEEDS[which], &e);
        if let Ok(mdp) = Mdp::parse(&text) {
            prop_assert_eq!(Mdp::parse(&mdp.to_text()).unwrap(), mdp);
        }
    }

    #[test]
    fn mutated_score_csv_never_panics(which in 0usize..3, e in edits()) {
        let text = mutate(SCORE_SEEDS[which], &e);
        if let Ok(table) = ScoreTable::parse_csv(&text) {
            let report = inter_algorithm_scores(&table);
            for f in &report.f {
                prop_assert!(f.windows(2).all(|w| w[1] <= w[0]));
            }
        }
    }
}

#[test]
fn seeds_parse() {
    for s in MDP_SEEDS {
        Mdp::parse(s).unwrap();
    }
    assert!(ScoreTable::parse_csv(SCORE_SEEDS[0]).is_ok());
    assert!(ScoreTable::parse_csv(SCORE_SEEDS[1]).is_ok());
    assert!(ScoreTable::parse_csv(SCORE_SEEDS[2]).is_err());
}
