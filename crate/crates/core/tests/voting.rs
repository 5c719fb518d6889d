use vispipe_core::generator::{vote, vote_index, VoteError};
use vispipe_core::value::Value;
use vispipe_oracles::vote as oracle;

#[test]
fn every_five_run_sequence_over_three_answers() {
    let seqs = oracle::sequences(&["a", "b", "c"], 5);
    assert_eq!(seqs.len(), 4usize.pow(5));
    for s in seqs {
        let keys: Vec<Option<String>> = s.iter().map(|a| a.map(String::from)).collect();
        let want = oracle::winner(&s);
        let got = vote_index(&keys).map(|i| keys[i].clone().unwrap());
        assert_eq!(got, want, "{s:?}");

        let values: Vec<Option<Value>> = s.iter().map(|a| a.map(|t| Value::text(t.to_uppercase()))).collect();
        match (vote(&values), &want) {
            (Ok(v), Some(w)) => assert_eq!(v, Value::text(w.to_uppercase())),
            (Err(VoteError::AllRunsFailed), None) => {}
            (got, want) => panic!("{s:?}: {got:?} vs {want:?}"),
        }
    }
}

#[test]
fn numbers_vote_by_canonical_text() {
    let runs = vec![Some(Value::Number(2.0)), Some(Value::text("3")), Some(Value::text("2"))];
    assert_eq!(vote(&runs).unwrap(), Value::Number(2.0));
}
