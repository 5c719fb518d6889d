use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vispipe_core::neural::{classify_assignment, select_winners};
use vispipe_oracles::assign;

fn random_matrix(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let rows = rng.random_range(1..8);
    let cols = rng.random_range(1..6);
    // Coarse levels make ties common.
    (0..rows).map(|_| (0..cols).map(|_| f64::from(rng.random_range(0..5u8)) / 4.0).collect()).collect()
}

#[test]
fn randomized_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let m = random_matrix(&mut rng);
        let k = m[0].len();
        let tags = classify_assignment(&m, k);
        let mut used: Vec<usize> = tags.iter().flatten().copied().collect();
        let n = used.len();
        used.sort_unstable();
        used.dedup();
        assert_eq!(used.len(), n, "duplicate tag in {m:?}");
        assert_eq!(tags, assign::classify(&m, k), "{m:?}");

        let single: Vec<Vec<f64>> = m.iter().map(|r| vec![r[0]]).collect();
        let t1 = classify_assignment(&single, 1);
        let top = assign::select(&single, 1)[0];
        for (i, t) in t1.iter().enumerate() {
            assert_eq!(*t, (i == top).then_some(0), "{single:?}");
        }

        let winners = select_winners(&m, k);
        assert_eq!(winners.len(), k);
        assert_eq!(winners, assign::select(&m, k));
    }
}

#[test]
fn every_small_matrix_matches_the_search() {
    for rows in 1..=3 {
        for cols in 1..=3 {
            for m in assign::all_matrices(rows, cols, &[0.0, 0.5, 1.0]) {
                assert_eq!(classify_assignment(&m, cols), assign::classify(&m, cols), "{m:?}");
            }
        }
    }
}

#[test]
fn empty_inputs() {
    assert!(classify_assignment(&[], 3).is_empty());
    assert_eq!(classify_assignment(&[vec![0.3]], 1), vec![Some(0)]);
}
