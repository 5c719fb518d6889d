//! Classify and select outcomes found by exhaustive search.

/// Highest-scoring column of a row, lowest index on ties.
pub fn best(row: &[f64]) -> usize {
    let mut b = 0;
    for (j, v) in row.iter().enumerate() {
        if *v > row[b] {
            b = j;
        }
    }
    b
}

/// Searches every labelling in which a region carries either nothing or
/// its own best category and no category is used twice. The winner tags
/// the most regions, then has the highest total score, then uses the
/// lowest region index for each category in turn.
pub fn classify(matrix: &[Vec<f64>], categories: usize) -> Vec<Option<usize>> {
    let n = matrix.len();
    if n == 0 || categories == 0 {
        return vec![None; n];
    }
    let bests: Vec<usize> = matrix.iter().map(|r| best(r)).collect();
    // (tagged count, total score, region per category, labels)
    type Best = (usize, f64, Vec<usize>, Vec<Option<usize>>);
    let mut winner: Option<Best> = None;
    for mask in 0u32..(1 << n) {
        let labels: Vec<Option<usize>> = (0..n).map(|i| (mask >> i & 1 == 1).then_some(bests[i])).collect();
        let mut used = vec![usize::MAX; categories];
        let mut ok = true;
        for (i, l) in labels.iter().enumerate() {
            if let Some(c) = l {
                if used[*c] != usize::MAX {
                    ok = false;
                    break;
                }
                used[*c] = i;
            }
        }
        if !ok {
            continue;
        }
        let tagged = labels.iter().flatten().count();
        let total: f64 = labels.iter().enumerate().filter_map(|(i, l)| l.map(|c| matrix[i][c])).sum();
        let better = match &winner {
            None => true,
            // Totals are compared with a tolerance: equal real sums may round
            // differently depending on which regions were added.
            Some((t, s, u, _)) => {
                tagged > *t
                    || (tagged == *t && (total > *s + 1e-9 || ((total - *s).abs() <= 1e-9 && used < *u)))
            }
        };
        if better {
            winner = Some((tagged, total, used, labels));
        }
    }
    winner.expect("the empty labelling is always feasible").3
}

/// For each phrase, the region scoring highest on it (lowest index on ties).
pub fn select(matrix: &[Vec<f64>], phrases: usize) -> Vec<usize> {
    (0..phrases)
        .map(|p| {
            let mut bi = 0;
            for i in 0..matrix.len() {
                if matrix[i][p] > matrix[bi][p] {
                    bi = i;
                }
            }
            bi
        })
        .collect()
}

/// Every `rows` x `cols` matrix with entries from `alphabet`.
pub fn all_matrices(rows: usize, cols: usize, alphabet: &[f64]) -> Vec<Vec<Vec<f64>>> {
    let cells = rows * cols;
    let total = alphabet.len().pow(cells as u32);
    (0..total)
        .map(|mut code| {
            let mut flat = Vec::with_capacity(cells);
            for _ in 0..cells {
                flat.push(alphabet[code % alphabet.len()]);
                code /= alphabet.len();
            }
            flat.chunks(cols).map(<[f64]>::to_vec).collect()
        })
        .collect()
}
