//! Plurality vote by counting.

/// Every sequence of `runs` answers over `symbols` plus a failure marker
/// (`None`).
pub fn sequences(symbols: &[&'static str], runs: usize) -> Vec<Vec<Option<&'static str>>> {
    let alphabet: Vec<Option<&'static str>> = std::iter::once(None).chain(symbols.iter().copied().map(Some)).collect();
    let mut out = vec![Vec::new()];
    for _ in 0..runs {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                alphabet.iter().map(move |a| {
                    let mut p = prefix.clone();
                    p.push(*a);
                    p
                })
            })
            .collect();
    }
    out
}

/// The symbol with the highest count; ties go to the symbol seen first.
/// `None` when every run failed.
pub fn winner(answers: &[Option<&str>]) -> Option<String> {
    let mut tally: Vec<(String, usize)> = Vec::new();
    for a in answers.iter().flatten() {
        match tally.iter_mut().find(|(s, _)| s == a) {
            Some((_, n)) => *n += 1,
            None => tally.push((a.to_string(), 1)),
        }
    }
    let top = tally.iter().map(|(_, n)| *n).max()?;
    tally.into_iter().find(|(_, n)| *n == top).map(|(s, _)| s)
}
