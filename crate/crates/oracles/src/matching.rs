//! Optimal one-to-one box matching by exhaustive search.

pub type Bx = [f64; 4];

pub fn iou(a: &Bx, b: &Bx) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let area = |x: &Bx| (x[2] - x[0]).max(0.0) * (x[3] - x[1]).max(0.0);
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Largest number of prediction/gold pairs with IoU at least `threshold`
/// (and equal tags when `tags` is given), no index used twice.
pub fn max_matches(preds: &[Bx], gold: &[Bx], threshold: f64, tags: Option<(&[&str], &[&str])>) -> usize {
    fn go(i: usize, used: &mut Vec<bool>, ok: &dyn Fn(usize, usize) -> bool, np: usize) -> usize {
        if i == np {
            return 0;
        }
        let mut best = go(i + 1, used, ok, np);
        for g in 0..used.len() {
            if !used[g] && ok(i, g) {
                used[g] = true;
                best = best.max(1 + go(i + 1, used, ok, np));
                used[g] = false;
            }
        }
        best
    }
    let ok = |p: usize, g: usize| {
        iou(&preds[p], &gold[g]) >= threshold
            && tags.is_none_or(|(pt, gt)| pt[p].trim().to_lowercase() == gt[g].trim().to_lowercase())
    };
    go(0, &mut vec![false; gold.len()], &ok, preds.len())
}
