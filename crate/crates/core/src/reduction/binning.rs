use super::{check_count, median_in_place};
use crate::dataset::Dataset;
use crate::error::Result;

/// Index of the equal-width bin holding `t`.
///
/// Bin `j` spans `[e_j, e_{j+1})` with `e_j = lo + (hi - lo) * j / m`; the
/// last bin is closed on the right. The floor estimate is corrected against
/// the explicit edges so boundary values land where the edges say.
fn bin_index(t: f64, lo: f64, hi: f64, m: usize) -> usize {
    let span = hi - lo;
    let edge = |j: usize| lo + span * j as f64 / m as f64;
    let mut j = (((t - lo) / span) * m as f64).floor().clamp(0.0, (m - 1) as f64) as usize;
    while j > 0 && t < edge(j) {
        j -= 1;
    }
    while j + 1 < m && t >= edge(j + 1) {
        j += 1;
    }
    j
}

/// Collapse equal-width target bins to per-column medians.
///
/// Empty bins are dropped, so the result may have fewer than `m` rows. When
/// every target is identical there is a single bin.
pub fn bin_reduce(train: &Dataset, m: usize) -> Result<Dataset> {
    check_count(m, train.n_rows())?;
    let ys = train.targets();
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = if hi > lo { m } else { 1 };

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, &t) in ys.iter().enumerate() {
        let j = if m == 1 { 0 } else { bin_index(t, lo, hi, m) };
        members[j].push(i);
    }

    let p = train.n_features();
    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut scratch = Vec::new();
    for rows in members.iter().filter(|r| !r.is_empty()) {
        for j in 0..p {
            scratch.clear();
            scratch.extend(rows.iter().map(|&i| train.row(i)[j]));
            features.push(median_in_place(&mut scratch));
        }
        scratch.clear();
        scratch.extend(rows.iter().map(|&i| ys[i]));
        targets.push(median_in_place(&mut scratch));
    }
    train.with_values(features, targets)
}
