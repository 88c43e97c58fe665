use rand::seq::index;

use super::check_count;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::seed;

/// `m` distinct rows drawn uniformly without replacement, in draw order.
pub fn random_sample(train: &Dataset, m: usize, seed: u64) -> Result<Dataset> {
    check_count(m, train.n_rows())?;
    let mut rng = seed::rng(seed);
    let idx = index::sample(&mut rng, train.n_rows(), m).into_vec();
    Ok(train.select_rows(&idx))
}
