//! Training-set reduction: random sampling, target binning, and mini-batch
//! k-means centroids in the joint feature/target space.

mod binning;
mod kmeans;
mod sampling;

use std::fmt;
use std::str::FromStr;

pub use binning::bin_reduce;
pub use kmeans::{
    default_iterations, inertia, kmeans_reduce, lloyd_kmeans, minibatch_kmeans, nearest,
    CentroidSet, LloydRun,
};
pub use sampling::random_sample;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_BATCH_SIZE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Sampling,
    Binning,
    KMeans,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Sampling, Method::Binning, Method::KMeans];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sampling => "sampling",
            Method::Binning => "binning",
            Method::KMeans => "kmeans",
        }
    }

    /// Stable numeric id used in seed derivation.
    pub fn id(self) -> u64 {
        match self {
            Method::Sampling => 1,
            Method::Binning => 2,
            Method::KMeans => 3,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sampling" => Ok(Method::Sampling),
            "binning" => Ok(Method::Binning),
            "kmeans" | "k-means" => Ok(Method::KMeans),
            other => Err(Error::Config(format!("unknown reduction method `{other}`"))),
        }
    }
}

/// What to reduce to and how.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionSpec {
    pub method: Method,
    /// Output instances (samples, bins, or centroids).
    pub target_count: usize,
    pub kmeans_batch_size: usize,
    /// `None` picks [`default_iterations`].
    pub kmeans_iterations: Option<usize>,
    pub seed: u64,
}

impl ReductionSpec {
    pub fn new(method: Method, target_count: usize, seed: u64) -> Self {
        Self {
            method,
            target_count,
            kmeans_batch_size: DEFAULT_BATCH_SIZE,
            kmeans_iterations: None,
            seed,
        }
    }
}

/// Reduce `train` according to `spec`.
pub fn reduce(train: &Dataset, spec: &ReductionSpec) -> Result<Dataset> {
    match spec.method {
        Method::Sampling => random_sample(train, spec.target_count, spec.seed),
        Method::Binning => bin_reduce(train, spec.target_count),
        Method::KMeans => kmeans_reduce(train, spec.target_count, spec),
    }
}

pub(crate) fn check_count(m: usize, n: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(Error::out_of_range("count", m, format!("1..={n}")));
    }
    Ok(())
}

/// Median of an unsorted slice; mean of the middle two for even lengths.
pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("cluster".parse::<Method>().is_err());
    }

    #[test]
    fn determinism_all_methods() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i as f64 * 0.37).sin(), i as f64 * 0.1]).collect();
        let ys: Vec<f64> = (0..60).map(|i| (i as f64 * 0.21).cos()).collect();
        let d = Dataset::from_rows(&rows, ys).unwrap();
        for m in Method::ALL {
            let spec = ReductionSpec::new(m, 17, 99);
            let a = reduce(&d, &spec).unwrap();
            let b = reduce(&d, &spec).unwrap();
            assert_eq!(a, b, "{m}");
            assert!(a.n_rows() <= 17);
            if m != Method::Binning {
                assert_eq!(a.n_rows(), 17);
            }
        }
    }
}
