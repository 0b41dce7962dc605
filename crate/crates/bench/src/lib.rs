//! Fixtures shared by the benchmarks.

use ellfit::{decompose, sample_vectors, Decomposition, SampleSet};

/// Sizes used across the pipeline benchmarks, as (d, m).
pub const SIZES: [(usize, usize); 3] = [(50, 125), (100, 500), (200, 1000)];

pub fn instance(d: usize, m: usize) -> (SampleSet, Decomposition) {
    let s = sample_vectors(17, d, m).expect("valid size");
    let dec = decompose(&s).expect("invertible M");
    (s, dec)
}
