//! Seeded Gaussian inputs.
//!
//! Every draw comes from a ChaCha8 generator whose key is `(seed, domain)` and
//! whose stream id is the row index, so any row can be regenerated on its own
//! and the order in which rows are produced never matters. Normals use the
//! Ziggurat sampler from `rand_distr`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};

const DOMAIN_VECTORS: u64 = 0x7665_6374_6f72_7331; // "vectors1"
const DOMAIN_GOE: u64 = 0x676f_655f_6d61_7431; // "goe_mat1"
const DOMAIN_TRIAL: u64 = 0x7472_6961_6c73_6564; // "trialsed"
const DOMAIN_START: u64 = 0x7374_6172_7476_6563; // "startvec"

/// Generator for one `(seed, domain, stream)` triple.
pub fn stream_rng(seed: u64, domain: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Seed for trial `index` of an experiment with base seed `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    stream_rng(base, DOMAIN_TRIAL, index).random()
}

/// Seeded start vector for iterative eigensolvers.
pub fn start_vector(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, DOMAIN_START, n as u64);
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// The vectors v_1..v_m, one per row of `vectors`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    pub d: usize,
    pub m: usize,
    #[serde(skip)]
    pub vectors: DMatrix<f64>,
    pub seed: u64,
}

impl SampleSet {
    /// Wraps explicit vectors (rows) as a sample; the seed is informational.
    pub fn from_rows(vectors: DMatrix<f64>, seed: u64) -> Result<Self> {
        let (m, d) = vectors.shape();
        if m == 0 || d == 0 {
            return Err(Error::InvalidArgument(format!("empty sample ({m}x{d})")));
        }
        if vectors.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample entry".into()));
        }
        Ok(SampleSet { d, m, vectors, seed })
    }
}

/// Symmetric matrix with zero diagonal and Gaussian off-diagonal entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoeMatrix {
    pub n: usize,
    #[serde(skip)]
    pub entries: DMatrix<f64>,
    pub variance: f64,
    pub seed: u64,
}

/// Draws m vectors with i.i.d. N(0, 1/d) coordinates.
pub fn sample_vectors(seed: u64, d: usize, m: usize) -> Result<SampleSet> {
    if d == 0 || m == 0 {
        return Err(Error::InvalidArgument(format!(
            "sample_vectors needs d >= 1 and m >= 1 (got d={d}, m={m})"
        )));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let mut vectors = DMatrix::zeros(m, d);
    for i in 0..m {
        let mut rng = stream_rng(seed, DOMAIN_VECTORS, i as u64);
        for a in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            vectors[(i, a)] = z * scale;
        }
    }
    Ok(SampleSet { d, m, vectors, seed })
}

/// Draws an n x n GOE-type matrix with the given off-diagonal variance.
pub fn sample_goe(seed: u64, n: usize, variance: f64) -> Result<GoeMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample_goe needs n >= 1".into()));
    }
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sample_goe needs a positive variance, got {variance}"
        )));
    }
    let sd = variance.sqrt();
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut rng = stream_rng(seed, DOMAIN_GOE, i as u64);
        for j in (i + 1)..n {
            let z: f64 = rng.sample(StandardNormal);
            entries[(i, j)] = z * sd;
            entries[(j, i)] = z * sd;
        }
    }
    Ok(GoeMatrix { n, entries, variance, seed })
}
