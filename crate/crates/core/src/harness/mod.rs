//! Experiment harness: synthetic datasets, transfer runs, aggregation,
//! plots and the command-line front end.

pub mod aggregate;
pub mod cli;
pub mod dataset;
pub mod experiment;
pub mod plot;

/// Mixes `parts` into `base` so that every stream gets an independent seed.
pub(crate) fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(splitmix(base), |acc, &p| splitmix(acc ^ splitmix(p)))
}
