//! Channel model: i.i.d. Rayleigh fading and unit-variance receiver noise.
//!
//! Receiver `k` observes `y_k = h_k x + n_k`, where `h_k` is row `k` of a
//! `K x M` matrix of independent `CN(0, 1)` gains and `n_k ~ CN(0, 1)`.
//! Gains are redrawn independently every slot.

mod matrix;

pub use matrix::{condition_number, invert, ComplexMatrix, SINGULAR_COND};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Each Monte Carlo work unit owns one stream, so units can run in any order
/// (or concurrently) and still draw identical sequences.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// One circularly-symmetric `CN(0, 1)` draw.
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let re: f64 = StandardNormal.sample(&mut self.rng);
        let im: f64 = StandardNormal.sample(&mut self.rng);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }
}

/// The `K x M` channel of one slot; row `k` is user `k`'s gain vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub slot_index: usize,
    pub matrix: ComplexMatrix,
}

impl ChannelRealization {
    pub fn users(&self) -> usize {
        self.matrix.rows()
    }

    pub fn antennas(&self) -> usize {
        self.matrix.cols()
    }

    /// Gain vector of user `k` (0-based).
    pub fn user(&self, k: usize) -> &[Complex64] {
        self.matrix.row(k)
    }
}

/// Draws a fresh `K x M` matrix of i.i.d. `CN(0, 1)` gains.
pub fn sample_channel(
    rng: &mut RngStream,
    users: usize,
    antennas: usize,
    slot: usize,
) -> ChannelRealization {
    let data = (0..users * antennas)
        .map(|_| rng.complex_gaussian())
        .collect();
    ChannelRealization {
        slot_index: slot,
        matrix: ComplexMatrix::from_rows(users, antennas, data)
            .expect("users and antennas must be positive"),
    }
}

/// `K` independent `CN(0, 1)` noise samples.
pub fn sample_noise(rng: &mut RngStream, users: usize) -> Vec<Complex64> {
    (0..users).map(|_| rng.complex_gaussian()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stream_same_draws() {
        let a = sample_channel(&mut RngStream::new(7, 0), 2, 2, 0);
        let b = sample_channel(&mut RngStream::new(7, 0), 2, 2, 0);
        assert_eq!(a, b);
    }

    #[test]
    fn different_streams_differ() {
        let a = sample_channel(&mut RngStream::new(7, 0), 2, 2, 0);
        let b = sample_channel(&mut RngStream::new(7, 1), 2, 2, 0);
        assert_ne!(a, b);
    }

    #[test]
    fn successive_slots_differ() {
        let mut rng = RngStream::new(3, 0);
        let a = sample_channel(&mut rng, 2, 2, 0);
        let b = sample_channel(&mut rng, 2, 2, 1);
        assert_ne!(a.matrix, b.matrix);
        assert_eq!(b.slot_index, 1);
    }

    #[test]
    fn shape_contract() {
        let h = sample_channel(&mut RngStream::new(1, 0), 3, 2, 0);
        assert_eq!((h.users(), h.antennas()), (3, 2));
        assert_eq!(h.matrix.as_slice().len(), 6);
        assert_eq!(sample_noise(&mut RngStream::new(1, 0), 5).len(), 5);
    }

    #[test]
    fn gain_moments() {
        let mut rng = RngStream::new(11, 0);
        let n = 100_000;
        let draws: Vec<Complex64> = (0..n).map(|_| rng.complex_gaussian()).collect();
        let mean_re = draws.iter().map(|z| z.re).sum::<f64>() / n as f64;
        let mean_im = draws.iter().map(|z| z.im).sum::<f64>() / n as f64;
        let power = draws.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        let var_re = draws.iter().map(|z| z.re * z.re).sum::<f64>() / n as f64;
        assert!(mean_re.abs() < 0.02 && mean_im.abs() < 0.02);
        assert!((power - 1.0).abs() < 0.02, "E|h|^2 = {power}");
        assert!((var_re - 0.5).abs() < 0.02);
    }

    #[test]
    fn noise_variance() {
        let mut rng = RngStream::new(12, 4);
        let n = 100_000;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut sq = 0.0;
        for _ in 0..n / 4 {
            for z in sample_noise(&mut rng, 4) {
                sum += z;
                sq += z.norm_sqr();
            }
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean.norm_sqr();
        assert!((var - 1.0).abs() < 0.02, "noise variance {var}");
    }
}
