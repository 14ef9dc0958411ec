//! Seeded randomness. One seed plus one call sequence gives one stream,
//! and child streams can be derived without consuming the parent.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha12Rng,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng {
            seed,
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream; deterministic in (seed, tag) and
    /// unaffected by how much of the parent stream was consumed.
    pub fn derive(&self, tag: u64) -> Rng {
        Rng::new(splitmix64(self.seed ^ splitmix64(tag.wrapping_add(1))))
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    /// i.i.d. standard normal tensor.
    pub fn gaussian(&mut self, rows: usize, cols: usize) -> Tensor {
        Tensor::matrix(rows, cols, self.normal_vec(rows * cols))
    }

    /// Gaussian parameter leaf scaled by `std`.
    pub fn gaussian_param(&mut self, rows: usize, cols: usize, std: f64) -> Tensor {
        let data = (0..rows * cols).map(|_| self.normal() * std).collect();
        Tensor::param(rows, cols, data)
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.inner.gen_range(0..=i);
            xs.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a = Rng::new(7).gaussian(4, 3);
        let b = Rng::new(7).gaussian(4, 3);
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn different_seeds_differ() {
        let a = Rng::new(1).gaussian(2, 5);
        let b = Rng::new(2).gaussian(2, 5);
        assert_ne!(a.data(), b.data());
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = Rng::new(42);
        let n = 100_000;
        let xs = rng.normal_vec(n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn derived_streams_are_independent_of_consumption() {
        let parent = Rng::new(3);
        let a = parent.derive(5).gaussian(1, 4);
        let mut consumed = Rng::new(3);
        let _ = consumed.normal_vec(100);
        let b = consumed.derive(5).gaussian(1, 4);
        assert_eq!(a.data(), b.data());
    }
}
