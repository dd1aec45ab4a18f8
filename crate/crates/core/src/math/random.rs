use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Seeded random source. Identical seeds (and stream ids) give identical draws.
#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha20Rng,
}

/// Deterministic random stream for `seed`.
pub fn rng_stream(seed: u64) -> RandomSource {
    RandomSource::new(seed)
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `stream` under the same seed, for parallel consumers.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on (0, 1].
    fn uniform_open_low(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn normal_vector(&mut self, len: usize) -> DVector<f64> {
        DVector::from_fn(len, |_, _| self.normal())
    }

    /// Gamma(shape, rate) by Marsaglia and Tsang; shapes below one are boosted
    /// with Gamma(a) = Gamma(a + 1) · U^{1/a}, evaluated in log space. The
    /// result is clamped to the smallest positive normal float so precision
    /// draws never reach zero.
    pub fn gamma(&mut self, shape: f64, rate: f64) -> f64 {
        assert!(shape > 0.0 && rate > 0.0, "gamma needs shape, rate > 0 (got {shape}, {rate})");
        if shape < 1.0 {
            let boosted = self.gamma_unit(shape + 1.0);
            let ln_u = self.uniform_open_low().ln();
            let ln_value = boosted.ln() + ln_u / shape - rate.ln();
            return ln_value.exp().max(f64::MIN_POSITIVE);
        }
        (self.gamma_unit(shape) / rate).max(f64::MIN_POSITIVE)
    }

    fn gamma_unit(&mut self, shape: f64) -> f64 {
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform_open_low();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = rng_stream(42);
        let mut b = rng_stream(42);
        for _ in 0..1000 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
            assert_eq!(a.gamma(0.3, 2.0).to_bits(), b.gamma(0.3, 2.0).to_bits());
        }
        let mut c = rng_stream(43);
        let mut d = rng_stream(42);
        assert_ne!(c.uniform(), d.uniform());
    }

    #[test]
    fn streams_differ() {
        let mut a = RandomSource::with_stream(7, 0);
        let mut b = RandomSource::with_stream(7, 1);
        let xs: Vec<f64> = (0..8).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..8).map(|_| b.uniform()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn gamma_mean_law_of_large_numbers() {
        let mut rng = rng_stream(1);
        let n = 1_000_000;
        let mean = (0..n).map(|_| rng.gamma(2.0, 3.0)).sum::<f64>() / n as f64;
        assert!((mean - 2.0 / 3.0).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn small_shape_gamma_moments() {
        // Gamma(0.3, 1): mean 0.3, variance 0.3
        let mut rng = rng_stream(2);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| rng.gamma(0.3, 1.0)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 0.3).abs() < 3.0 * (0.3f64 / n as f64).sqrt() + 1e-3);
        assert!((var - 0.3).abs() < 0.01);
        assert!(draws.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn tiny_shape_never_zero() {
        let mut rng = rng_stream(3);
        assert!((0..100_000).all(|_| rng.gamma(0.01, 0.01) > 0.0));
    }

    #[test]
    fn normal_moments() {
        let mut rng = rng_stream(4);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.005);
        assert!((var - 1.0).abs() < 0.01);
    }
}
