//! Decaying Gaussian exploration noise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Zero-mean i.i.d. Gaussian noise whose per-dimension standard deviation
/// decays geometrically with the episode index:
/// `sigma_episode = sigma0 * decay^episode`.
#[derive(Debug)]
pub struct NoiseProcess {
    sigma0: Vec<f64>,
    decay: f64,
    episode: u32,
    rng: ChaCha8Rng,
}

impl NoiseProcess {
    pub fn new(sigma0: Vec<f64>, decay: f64, rng: ChaCha8Rng) -> Self {
        assert!(sigma0.iter().all(|&s| s >= 0.0), "sigma0 must be nonnegative");
        assert!(decay > 0.0 && decay <= 1.0, "decay must be in (0,1]");
        Self {
            sigma0,
            decay,
            episode: 0,
            rng,
        }
    }

    /// Same standard deviation for every dimension.
    pub fn uniform(dim: usize, sigma0: f64, decay: f64, rng: ChaCha8Rng) -> Self {
        Self::new(vec![sigma0; dim], decay, rng)
    }

    pub fn dim(&self) -> usize {
        self.sigma0.len()
    }

    /// Set the current episode index (resets the decay schedule position).
    pub fn begin_episode(&mut self, episode: u32) {
        self.episode = episode;
    }

    pub fn sigma(&self) -> Vec<f64> {
        let factor = self.decay.powi(self.episode as i32);
        self.sigma0.iter().map(|s| s * factor).collect()
    }

    pub fn sample(&mut self) -> Vec<f64> {
        let factor = self.decay.powi(self.episode as i32);
        self.sigma0
            .iter()
            .map(|s| {
                let z: f64 = self.rng.sample(StandardNormal);
                s * factor * z
            })
            .collect()
    }
}
