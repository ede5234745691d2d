//! Seeded, schedule-independent sampling.
//!
//! Every sample index gets its own generator, seeded by mixing the run seed
//! with the index, so a parallel evaluation produces exactly the samples a
//! serial one does.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// SplitMix64 finalizer applied to `base ⊕ golden·(index+1)`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// ChaCha8 stream for sample `index` of a run seeded with `base`.
pub fn rng_for(base: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, index))
}

/// Which stratum a frequency sample was drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    Uniform,
    NearOrigin,
    NearCorner,
}

/// Stratified frequency sampling plan.
///
/// The first `uniform` samples are uniform on the torus, the next
/// `near_origin` are Gaussian around 0 with per-coordinate standard deviation
/// `origin_scale` (default `1/(10 κ √d)`, filled in by the verifiers), and the
/// last `near_corner` perturb `(1/2, …, 1/2)` by the same scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub uniform: usize,
    pub near_origin: usize,
    pub near_corner: usize,
    pub seed: u64,
    #[serde(default)]
    pub origin_scale: Option<f64>,
}

impl SampleSpec {
    /// `count` samples split 40/40/20 between uniform, near-origin and near-corner.
    pub fn mixed(count: usize, seed: u64) -> Self {
        let uniform = count * 2 / 5;
        let near_origin = count * 2 / 5;
        SampleSpec { uniform, near_origin, near_corner: count - uniform - near_origin, seed, origin_scale: None }
    }

    pub fn uniform(count: usize, seed: u64) -> Self {
        SampleSpec { uniform: count, near_origin: 0, near_corner: 0, seed, origin_scale: None }
    }

    pub fn near_origin(count: usize, seed: u64) -> Self {
        SampleSpec { uniform: 0, near_origin: count, near_corner: 0, seed, origin_scale: None }
    }

    pub fn len(&self) -> usize {
        self.uniform + self.near_origin + self.near_corner
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stratum(&self, index: usize) -> Stratum {
        if index < self.uniform {
            Stratum::Uniform
        } else if index < self.uniform + self.near_origin {
            Stratum::NearOrigin
        } else {
            Stratum::NearCorner
        }
    }

    /// Raw (not yet canonicalized) frequency for sample `index` in dimension `dim`.
    pub fn draw(&self, index: usize, dim: usize, default_scale: f64) -> Vec<f64> {
        let mut rng = rng_for(self.seed, index as u64);
        let scale = self.origin_scale.unwrap_or(default_scale);
        match self.stratum(index) {
            Stratum::Uniform => (0..dim).map(|_| rng.random::<f64>() - 0.5).collect(),
            Stratum::NearOrigin => (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect(),
            Stratum::NearCorner => (0..dim).map(|_| 0.5 + scale * rng.sample::<f64, _>(StandardNormal)).collect(),
        }
    }
}

/// Uniform point in the Euclidean ball of radius `radius` in `R^dim`, drawn
/// from the radial shell `[shell/shells, (shell+1)/shells)` of the volume
/// fraction: Gaussian direction times `radius · u^{1/d}`.
pub fn sample_ball_shell<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    radius: f64,
    shell: usize,
    shells: usize,
    out: &mut [f64],
) {
    debug_assert_eq!(out.len(), dim);
    let mut norm2 = 0.0;
    loop {
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            norm2 += *v * *v;
        }
        if norm2 > 0.0 {
            break;
        }
    }
    let u = (shell as f64 + rng.random::<f64>()) / shells as f64;
    let r = radius * u.powf(1.0 / dim as f64);
    let s = r / norm2.sqrt();
    for v in out.iter_mut() {
        *v *= s;
    }
}
