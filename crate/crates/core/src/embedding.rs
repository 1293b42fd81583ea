//! Deterministic semantic embedding space.
//!
//! Stands in for a pretrained image/text encoder at desk scale: every token
//! (category or attribute) maps to a fixed unit vector, objects and queries
//! embed as weighted token sums, and per-view sensor noise is modeled as a
//! rotation of the true embedding inside a seeded random 2-plane.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::num::{real, Real};

/// Attribute tokens contribute with this weight relative to the category.
/// High enough that a wrong attribute keeps cosine clearly below the
/// confirmation threshold, low enough that the category still dominates.
const ATTRIBUTE_WEIGHT: f64 = 0.6;

/// Per-instance jitter weight applied from the object's embedding seed.
const JITTER_WEIGHT: f64 = 0.05;

/// Global stream constant separating token vectors from other RNG users.
const TOKEN_STREAM: u64 = 0x746f_6b65_6e73;

/// FNV-1a, used for stable token hashing (std hashers are not guaranteed
/// stable across releases).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1_0000_0000_01b3);
    }
    h
}

/// Mix a list of seed parts into one 64-bit seed (splitmix64 finalizer).
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        let mut z = h ^ p.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// Seeded RNG from mixed parts; ChaCha8 keeps streams portable.
pub fn rng_from(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(parts))
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Real>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

/// Normalize in place; returns false (leaving zeros) for a zero vector.
pub fn normalize<T: Real>(v: &mut [T]) -> bool {
    let n = norm(v);
    if n <= T::zero() {
        return false;
    }
    for x in v.iter_mut() {
        *x = *x / n;
    }
    true
}

/// Cosine similarity; zero vectors give 0.
pub fn cosine<T: Real>(a: &[T], b: &[T]) -> T {
    let na = norm(a);
    let nb = norm(b);
    if na <= T::zero() || nb <= T::zero() {
        return T::zero();
    }
    dot(a, b) / (na * nb)
}

/// Map cosine in [-1, 1] to a similarity in [0, 1].
pub fn unit_similarity<T: Real>(cos: T) -> T {
    (cos + T::one()) * real(0.5)
}

/// Deterministic embedding space of a fixed dimension.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace {
    dim: usize,
}

impl EmbeddingSpace {
    pub const DEFAULT_DIM: usize = 16;

    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "embedding dimension must be at least 2");
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn gaussian<T: Real>(&self, rng: &mut ChaCha8Rng) -> Vec<T> {
        (0..self.dim)
            .map(|_| real(rng.sample::<f64, _>(StandardNormal)))
            .collect()
    }

    /// Fixed unit vector for a token; identical for every scene and episode.
    pub fn token_vector<T: Real>(&self, token: &str) -> Vec<T> {
        let mut rng = rng_from(&[TOKEN_STREAM, fnv1a64(token.as_bytes())]);
        let mut v = self.gaussian(&mut rng);
        normalize(&mut v);
        v
    }

    fn weighted_sum<T: Real>(&self, category: &str, attributes: &[String]) -> Vec<T> {
        let mut v: Vec<T> = self.token_vector(category);
        for attr in attributes {
            let a: Vec<T> = self.token_vector(attr);
            let w: T = real(ATTRIBUTE_WEIGHT);
            for (x, y) in v.iter_mut().zip(&a) {
                *x = *x + w * *y;
            }
        }
        v
    }

    /// Ground-truth embedding of a scene object (category + attributes +
    /// small per-instance jitter).
    pub fn object_embedding<T: Real>(
        &self,
        category: &str,
        attributes: &[String],
        embedding_seed: u64,
    ) -> Vec<T> {
        let mut v = self.weighted_sum::<T>(category, attributes);
        let mut rng = rng_from(&[embedding_seed, 0x6f62_6a65_6374]);
        let jitter = self.gaussian::<T>(&mut rng);
        let w: T = real(JITTER_WEIGHT);
        for (x, j) in v.iter_mut().zip(&jitter) {
            *x = *x + w * *j;
        }
        normalize(&mut v);
        v
    }

    /// Embedding of a query's main goal (no jitter).
    pub fn query_embedding<T: Real>(&self, category: &str, attributes: &[String]) -> Vec<T> {
        let mut v = self.weighted_sum::<T>(category, attributes);
        normalize(&mut v);
        v
    }
}

/// Rotate unit vector `e` by `angle` radians inside the 2-plane spanned by
/// `e` and a seeded random direction. Preserves unit norm; the cosine between
/// input and output is exactly `cos(angle)`.
pub fn rotate_in_random_plane<T: Real>(e: &[T], angle: T, rng: &mut ChaCha8Rng) -> Vec<T> {
    if angle == T::zero() {
        return e.to_vec();
    }
    let space = EmbeddingSpace::new(e.len());
    // Orthonormalize a random direction against e; redraw on degeneracy.
    let mut u;
    loop {
        let w: Vec<T> = space.gaussian(rng);
        let proj = dot(&w, e);
        u = w
            .iter()
            .zip(e)
            .map(|(&wi, &ei)| wi - proj * ei)
            .collect::<Vec<T>>();
        if normalize(&mut u) {
            break;
        }
    }
    let (s, c) = angle.sin_cos();
    e.iter().zip(&u).map(|(&ei, &ui)| c * ei + s * ui).collect()
}
