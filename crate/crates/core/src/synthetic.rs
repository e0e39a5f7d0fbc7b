//! Seeded synthetic datasets for tests, benches and smoke runs.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, Matrix};
use crate::seed;

/// Gaussian blobs: `n_classes` centres drawn uniformly from `[-5, 5]^d`, then
/// `per_class` samples around each with standard deviation `spread`.
/// Samples are interleaved by class.
pub fn blobs(
    per_class: usize,
    n_classes: usize,
    n_features: usize,
    spread: f32,
    seed: u64,
) -> Dataset {
    let mut rng = seed::rng(seed);
    let centres: Vec<Vec<f32>> = (0..n_classes)
        .map(|_| {
            (0..n_features)
                .map(|_| rng.random_range(-5.0f32..5.0))
                .collect()
        })
        .collect();
    let noise = Normal::new(0.0f32, spread.max(f32::MIN_POSITIVE)).expect("finite spread");
    let n = per_class * n_classes;
    let mut data = Vec::with_capacity(n * n_features);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..per_class {
        for (c, centre) in centres.iter().enumerate() {
            data.extend(centre.iter().map(|&m| m + noise.sample(&mut rng)));
            labels.push(c as u16);
        }
    }
    let features = Matrix::new(n, n_features, data).expect("consistent shape");
    Dataset::new(features, labels, n_classes).expect("valid synthetic dataset")
}

/// Byte-valued images: each class has a random prototype in `0..=255`, and each
/// sample flips roughly `noise` of its pixels to random values.
pub fn byte_images(
    per_class: usize,
    n_classes: usize,
    n_pixels: usize,
    noise: f64,
    seed: u64,
) -> Dataset {
    let mut rng = seed::rng(seed);
    let prototypes: Vec<Vec<u8>> = (0..n_classes)
        .map(|_| {
            (0..n_pixels)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        rng.random()
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect();
    let n = per_class * n_classes;
    let mut data = Vec::with_capacity(n * n_pixels);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..per_class {
        for (c, proto) in prototypes.iter().enumerate() {
            data.extend(proto.iter().map(|&p| {
                if rng.random_bool(noise) {
                    rng.random::<u8>() as f32
                } else {
                    p as f32
                }
            }));
            labels.push(c as u16);
        }
    }
    let features = Matrix::new(n, n_pixels, data).expect("consistent shape");
    Dataset::new(features, labels, n_classes).expect("valid synthetic dataset")
}

/// Uniform random vectors in `[lo, hi)`.
pub fn uniform(n: usize, n_features: usize, lo: f32, hi: f32, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = seed::rng(seed);
    (0..n)
        .map(|_| (0..n_features).map(|_| rng.random_range(lo..hi)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_determinism() {
        let a = blobs(5, 3, 4, 1.0, 1);
        assert_eq!((a.n_samples(), a.n_features(), a.n_classes()), (15, 4, 3));
        assert_eq!(a, blobs(5, 3, 4, 1.0, 1));
        let b = byte_images(4, 2, 16, 0.1, 3);
        assert!(b
            .features()
            .as_slice()
            .iter()
            .all(|&v| (0.0..=255.0).contains(&v)));
    }
}
