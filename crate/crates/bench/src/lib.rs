//! Input generators shared by the criterion benches.

use rand::Rng;
use sizebal_core::seed;

/// `n_blobs` Gaussian-ish blobs of `per_blob` points spread over a 100 m square.
pub fn blob_cloud(n_blobs: usize, per_blob: usize, seed_value: u64) -> Vec<[f64; 3]> {
    let mut rng = seed::rng_from(seed_value);
    let mut out = Vec::with_capacity(n_blobs * per_blob);
    for _ in 0..n_blobs {
        let c = [
            rng.random_range(0.0..100.0),
            rng.random_range(0.0..100.0),
            1.0,
        ];
        for _ in 0..per_blob {
            out.push([
                c[0] + rng.random_range(-1.0..1.0),
                c[1] + rng.random_range(-1.0..1.0),
                c[2] + rng.random_range(-0.8..0.8),
            ]);
        }
    }
    out
}

/// Random probability rows (`n` x `classes`), row-major.
pub fn random_rows(n: usize, classes: usize, seed_value: u64) -> Vec<f32> {
    let mut rng = seed::rng_from(seed_value);
    let mut out = Vec::with_capacity(n * classes);
    for _ in 0..n {
        let raw: Vec<f32> = (0..classes)
            .map(|_| rng.random_range(0.01f32..1.0))
            .collect();
        let s: f32 = raw.iter().sum();
        out.extend(raw.iter().map(|v| v / s));
    }
    out
}
