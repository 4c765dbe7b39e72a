//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cdfuse_core::synth::{demo_task, DemoOptions};
use cdfuse_core::{BinaryMask, TrainingSet};

/// A mask with each pixel set independently with probability `density`.
pub fn random_mask(width: usize, height: usize, density: f64, seed: u64) -> BinaryMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BinaryMask::from_fn(width, height, |_, _| rng.gen_bool(density)).expect("non-empty dimensions")
}

/// Training videos of the default demo task.
pub fn demo_training_set(seed: u64) -> TrainingSet {
    let task = demo_task(&DemoOptions::default(), &mut ChaCha8Rng::seed_from_u64(seed)).expect("demo task");
    task.training_set(&task.train_keys()).expect("training set")
}
