use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cdfuse_core::dataset::{prediction_files, scan_dataset, training_split};
use cdfuse_core::engine::{evolve, GpConfig};
use cdfuse_core::evaluate::{apply_tree, video_counts};
use cdfuse_core::synth::{demo_task, DemoOptions};
use cdfuse_core::{io, SolutionTree, TrainingSet};

#[test]
fn written_demo_matches_in_memory_task() {
    let task = demo_task(&DemoOptions::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    task.write(dir.path()).unwrap();

    let index = scan_dataset(dir.path()).unwrap();
    assert_eq!(index.algorithms, task.pool_names);
    let split = training_split(&index, None).unwrap();
    assert_eq!(split.train, task.train_keys());
    assert_eq!(split.test, task.test_keys());

    let disk = TrainingSet::from_dataset(&index, &split.train, &task.pool_names, 1).unwrap();
    let memory = task.training_set(&task.train_keys()).unwrap();
    for text in ["A0", "(MV A0 A1 A2)", "(OR (ERO A1) (AND A0 A2))", "(MF A2)"] {
        let tree: SolutionTree = text.parse().unwrap();
        assert_eq!(disk.counts(&tree).unwrap(), memory.counts(&tree).unwrap(), "{text}");
    }

    let strided = TrainingSet::from_dataset(&index, &split.train, &task.pool_names, 4).unwrap();
    let expected: usize = disk.videos().iter().map(|v| v.frames.len().div_ceil(4)).sum();
    assert_eq!(strided.frame_count(), expected);
}

#[test]
fn applied_masks_score_like_training_counts() {
    let task = demo_task(&DemoOptions::default(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    task.write(dir.path().join("ds")).unwrap();
    let index = scan_dataset(dir.path().join("ds")).unwrap();
    let tree: SolutionTree = "(OR (DIL A2) A0)".parse().unwrap();
    let out = dir.path().join("out");
    for v in index.videos() {
        std::fs::create_dir_all(out.join(&v.category).join(&v.name)).unwrap();
        for item in apply_tree(&tree, v, &task.pool_names).unwrap() {
            let (t, m) = item.unwrap();
            io::write_mask(&m, out.join(&v.category).join(&v.name).join(format!("bin{t:06}.png"))).unwrap();
        }
    }
    let keys: Vec<String> = index.videos().map(|v| v.key()).collect();
    let expected = task.training_set(&keys).unwrap().counts(&tree).unwrap();
    for (v, want) in index.videos().zip(expected) {
        let files = prediction_files(&out, v).unwrap();
        assert_eq!(video_counts(v, &[&files]).unwrap(), vec![want]);
    }
}

#[test]
fn short_run_improves_on_pool() {
    let task = demo_task(&DemoOptions::default(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let data = task.training_set(&task.train_keys()).unwrap();
    let ctx = data.context().unwrap();
    let cfg = GpConfig {
        population_size: 20,
        max_generations: 10,
        seed: 5,
        ..GpConfig::default()
    };
    let out = evolve(&cfg, &ctx, &data, 2).unwrap();
    assert_eq!(out.history.records.len(), 11);
    let pool_best = (0..3)
        .map(|k| cdfuse_core::fitness::fitness(&data.measure(&SolutionTree::terminal(k)).unwrap(), &SolutionTree::terminal(k), &ctx).unwrap().f)
        .fold(f64::INFINITY, f64::min);
    assert!(out.report.f <= pool_best);
}
