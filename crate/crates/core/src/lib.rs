//! Genetic-programming fusion of binary change-detection masks.
//!
//! A pool of change detectors each produce one foreground mask per frame.
//! This crate evolves small programs over those masks (morphology, median
//! filtering, pixelwise logic, majority vote) whose output beats the pool
//! under CDNET-style rank scoring, and provides the scoring harness itself.

pub mod dataset;
pub mod detectors;
pub mod engine;
pub mod error;
pub mod evaluate;
pub mod fitness;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod morph;
pub mod synth;
pub mod training;
pub mod tree;

pub use dataset::{DatasetIndex, FrameBundle, VideoEntry};
pub use detectors::FrameSequence;
pub use engine::{EvolveOutcome, GpConfig, RunHistory};
pub use error::{Error, Result};
pub use fitness::{EvaluationContext, FitnessReport, Granularity, ProducerMeasures};
pub use mask::{BinaryMask, GrayFrame, GroundTruthFrame, Label};
pub use metrics::{ConfusionCounts, Measure, MetricVector, Orientation};
pub use synth::{CorruptionProfile, SceneSpec};
pub use training::TrainingSet;
pub use tree::{Node, Op, SolutionTree, TreeStats};
