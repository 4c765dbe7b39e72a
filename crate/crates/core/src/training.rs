//! In-memory training data: the pool masks and ground truth of the
//! training videos, and scoring of candidate programs against them.

use crate::dataset::{self, DatasetIndex};
use crate::error::{Error, Result};
use crate::fitness::{EvaluationContext, ProducerMeasures};
use crate::mask::{BinaryMask, GroundTruthFrame};
use crate::metrics::{ConfusionCounts, EvalPlanes, ShadowPolicy};
use crate::tree::SolutionTree;

#[derive(Clone, Debug)]
pub struct TrainingFrame {
    pub pool: Vec<BinaryMask>,
    pub planes: EvalPlanes,
}

impl TrainingFrame {
    pub fn new(pool: Vec<BinaryMask>, gt: &GroundTruthFrame) -> Result<Self> {
        for m in &pool {
            if m.dims() != gt.dims() {
                return Err(Error::dims(m.dims(), gt.dims()));
            }
        }
        Ok(Self {
            pool,
            planes: EvalPlanes::new(gt, ShadowPolicy::Negative),
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrainingVideo {
    pub name: String,
    pub frames: Vec<TrainingFrame>,
}

#[derive(Clone, Debug)]
pub struct TrainingSet {
    pool_names: Vec<String>,
    videos: Vec<TrainingVideo>,
}

impl TrainingSet {
    pub fn new(pool_names: Vec<String>, videos: Vec<TrainingVideo>) -> Result<Self> {
        if pool_names.is_empty() {
            return Err(Error::Config("the algorithm pool is empty".into()));
        }
        if videos.is_empty() {
            return Err(Error::Config("no training videos".into()));
        }
        for v in &videos {
            if v.frames.is_empty() {
                return Err(Error::Dataset(format!("training video {} has no frames", v.name)));
            }
            if let Some(f) = v.frames.iter().find(|f| f.pool.len() != pool_names.len()) {
                return Err(Error::Dataset(format!(
                    "training video {}: {} pool masks per frame, expected {}",
                    v.name,
                    f.pool.len(),
                    pool_names.len()
                )));
            }
        }
        Ok(Self { pool_names, videos })
    }

    /// Loads every `stride`-th temporal-ROI frame of the named videos.
    pub fn from_dataset(index: &DatasetIndex, videos: &[String], pool: &[String], stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Config("frame stride must be >= 1".into()));
        }
        let mut out = Vec::with_capacity(videos.len());
        for key in videos {
            let entry = index.video(key)?;
            let frames = dataset::frame_bundles(entry, pool)?
                .step_by(stride)
                .map(|b| {
                    let b = b?;
                    TrainingFrame::new(b.pool, &b.gt)
                })
                .collect::<Result<_>>()?;
            out.push(TrainingVideo {
                name: key.clone(),
                frames,
            });
        }
        Self::new(pool.to_vec(), out)
    }

    pub fn pool_size(&self) -> usize {
        self.pool_names.len()
    }

    pub fn pool_names(&self) -> &[String] {
        &self.pool_names
    }

    pub fn videos(&self) -> &[TrainingVideo] {
        &self.videos
    }

    pub fn frame_count(&self) -> usize {
        self.videos.iter().map(|v| v.frames.len()).sum()
    }

    /// Confusion counts of `tree` accumulated per training video.
    pub fn counts(&self, tree: &SolutionTree) -> Result<Vec<ConfusionCounts>> {
        tree.validate_terminals(self.pool_size())?;
        self.videos
            .iter()
            .map(|v| {
                v.frames.iter().try_fold(ConfusionCounts::default(), |acc, f| {
                    Ok(acc + f.planes.count(&tree.evaluate(&f.pool)?)?)
                })
            })
            .collect()
    }

    pub fn measure(&self, tree: &SolutionTree) -> Result<ProducerMeasures> {
        Ok(ProducerMeasures::from_counts(&self.counts(tree)?))
    }

    /// Fitness context whose pool entries are the bare terminals.
    pub fn context(&self) -> Result<EvaluationContext> {
        let pool = (0..self.pool_size())
            .map(|k| self.measure(&SolutionTree::terminal(k)))
            .collect::<Result<_>>()?;
        EvaluationContext::new(
            self.pool_names.clone(),
            self.videos.iter().map(|v| v.name.clone()).collect(),
            pool,
        )
    }
}
