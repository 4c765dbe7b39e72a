//! Scoring mask trees on disk and running fusion programs over datasets.

use crate::dataset::{FrameFiles, VideoEntry};
use crate::error::{Error, Result};
use crate::io;
use crate::mask::BinaryMask;
use crate::metrics::{ConfusionCounts, EvalPlanes, ShadowPolicy};
use crate::tree::SolutionTree;

/// Checks that `files` covers every temporal-ROI frame of `video`.
pub fn check_coverage(video: &VideoEntry, files: &FrameFiles, what: &str) -> Result<()> {
    let missing: Vec<usize> = video.roi_frames().filter(|t| !files.contains_key(t)).collect();
    if let Some(first) = missing.first() {
        return Err(Error::Dataset(format!(
            "{what} for {} is missing {} of {} ROI frames (first {first})",
            video.key(),
            missing.len(),
            video.roi_len()
        )));
    }
    Ok(())
}

/// Confusion counts of each prediction set, summed over the video's
/// temporal ROI. Ground truth is read once per frame.
pub fn video_counts(video: &VideoEntry, preds: &[&FrameFiles]) -> Result<Vec<ConfusionCounts>> {
    let roi = video.roi_mask.as_ref().map(io::read_mask).transpose()?;
    let mut out = vec![ConfusionCounts::default(); preds.len()];
    for t in video.roi_frames() {
        let mut gt = io::read_groundtruth(&video.groundtruth[&t])?;
        if let Some(roi) = &roi {
            gt.apply_roi(roi)?;
        }
        let planes = EvalPlanes::new(&gt, ShadowPolicy::Negative);
        for (acc, files) in out.iter_mut().zip(preds) {
            let path = files.get(&t).ok_or_else(|| {
                Error::Dataset(format!("{}: no prediction for frame {t}", video.key()))
            })?;
            let mask = io::read_mask(path)?;
            *acc += planes.count(&mask).map_err(|e| {
                Error::Dataset(format!("{} frame {t} ({}): {e}", video.key(), path.display()))
            })?;
        }
    }
    Ok(out)
}

/// Evaluates `tree` on every temporal-ROI frame of `video`, feeding it the
/// masks of the named pool algorithms in order.
pub fn apply_tree<'a>(
    tree: &'a SolutionTree,
    video: &'a VideoEntry,
    pool: &[String],
) -> Result<impl Iterator<Item = Result<(usize, BinaryMask)>> + 'a> {
    tree.validate_terminals(pool.len())?;
    let files: Vec<&FrameFiles> = pool
        .iter()
        .map(|alg| {
            video.pool.get(alg).ok_or_else(|| {
                Error::Dataset(format!("{}: no masks for pool algorithm {alg}", video.key()))
            })
        })
        .collect::<Result<_>>()?;
    Ok(video.roi_frames().map(move |t| {
        let inputs: Vec<BinaryMask> = files.iter().map(|f| io::read_mask(&f[&t])).collect::<Result<_>>()?;
        let out = tree
            .evaluate(&inputs)
            .map_err(|e| Error::Dataset(format!("{} frame {t}: {e}", video.key())))?;
        Ok((t, out))
    }))
}
