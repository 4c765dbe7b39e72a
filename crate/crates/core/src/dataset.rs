//! CDNET-layout dataset indexing and aligned frame bundles.
//!
//! ```text
//! root/<category>/<video>/input/in000001.png
//! root/<category>/<video>/groundtruth/gt000001.png
//! root/<category>/<video>/temporalROI.txt      "first last"
//! root/<category>/<video>/ROI.png              optional spatial ROI
//! root/results/<algorithm>/<category>/<video>/bin000001.png
//! ```
//!
//! Frame files may be PGM or PNG. Input frames named `.jpg` are counted but
//! cannot be decoded.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io;
use crate::mask::{BinaryMask, GroundTruthFrame};

/// Directory under the dataset root holding per-algorithm mask trees.
pub const RESULTS_DIR: &str = "results";

const FRAME_EXTENSIONS: [&str; 3] = ["png", "pgm", "jpg"];

/// Indexed frame files of one directory, keyed by 1-based frame number.
pub type FrameFiles = BTreeMap<usize, PathBuf>;

#[derive(Clone, Debug, PartialEq)]
pub struct VideoEntry {
    pub category: String,
    pub name: String,
    pub dir: PathBuf,
    pub frame_count: usize,
    /// Inclusive 1-based range of evaluated frames.
    pub temporal_roi: (usize, usize),
    pub roi_mask: Option<PathBuf>,
    pub inputs: FrameFiles,
    pub groundtruth: FrameFiles,
    /// Mask files per pool algorithm found under `results/`.
    pub pool: BTreeMap<String, FrameFiles>,
}

impl VideoEntry {
    /// `category/video`.
    pub fn key(&self) -> String {
        format!("{}/{}", self.category, self.name)
    }

    pub fn roi_frames(&self) -> std::ops::RangeInclusive<usize> {
        self.temporal_roi.0..=self.temporal_roi.1
    }

    pub fn roi_len(&self) -> usize {
        self.temporal_roi.1 + 1 - self.temporal_roi.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Category {
    pub name: String,
    pub videos: Vec<VideoEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub categories: Vec<Category>,
    /// Algorithms with a mask tree under `results/`, sorted by name.
    pub algorithms: Vec<String>,
}

impl DatasetIndex {
    pub fn videos(&self) -> impl Iterator<Item = &VideoEntry> {
        self.categories.iter().flat_map(|c| c.videos.iter())
    }

    /// Looks a video up by its `category/video` key.
    pub fn video(&self, key: &str) -> Result<&VideoEntry> {
        self.videos()
            .find(|v| v.key() == key)
            .ok_or_else(|| Error::Dataset(format!("no video {key} in {}", self.root.display())))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameBundle {
    pub frame: usize,
    /// One mask per requested pool algorithm, in request order.
    pub pool: Vec<BinaryMask>,
    pub gt: GroundTruthFrame,
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                if !name.starts_with('.') {
                    out.push((name.to_string(), path));
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Lists `<prefix>NNNNNN.<ext>` files in `dir`. A missing directory is empty.
pub fn frame_files(dir: &Path, prefix: &str) -> Result<FrameFiles> {
    let mut out = FrameFiles::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let (Some(stem), Some(ext)) = (
            path.file_stem().and_then(|s| s.to_str()),
            path.extension().and_then(|s| s.to_str()),
        ) else {
            continue;
        };
        if !FRAME_EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()) {
            continue;
        }
        let Some(digits) = stem.strip_prefix(prefix) else {
            continue;
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        let Ok(n) = digits.parse::<usize>() else {
            continue;
        };
        // prefer decodable formats when several extensions share a number
        let keep = match out.get(&n) {
            Some(old) => old.extension().is_some_and(|e| e.eq_ignore_ascii_case("jpg")),
            None => true,
        };
        if keep {
            out.insert(n, path);
        }
    }
    Ok(out)
}

/// Parses `temporalROI.txt`: two whitespace-separated 1-based frame numbers.
pub fn parse_temporal_roi(text: &str) -> Result<(usize, usize)> {
    let nums: Vec<&str> = text.split_whitespace().collect();
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Dataset(format!("temporal ROI: {s:?} is not a frame number")))
    };
    match nums.as_slice() {
        [a, b] => Ok((parse(a)?, parse(b)?)),
        _ => Err(Error::Dataset(format!(
            "temporal ROI needs exactly two integers, got {:?}",
            text.trim()
        ))),
    }
}

fn scan_video(category: &str, name: &str, dir: &Path, results: &[(String, PathBuf)]) -> Result<VideoEntry> {
    let key = format!("{category}/{name}");
    let inputs = frame_files(&dir.join("input"), "in")?;
    let groundtruth = frame_files(&dir.join("groundtruth"), "gt")?;
    let frame_count = inputs
        .keys()
        .next_back()
        .copied()
        .max(groundtruth.keys().next_back().copied())
        .unwrap_or(0);
    if frame_count == 0 {
        return Err(Error::Dataset(format!("{key}: no input or ground-truth frames")));
    }
    let roi_path = dir.join("temporalROI.txt");
    let temporal_roi = if roi_path.exists() {
        let text = fs::read_to_string(&roi_path).map_err(|e| Error::io(&roi_path, e))?;
        parse_temporal_roi(&text).map_err(|e| Error::Dataset(format!("{key}: {e}")))?
    } else {
        (1, frame_count)
    };
    let (first, last) = temporal_roi;
    if first < 1 || first > last || last > frame_count {
        return Err(Error::Dataset(format!(
            "{key}: temporal ROI [{first}, {last}] outside frames 1..={frame_count}"
        )));
    }
    if let Some(t) = (first..=last).find(|t| !groundtruth.contains_key(t)) {
        return Err(Error::Dataset(format!("{key}: missing ground truth for frame {t}")));
    }
    let roi_mask = ["ROI.png", "ROI.pgm"].iter().map(|f| dir.join(f)).find(|p| p.is_file());

    let mut pool = BTreeMap::new();
    for (alg, alg_dir) in results {
        let vdir = alg_dir.join(category).join(name);
        if !vdir.is_dir() {
            continue;
        }
        let masks = frame_files(&vdir, "bin")?;
        if let Some(t) = (first..=last).find(|t| !masks.contains_key(t)) {
            return Err(Error::Dataset(format!(
                "{key}: algorithm {alg} has no mask for frame {t} ({} of {} ROI frames present)",
                (first..=last).filter(|t| masks.contains_key(t)).count(),
                last + 1 - first
            )));
        }
        pool.insert(alg.clone(), masks);
    }
    Ok(VideoEntry {
        category: category.to_string(),
        name: name.to_string(),
        dir: dir.to_path_buf(),
        frame_count,
        temporal_roi,
        roi_mask,
        inputs,
        groundtruth,
        pool,
    })
}

/// Indexes a CDNET-layout tree without reading any image data.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<DatasetIndex> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::Dataset(format!("dataset root {} is not a directory", root.display())));
    }
    let results_dir = root.join(RESULTS_DIR);
    let results = if results_dir.is_dir() {
        sorted_subdirs(&results_dir)?
    } else {
        Vec::new()
    };
    let mut categories = Vec::new();
    for (cat, cat_dir) in sorted_subdirs(root)? {
        if cat == RESULTS_DIR {
            continue;
        }
        let mut videos = Vec::new();
        for (name, vdir) in sorted_subdirs(&cat_dir)? {
            if vdir.join("groundtruth").is_dir() || vdir.join("input").is_dir() {
                videos.push(scan_video(&cat, &name, &vdir, &results)?);
            }
        }
        if !videos.is_empty() {
            categories.push(Category { name: cat, videos });
        }
    }
    if categories.is_empty() {
        return Err(Error::Dataset(format!("no videos found under {}", root.display())));
    }
    Ok(DatasetIndex {
        root: root.to_path_buf(),
        categories,
        algorithms: results.into_iter().map(|(a, _)| a).collect(),
    })
}

/// Mask files of one video inside a CDNET results layout rooted at `dir`
/// (`dir/<category>/<video>/binNNNNNN.*`).
pub fn prediction_files(dir: &Path, video: &VideoEntry) -> Result<FrameFiles> {
    frame_files(&dir.join(&video.category).join(&video.name), "bin")
}

/// Streams the temporal-ROI frames of `video` with the pool masks of the
/// named algorithms, in that order. The spatial ROI, when present, is
/// applied to every ground-truth frame.
pub fn frame_bundles<'a>(
    video: &'a VideoEntry,
    pool: &[String],
) -> Result<impl Iterator<Item = Result<FrameBundle>> + 'a> {
    let files: Vec<&FrameFiles> = pool
        .iter()
        .map(|alg| {
            video.pool.get(alg).ok_or_else(|| {
                Error::Dataset(format!("{}: no masks for pool algorithm {alg}", video.key()))
            })
        })
        .collect::<Result<_>>()?;
    let roi = video.roi_mask.as_ref().map(io::read_mask).transpose()?;
    Ok(video.roi_frames().map(move |t| {
        let mut gt = io::read_groundtruth(&video.groundtruth[&t])?;
        if let Some(roi) = &roi {
            gt.apply_roi(roi)
                .map_err(|e| Error::Dataset(format!("{} frame {t}: ROI {e}", video.key())))?;
        }
        let pool = files
            .iter()
            .map(|f| {
                let m = io::read_mask(&f[&t])?;
                if m.dims() != gt.dims() {
                    return Err(Error::Dataset(format!(
                        "{} frame {t}: mask {} vs ground truth {}x{}",
                        video.key(),
                        format_dims(m.dims()),
                        gt.width(),
                        gt.height()
                    )));
                }
                Ok(m)
            })
            .collect::<Result<_>>()?;
        Ok(FrameBundle { frame: t, pool, gt })
    }))
}

fn format_dims((w, h): (usize, usize)) -> String {
    format!("{w}x{h}")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Training/test division by `category/video` key. Without an override the
/// training set is, per category, the video with the fewest ROI frames (ties
/// by name); with one, exactly the listed videos.
pub fn training_split(index: &DatasetIndex, overrides: Option<&[String]>) -> Result<Split> {
    let train: Vec<String> = match overrides {
        Some(list) => {
            for key in list {
                index.video(key)?;
            }
            list.to_vec()
        }
        None => index
            .categories
            .iter()
            .filter_map(|c| {
                c.videos
                    .iter()
                    .min_by(|a, b| a.roi_len().cmp(&b.roi_len()).then_with(|| a.name.cmp(&b.name)))
                    .map(VideoEntry::key)
            })
            .collect(),
    };
    let test = index.videos().map(VideoEntry::key).filter(|k| !train.contains(k)).collect();
    Ok(Split { train, test })
}

/// Parses a split override list: one `category/video` per line, `#`
/// comments and blank lines ignored.
pub fn parse_split_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// Conventional file name of frame `t` with the given prefix.
pub fn frame_name(prefix: &str, t: usize, ext: &str) -> String {
    format!("{prefix}{t:06}.{ext}")
}
