//! Synthetic videos with exact ground truth, and detector-like mask streams
//! derived from ground truth by controlled corruption.
//!
//! Scene files are flat `key = value` text:
//!
//! ```text
//! width = 64
//! height = 48
//! frames = 30
//! background = 100
//! noise_sigma = 6
//! # object = w h x0 y0 vx vy intensity   (position at frame t: x0 + vx (t - 1))
//! object = 12 10 5 8 1.5 0.5 200
//! ```

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{frame_name, RESULTS_DIR};
use crate::error::{Error, Result};
use crate::io;
use crate::mask::{BinaryMask, GrayFrame, GroundTruthFrame};
use crate::morph;
use crate::training::{TrainingFrame, TrainingSet, TrainingVideo};

#[derive(Clone, Debug, PartialEq)]
pub struct MovingRect {
    pub width: usize,
    pub height: usize,
    pub x0: f64,
    pub y0: f64,
    pub vx: f64,
    pub vy: f64,
    pub intensity: u8,
}

impl MovingRect {
    /// Top-left corner at 1-based frame `t`, rounded to the pixel grid.
    pub fn corner_at(&self, t: usize) -> (i64, i64) {
        let dt = (t - 1) as f64;
        (
            (self.x0 + self.vx * dt).round() as i64,
            (self.y0 + self.vy * dt).round() as i64,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub background: u8,
    pub noise_sigma: f64,
    pub objects: Vec<MovingRect>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config(format!(
                "scene size {}x{} is degenerate",
                self.width, self.height
            )));
        }
        if self.frames < 2 {
            return Err(Error::Config(format!("scene needs >= 2 frames, got {}", self.frames)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.width == 0 || o.height == 0 {
                return Err(Error::Config(format!("object {i} has zero extent")));
            }
            if ![o.x0, o.y0, o.vx, o.vy].iter().all(|v| v.is_finite()) {
                return Err(Error::Config(format!("object {i} has a non-finite trajectory")));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = SceneSpec {
            width: 0,
            height: 0,
            frames: 0,
            background: 0,
            noise_sigma: 0.0,
            objects: Vec::new(),
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config(format!("scene line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            fn num<T: std::str::FromStr>(v: &str, key: &str) -> std::result::Result<T, String> {
                v.parse().map_err(|_| format!("bad value {v:?} for {key}"))
            }
            match key {
                "width" => spec.width = num(value, key).map_err(err)?,
                "height" => spec.height = num(value, key).map_err(err)?,
                "frames" => spec.frames = num(value, key).map_err(err)?,
                "background" => spec.background = num(value, key).map_err(err)?,
                "noise_sigma" => spec.noise_sigma = num(value, key).map_err(err)?,
                "object" => {
                    let f: Vec<&str> = value.split_whitespace().collect();
                    if f.len() != 7 {
                        return Err(err(format!("object needs 7 fields, got {}", f.len())));
                    }
                    spec.objects.push(MovingRect {
                        width: num(f[0], "object width").map_err(err)?,
                        height: num(f[1], "object height").map_err(err)?,
                        x0: num(f[2], "object x0").map_err(err)?,
                        y0: num(f[3], "object y0").map_err(err)?,
                        vx: num(f[4], "object vx").map_err(err)?,
                        vy: num(f[5], "object vy").map_err(err)?,
                        intensity: num(f[6], "object intensity").map_err(err)?,
                    });
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "width = {}\nheight = {}\nframes = {}\nbackground = {}\nnoise_sigma = {}\n",
            self.width, self.height, self.frames, self.background, self.noise_sigma
        );
        for o in &self.objects {
            s += &format!(
                "object = {} {} {} {} {} {} {}\n",
                o.width, o.height, o.x0, o.y0, o.vx, o.vy, o.intensity
            );
        }
        s
    }

    /// A scene of `objects` rectangles moving in straight lines between two
    /// random in-frame positions, with intensities well apart from the
    /// background.
    pub fn random(width: usize, height: usize, frames: usize, objects: usize, rng: &mut impl Rng) -> Self {
        let background = rng.gen_range(60..=120u8);
        let objects = (0..objects)
            .map(|_| {
                let w = rng.gen_range(width / 8..=width / 4).max(2);
                let h = rng.gen_range(height / 8..=height / 4).max(2);
                let pos = |rng: &mut dyn rand::RngCore, extent: usize, size: usize| {
                    rng.gen_range(0..=(extent.saturating_sub(size))) as f64
                };
                let (x0, y0) = (pos(rng, width, w), pos(rng, height, h));
                let (x1, y1) = (pos(rng, width, w), pos(rng, height, h));
                let span = (frames.max(2) - 1) as f64;
                let intensity = if rng.gen_bool(0.5) {
                    background.saturating_add(rng.gen_range(60..=100))
                } else {
                    background.saturating_sub(rng.gen_range(45..=55))
                };
                MovingRect {
                    width: w,
                    height: h,
                    x0,
                    y0,
                    vx: (x1 - x0) / span,
                    vy: (y1 - y0) / span,
                    intensity,
                }
            })
            .collect();
        SceneSpec {
            width,
            height,
            frames,
            background,
            noise_sigma: 6.0,
            objects,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticVideo {
    pub frames: Vec<GrayFrame>,
    pub groundtruth: Vec<GroundTruthFrame>,
}

impl SyntheticVideo {
    pub fn gt_masks(&self) -> Vec<BinaryMask> {
        self.groundtruth.iter().map(GroundTruthFrame::positives).collect()
    }
}

/// Renders the scene: objects are painted in order (later ones on top) over
/// the background, then N(0, sigma) noise is added and clamped. Every object
/// pixel is POSITIVE in the ground truth.
pub fn render_scene(spec: &SceneSpec, rng: &mut impl Rng) -> Result<SyntheticVideo> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let noise = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };
    let mut frames = Vec::with_capacity(spec.frames);
    let mut groundtruth = Vec::with_capacity(spec.frames);
    for t in 1..=spec.frames {
        let mut clean = vec![spec.background; w * h];
        let mut fg = BinaryMask::zeros(w, h)?;
        for o in &spec.objects {
            let (cx, cy) = o.corner_at(t);
            let xs = cx.max(0)..(cx + o.width as i64).min(w as i64);
            let ys = cy.max(0)..(cy + o.height as i64).min(h as i64);
            for y in ys {
                for x in xs.clone() {
                    clean[y as usize * w + x as usize] = o.intensity;
                    fg.set(x as usize, y as usize, true);
                }
            }
        }
        if let Some(n) = &noise {
            for v in &mut clean {
                *v = (f64::from(*v) + n.sample(rng)).round().clamp(0.0, 255.0) as u8;
            }
        }
        frames.push(GrayFrame::new(w, h, clean)?);
        groundtruth.push(GroundTruthFrame::from_mask(&fg));
    }
    Ok(SyntheticVideo { frames, groundtruth })
}

/// Writes `input/inNNNNNN.pgm`, `groundtruth/gtNNNNNN.pgm` and a
/// `temporalROI.txt` spanning every frame.
pub fn write_video(video: &SyntheticVideo, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let (input, gt) = (dir.join("input"), dir.join("groundtruth"));
    for d in [&input, &gt] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    for (i, (f, g)) in video.frames.iter().zip(&video.groundtruth).enumerate() {
        io::write_gray(f, input.join(frame_name("in", i + 1, "pgm")))?;
        io::write_groundtruth(g, gt.join(frame_name("gt", i + 1, "pgm")))?;
    }
    let roi = dir.join("temporalROI.txt");
    fs::write(&roi, format!("1 {}\n", video.frames.len())).map_err(|e| Error::io(&roi, e))
}

pub fn synth_generate(spec: &SceneSpec, rng: &mut impl Rng, out: impl AsRef<Path>) -> Result<SyntheticVideo> {
    let video = render_scene(spec, rng)?;
    write_video(&video, out)?;
    Ok(video)
}

/// Systematic shape error applied before hole punching and flips.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ShapeBias {
    #[default]
    None,
    /// Repeated 3x3 dilation.
    Dilate(usize),
    /// Repeated 3x3 erosion.
    Erode(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CorruptionProfile {
    /// Probability that a foreground pixel is reported as background.
    pub flip_rate_fg: f64,
    /// Probability that a background pixel is reported as foreground.
    pub flip_rate_bg: f64,
    pub bias: ShapeBias,
    /// Probability per connected object of punching a hole in it.
    pub hole_rate: f64,
    /// Frames of delay; the first `lag` outputs are empty.
    pub lag: usize,
}

impl CorruptionProfile {
    /// Salt-and-pepper detector: misses 10% of object pixels, fires on 2%
    /// of background.
    pub const NOISY: Self = Self {
        flip_rate_fg: 0.10,
        flip_rate_bg: 0.02,
        bias: ShapeBias::None,
        hole_rate: 0.0,
        lag: 0,
    };
    /// Halo detector: objects grown by two pixels, sparse false alarms.
    pub const OVER_SEGMENTING: Self = Self {
        flip_rate_fg: 0.0,
        flip_rate_bg: 0.002,
        bias: ShapeBias::Dilate(2),
        hole_rate: 0.0,
        lag: 0,
    };
    /// Conservative detector: objects shrunk by one pixel, half of them
    /// holed, 5% of remaining object pixels missed.
    pub const UNDER_SEGMENTING: Self = Self {
        flip_rate_fg: 0.05,
        flip_rate_bg: 0.0,
        bias: ShapeBias::Erode(1),
        hole_rate: 0.5,
        lag: 0,
    };
    /// Output independent of the input.
    pub const PURE_NOISE: Self = Self {
        flip_rate_fg: 0.5,
        flip_rate_bg: 0.5,
        bias: ShapeBias::None,
        hole_rate: 0.0,
        lag: 0,
    };

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "noisy" => Ok(Self::NOISY),
            "over-segmenting" | "over" => Ok(Self::OVER_SEGMENTING),
            "under-segmenting" | "under" => Ok(Self::UNDER_SEGMENTING),
            "noise" | "pure-noise" => Ok(Self::PURE_NOISE),
            other => Err(Error::Config(format!(
                "unknown corruption preset {other:?} (noisy, over-segmenting, under-segmenting, pure-noise)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("flip_rate_fg", self.flip_rate_fg),
            ("flip_rate_bg", self.flip_rate_bg),
            ("hole_rate", self.hole_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// The 8-connected components of `m`, each as a list of pixel coordinates.
fn components(m: &BinaryMask) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = m.dims();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for start in 0..w * h {
        let (sx, sy) = (start % w, start / w);
        if seen[start] || !m.get(sx, sy) {
            continue;
        }
        seen[start] = true;
        let mut comp = Vec::new();
        let mut stack = vec![(sx, sy)];
        while let Some((x, y)) = stack.pop() {
            comp.push((x, y));
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let i = ny * w + nx;
                    if !seen[i] && m.get(nx, ny) {
                        seen[i] = true;
                        stack.push((nx, ny));
                    }
                }
            }
        }
        comp.sort_unstable_by_key(|&(x, y)| (y, x));
        out.push(comp);
    }
    out
}

/// Clears the centred half-size box of the component's bounding box.
fn punch_hole(m: &mut BinaryMask, comp: &[(usize, usize)]) {
    let (x0, x1) = comp.iter().fold((usize::MAX, 0), |(a, b), &(x, _)| (a.min(x), b.max(x)));
    let (y0, y1) = comp.iter().fold((usize::MAX, 0), |(a, b), &(_, y)| (a.min(y), b.max(y)));
    let (bw, bh) = (x1 - x0 + 1, y1 - y0 + 1);
    let (hw, hh) = (bw / 2, bh / 2);
    let (hx, hy) = (x0 + (bw - hw) / 2, y0 + (bh - hh) / 2);
    for &(x, y) in comp {
        if (hx..hx + hw).contains(&x) && (hy..hy + hh).contains(&y) {
            m.set(x, y, false);
        }
    }
}

/// Derives a detector-like stream from ground-truth foreground masks.
///
/// Output `t` is built from input `t - lag` (empty for `t < lag`) by, in
/// order: the shape bias, hole punching per connected object, and
/// independent per-pixel flips.
pub fn corrupt_detector(gt: &[BinaryMask], profile: &CorruptionProfile, rng: &mut impl Rng) -> Result<Vec<BinaryMask>> {
    profile.validate()?;
    let mut out = Vec::with_capacity(gt.len());
    for t in 0..gt.len() {
        let (w, h) = gt[t].dims();
        if t < profile.lag {
            out.push(BinaryMask::zeros(w, h)?);
            continue;
        }
        let mut m = gt[t - profile.lag].clone();
        match profile.bias {
            ShapeBias::None => {}
            ShapeBias::Dilate(k) => (0..k).for_each(|_| m = morph::dilate(&m)),
            ShapeBias::Erode(k) => (0..k).for_each(|_| m = morph::erode(&m)),
        }
        if profile.hole_rate > 0.0 {
            for comp in components(&m) {
                if rng.gen_bool(profile.hole_rate) {
                    punch_hole(&mut m, &comp);
                }
            }
        }
        if profile.flip_rate_fg > 0.0 || profile.flip_rate_bg > 0.0 {
            for y in 0..h {
                for x in 0..w {
                    let v = m.get(x, y);
                    let p = if v { profile.flip_rate_fg } else { profile.flip_rate_bg };
                    if p > 0.0 && rng.gen_bool(p) {
                        m.set(x, y, !v);
                    }
                }
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// One synthetic video together with derived pool detector streams.
#[derive(Clone, Debug)]
pub struct DemoVideo {
    pub category: String,
    pub name: String,
    pub video: SyntheticVideo,
    /// One mask stream per pool detector, aligned with the frames.
    pub pool: Vec<Vec<BinaryMask>>,
}

impl DemoVideo {
    pub fn key(&self) -> String {
        format!("{}/{}", self.category, self.name)
    }
}

/// A small synthetic change-detection benchmark: two categories of two
/// videos each. The first video of each category is shorter, so it is the
/// one the shortest-per-category rule picks for training.
#[derive(Clone, Debug)]
pub struct DemoTask {
    pub pool_names: Vec<String>,
    pub videos: Vec<DemoVideo>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoOptions {
    pub width: usize,
    pub height: usize,
    pub train_frames: usize,
    pub test_frames: usize,
    pub objects: usize,
    pub detectors: Vec<(String, CorruptionProfile)>,
}

impl Default for DemoOptions {
    fn default() -> Self {
        Self {
            width: 64,
            height: 48,
            train_frames: 24,
            test_frames: 32,
            objects: 3,
            detectors: vec![
                ("noisy".into(), CorruptionProfile::NOISY),
                ("over".into(), CorruptionProfile::OVER_SEGMENTING),
                ("under".into(), CorruptionProfile::UNDER_SEGMENTING),
            ],
        }
    }
}

impl DemoOptions {
    /// The default three detectors plus `k` pure-noise ones.
    pub fn with_noise_detectors(mut self, k: usize) -> Self {
        for i in 0..k {
            self.detectors.push((format!("noise{}", i + 1), CorruptionProfile::PURE_NOISE));
        }
        self
    }
}

pub fn demo_task(opts: &DemoOptions, rng: &mut impl Rng) -> Result<DemoTask> {
    let mut videos = Vec::new();
    for cat in ["alpha", "beta"] {
        for (name, frames) in [("short", opts.train_frames), ("long", opts.test_frames)] {
            let spec = SceneSpec::random(opts.width, opts.height, frames, opts.objects, rng);
            let video = render_scene(&spec, rng)?;
            let gt = video.gt_masks();
            let pool = opts
                .detectors
                .iter()
                .map(|(_, p)| corrupt_detector(&gt, p, rng))
                .collect::<Result<_>>()?;
            videos.push(DemoVideo {
                category: cat.to_string(),
                name: name.to_string(),
                video,
                pool,
            });
        }
    }
    Ok(DemoTask {
        pool_names: opts.detectors.iter().map(|(n, _)| n.clone()).collect(),
        videos,
    })
}

impl DemoTask {
    pub fn video(&self, key: &str) -> Result<&DemoVideo> {
        self.videos
            .iter()
            .find(|v| v.key() == key)
            .ok_or_else(|| Error::Dataset(format!("no demo video {key}")))
    }

    pub fn train_keys(&self) -> Vec<String> {
        self.videos.iter().filter(|v| v.name == "short").map(DemoVideo::key).collect()
    }

    pub fn test_keys(&self) -> Vec<String> {
        self.videos.iter().filter(|v| v.name != "short").map(DemoVideo::key).collect()
    }

    pub fn training_set(&self, keys: &[String]) -> Result<TrainingSet> {
        let videos = keys
            .iter()
            .map(|k| {
                let v = self.video(k)?;
                let frames = (0..v.video.frames.len())
                    .map(|t| {
                        let pool = v.pool.iter().map(|s| s[t].clone()).collect();
                        TrainingFrame::new(pool, &v.video.groundtruth[t])
                    })
                    .collect::<Result<_>>()?;
                Ok(TrainingVideo { name: k.clone(), frames })
            })
            .collect::<Result<_>>()?;
        TrainingSet::new(self.pool_names.clone(), videos)
    }

    /// Writes the task in CDNET layout, pool streams under
    /// `results/<detector>/`.
    pub fn write(&self, root: impl AsRef<Path>) -> Result<()> {
        let root = root.as_ref();
        for v in &self.videos {
            write_video(&v.video, root.join(&v.category).join(&v.name))?;
            for (name, stream) in self.pool_names.iter().zip(&v.pool) {
                let dir = root.join(RESULTS_DIR).join(name).join(&v.category).join(&v.name);
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                for (t, m) in stream.iter().enumerate() {
                    io::write_mask(m, dir.join(frame_name("bin", t + 1, "pgm")))?;
                }
            }
        }
        Ok(())
    }
}
