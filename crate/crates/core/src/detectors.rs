//! Simple built-in change detectors and the majority-vote fusion baseline.
//!
//! Every detector is causal: the mask for frame `t` only looks at frames up
//! to `t`.

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, GrayFrame};
use crate::morph;

/// An ordered run of grayscale frames sharing one size.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    frames: Vec<GrayFrame>,
}

impl FrameSequence {
    pub fn new(frames: Vec<GrayFrame>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::Config(format!(
                "a frame sequence needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let dims = frames[0].dims();
        if let Some(bad) = frames.iter().find(|f| f.dims() != dims) {
            return Err(Error::dims(dims, bad.dims()));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[GrayFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }
}

fn mask_where(dims: (usize, usize), mut pred: impl FnMut(usize) -> bool) -> BinaryMask {
    let (w, h) = dims;
    let mut m = BinaryMask::zeros(w, h).expect("validated dims");
    for i in 0..w * h {
        if pred(i) {
            m.set(i % w, i / w, true);
        }
    }
    m
}

/// Foreground where consecutive frames differ by more than `threshold`.
/// The first frame has no predecessor and comes out all background.
pub fn frame_difference(seq: &FrameSequence, threshold: u8) -> Vec<BinaryMask> {
    let dims = seq.dims();
    let mut out = Vec::with_capacity(seq.len());
    out.push(BinaryMask::zeros(dims.0, dims.1).expect("validated dims"));
    for pair in seq.frames.windows(2) {
        let (prev, cur) = (pair[0].data(), pair[1].data());
        out.push(mask_where(dims, |i| cur[i].abs_diff(prev[i]) > threshold));
    }
    out
}

/// Median-of-recent-frames background model. The background at frame `t`
/// is the per-pixel median of the last `min(window, t)` frames including
/// `t` itself; an even count takes the mean of the two middle values.
pub fn median_background(seq: &FrameSequence, window: usize, threshold: u8) -> Result<Vec<BinaryMask>> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::Config(format!(
            "median window must be odd and >= 3, got {window}"
        )));
    }
    let dims = seq.dims();
    let n_pix = dims.0 * dims.1;
    let mut out = Vec::with_capacity(seq.len());
    let mut buf = Vec::with_capacity(window);
    for t in 0..seq.len() {
        let lo = (t + 1).saturating_sub(window);
        let recent = &seq.frames[lo..=t];
        let cur = seq.frames[t].data();
        let mut mask = BinaryMask::zeros(dims.0, dims.1)?;
        for i in 0..n_pix {
            buf.clear();
            buf.extend(recent.iter().map(|f| f.data()[i]));
            buf.sort_unstable();
            let k = buf.len();
            let median = if k % 2 == 1 {
                f64::from(buf[k / 2])
            } else {
                (f64::from(buf[k / 2 - 1]) + f64::from(buf[k / 2])) / 2.0
            };
            if (f64::from(cur[i]) - median).abs() > f64::from(threshold) {
                mask.set(i % dims.0, i / dims.0, true);
            }
        }
        out.push(mask);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianParams {
    /// Learning rate, strictly between 0 and 1.
    pub alpha: f64,
    /// Deviation multiplier for the foreground test.
    pub k: f64,
    pub initial_var: f64,
    /// Variance floor inside the square root.
    pub epsilon: f64,
}

impl Default for GaussianParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            k: 2.5,
            initial_var: 100.0,
            epsilon: 1e-6,
        }
    }
}

/// Single running Gaussian per pixel.
///
/// Each frame is classified against the model as it stood before the frame
/// arrived (`|x - mean| > k * sqrt(var + eps)`), then the model is updated:
/// `mean' = (1 - a) mean + a x`, `var' = (1 - a) var + a (x - mean)^2`.
/// The model starts from frame 1 with `initial_var`; frame 1 is background.
pub fn running_gaussian(seq: &FrameSequence, params: GaussianParams) -> Result<Vec<BinaryMask>> {
    let GaussianParams {
        alpha,
        k,
        initial_var,
        epsilon,
    } = params;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if !(k > 0.0) {
        return Err(Error::Config(format!("k must be positive, got {k}")));
    }
    let dims = seq.dims();
    let mut mean: Vec<f64> = seq.frames[0].data().iter().map(|&v| f64::from(v)).collect();
    let mut var = vec![initial_var; mean.len()];
    let mut out = Vec::with_capacity(seq.len());
    out.push(BinaryMask::zeros(dims.0, dims.1)?);
    for frame in &seq.frames[1..] {
        let data = frame.data();
        let mask = mask_where(dims, |i| {
            let x = f64::from(data[i]);
            let fg = (x - mean[i]).abs() > k * (var[i] + epsilon).sqrt();
            let d = x - mean[i];
            mean[i] = (1.0 - alpha) * mean[i] + alpha * x;
            var[i] = (1.0 - alpha) * var[i] + alpha * d * d;
            fg
        });
        out.push(mask);
    }
    Ok(out)
}

/// Framewise majority vote over an odd number (>= 3) of aligned mask streams.
pub fn fuse_mv<S: AsRef<[BinaryMask]>>(streams: &[S]) -> Result<Vec<BinaryMask>> {
    if streams.len() < 3 || streams.len() % 2 == 0 {
        return Err(Error::Arity(format!(
            "majority fusion needs an odd number of streams >= 3, got {}",
            streams.len()
        )));
    }
    let len = streams[0].as_ref().len();
    if let Some(s) = streams.iter().find(|s| s.as_ref().len() != len) {
        return Err(Error::Config(format!(
            "misaligned streams: {} vs {} frames",
            len,
            s.as_ref().len()
        )));
    }
    (0..len)
        .map(|t| {
            let frame: Vec<&BinaryMask> = streams.iter().map(|s| &s.as_ref()[t]).collect();
            morph::majority(&frame)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq_of(frames: Vec<Vec<u8>>, w: usize, h: usize) -> FrameSequence {
        FrameSequence::new(frames.into_iter().map(|d| GrayFrame::new(w, h, d).unwrap()).collect()).unwrap()
    }

    #[test]
    fn sequence_validation() {
        let f = GrayFrame::filled(2, 2, 0).unwrap();
        assert!(FrameSequence::new(vec![f.clone()]).is_err());
        assert!(FrameSequence::new(vec![f, GrayFrame::filled(3, 2, 0).unwrap()]).is_err());
    }

    #[test]
    fn frame_difference_cases() {
        let constant = seq_of(vec![vec![7; 6]; 4], 3, 2);
        assert!(frame_difference(&constant, 10).iter().all(|m| m.count_ones() == 0));

        let mut second = vec![0; 6];
        second[4] = 255;
        let jump = seq_of(vec![vec![0; 6], second], 3, 2);
        let masks = frame_difference(&jump, 30);
        assert_eq!(masks[0].count_ones(), 0);
        assert_eq!(masks[1].to_bits(), vec![0, 0, 0, 0, 1, 0]);
    }

    #[test]
    fn frame_difference_matches_pixel_comparison() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frames: Vec<Vec<u8>> = (0..6).map(|_| (0..35).map(|_| rng.gen()).collect()).collect();
        let seq = seq_of(frames.clone(), 7, 5);
        let masks = frame_difference(&seq, 40);
        for t in 1..6 {
            for i in 0..35 {
                let want = (frames[t][i] as i32 - frames[t - 1][i] as i32).abs() > 40;
                assert_eq!(masks[t].get(i % 7, i / 7), want);
            }
        }
    }

    #[test]
    fn median_background_constant_and_spike() {
        let constant = seq_of(vec![vec![90; 4]; 6], 2, 2);
        assert!(median_background(&constant, 5, 15)
            .unwrap()
            .iter()
            .all(|m| m.count_ones() == 0));

        // spike at frame index 3 (the 4th frame): buffer {bg,bg,bg,spike},
        // median = bg, so it is flagged; afterwards the buffer holds a single
        // spike among 4 backgrounds and the median stays at bg.
        let mut frames = vec![vec![100u8; 4]; 8];
        frames[3] = vec![200; 4];
        let masks = median_background(&seq_of(frames, 2, 2), 5, 20).unwrap();
        let flagged: Vec<usize> = masks.iter().map(BinaryMask::count_ones).collect();
        assert_eq!(flagged, vec![0, 0, 0, 4, 0, 0, 0, 0]);
        assert!(masks.iter().all(|m| m.dims() == (2, 2)));
    }

    #[test]
    fn median_background_rejects_bad_window() {
        let s = seq_of(vec![vec![0; 1]; 3], 1, 1);
        assert!(median_background(&s, 4, 10).is_err());
        assert!(median_background(&s, 1, 10).is_err());
    }

    #[test]
    fn gaussian_constant_and_step() {
        let constant = seq_of(vec![vec![50; 4]; 5], 2, 2);
        let p = GaussianParams::default();
        assert!(running_gaussian(&constant, p).unwrap().iter().all(|m| m.count_ones() == 0));

        // sigma = 10 at start, k = 2.5: a 60-level step is flagged at once
        let mut frames = vec![vec![50u8; 4]; 3];
        frames.push(vec![110; 4]);
        let masks = running_gaussian(&seq_of(frames, 2, 2), p).unwrap();
        assert_eq!(masks[2].count_ones(), 0);
        assert_eq!(masks[3].count_ones(), 4);
        assert!(running_gaussian(&constant, GaussianParams { alpha: 1.0, ..p }).is_err());
        assert!(running_gaussian(&constant, GaussianParams { k: 0.0, ..p }).is_err());
    }

    #[test]
    fn gaussian_matches_streaming_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let frames: Vec<Vec<u8>> = (0..12).map(|_| (0..6).map(|_| rng.gen_range(80..140)).collect()).collect();
        let p = GaussianParams {
            alpha: 0.2,
            k: 1.5,
            initial_var: 50.0,
            epsilon: 1e-6,
        };
        let masks = running_gaussian(&seq_of(frames.clone(), 3, 2), p).unwrap();
        for i in 0..6 {
            let (mut mu, mut s2) = (frames[0][i] as f64, 50.0f64);
            for t in 1..12 {
                let x = frames[t][i] as f64;
                let want = (x - mu).abs() > 1.5 * (s2 + 1e-6).sqrt();
                assert_eq!(masks[t].get(i % 3, i / 3), want, "pixel {i} frame {t}");
                let d = x - mu;
                mu += 0.2 * d;
                s2 = 0.8 * s2 + 0.2 * d * d;
            }
        }
    }

    #[test]
    fn fuse_mv_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s: Vec<BinaryMask> = (0..4)
            .map(|_| BinaryMask::from_fn(5, 5, |_, _| rng.gen_bool(0.5)).unwrap())
            .collect();
        assert_eq!(fuse_mv(&[s.clone(), s.clone(), s.clone()]).unwrap(), s);
        let other: Vec<BinaryMask> = s.iter().map(BinaryMask::not).collect();
        let fused = fuse_mv(&[s.clone(), other.clone(), other.clone()]).unwrap();
        for t in 0..4 {
            assert_eq!(fused[t], morph::majority(&[&s[t], &other[t], &other[t]]).unwrap());
        }
        assert!(fuse_mv(&[s.clone(), s.clone()]).is_err());
        assert!(fuse_mv(&[s.clone(), s.clone(), s[..2].to_vec()]).is_err());
    }
}
