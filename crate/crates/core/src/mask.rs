//! Binary foreground masks, ground-truth frames and grayscale frames.
//!
//! [`BinaryMask`] stores one bit per pixel, packed row by row into `u64`
//! words (bit `x % 64` of word `x / 64` holds column `x`). Bits past the
//! right edge of a row are always zero; every operator in the crate relies
//! on that to get zero padding for free.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    stride: usize,
    words: Vec<u64>,
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidMask(format!(
            "dimensions must be at least 1x1, got {width}x{height}"
        )));
    }
    Ok(())
}

impl BinaryMask {
    /// All-background mask.
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        let stride = width.div_ceil(64);
        Ok(Self {
            width,
            height,
            stride,
            words: vec![0; stride * height],
        })
    }

    /// All-foreground mask.
    pub fn ones(width: usize, height: usize) -> Result<Self> {
        let mut m = Self::zeros(width, height)?;
        m.words.fill(!0);
        m.clear_tail();
        Ok(m)
    }

    /// Builds a mask from row-major cells, each of which must be 0 or 1.
    pub fn from_bits(width: usize, height: usize, bits: &[u8]) -> Result<Self> {
        check_dims(width, height)?;
        if bits.len() != width * height {
            return Err(Error::InvalidMask(format!(
                "expected {} cells for {width}x{height}, got {}",
                width * height,
                bits.len()
            )));
        }
        let mut m = Self::zeros(width, height)?;
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => m.set(i % width, i / width, true),
                other => {
                    return Err(Error::InvalidMask(format!(
                        "cell {i} holds {other}; masks are strictly 0/1"
                    )))
                }
            }
        }
        Ok(m)
    }

    /// Builds a mask from rows of 0/1 values; handy in tests.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != width) {
            return Err(Error::InvalidMask("ragged rows".into()));
        }
        let flat: Vec<u8> = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::from_bits(width, height, &flat)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut m = Self::zeros(width, height)?;
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        (self.words[y * self.stride + x / 64] >> (x % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        debug_assert!(x < self.width && y < self.height);
        let w = &mut self.words[y * self.stride + x / 64];
        let bit = 1u64 << (x % 64);
        if value {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Row-major 0/1 cells.
    pub fn to_bits(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixel_count());
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(self.get(x, y) as u8);
            }
        }
        out
    }

    /// Pixelwise complement.
    pub fn not(&self) -> Self {
        let mut m = self.clone();
        for w in &mut m.words {
            *w = !*w;
        }
        m.clear_tail();
        m
    }

    /// True iff every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dims() == other.dims()
            && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn ensure_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::dims(self.dims(), other.dims()));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn stride(&self) -> usize {
        self.stride
    }

    #[inline]
    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    #[inline]
    pub(crate) fn row(&self, y: usize) -> &[u64] {
        &self.words[y * self.stride..(y + 1) * self.stride]
    }

    /// Mask of valid bits in the last word of each row.
    #[inline]
    pub(crate) fn tail_mask(&self) -> u64 {
        match self.width % 64 {
            0 => !0,
            r => (1u64 << r) - 1,
        }
    }

    pub(crate) fn clear_tail(&mut self) {
        let tail = self.tail_mask();
        if tail == !0 {
            return;
        }
        let stride = self.stride;
        for y in 0..self.height {
            self.words[y * stride + stride - 1] &= tail;
        }
    }
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinaryMask {}x{}", self.width, self.height)?;
        for y in 0..self.height {
            let row: String = (0..self.width)
                .map(|x| if self.get(x, y) { '1' } else { '.' })
                .collect();
            writeln!(f, "  {row}")?;
        }
        Ok(())
    }
}

/// CDNET ground-truth classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
    Shadow,
    OutOfRoi,
    Unknown,
}

impl Label {
    pub fn from_byte(value: u8) -> Option<Self> {
        match value {
            255 => Some(Label::Positive),
            0 => Some(Label::Negative),
            50 => Some(Label::Shadow),
            85 => Some(Label::OutOfRoi),
            170 => Some(Label::Unknown),
            _ => None,
        }
    }

    pub fn to_byte(self) -> u8 {
        match self {
            Label::Positive => 255,
            Label::Negative => 0,
            Label::Shadow => 50,
            Label::OutOfRoi => 85,
            Label::Unknown => 170,
        }
    }

    /// Whether the pixel takes part in evaluation at all.
    pub fn is_evaluated(self) -> bool {
        !matches!(self, Label::OutOfRoi | Label::Unknown)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruthFrame {
    width: usize,
    height: usize,
    labels: Vec<Label>,
}

impl GroundTruthFrame {
    pub fn new(width: usize, height: usize, labels: Vec<Label>) -> Result<Self> {
        check_dims(width, height)?;
        if labels.len() != width * height {
            return Err(Error::InvalidMask(format!(
                "expected {} labels for {width}x{height}, got {}",
                width * height,
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    /// Decodes CDNET label bytes.
    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let labels = bytes
            .iter()
            .enumerate()
            .map(|(index, &value)| {
                Label::from_byte(value).ok_or(Error::UnknownLabel {
                    value,
                    index,
                    path: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(width, height, labels)
    }

    /// Ground truth in which `mask` foreground is POSITIVE and the rest NEGATIVE.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        let labels = mask
            .to_bits()
            .into_iter()
            .map(|b| if b == 1 { Label::Positive } else { Label::Negative })
            .collect();
        Self {
            width: mask.width(),
            height: mask.height(),
            labels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> Label {
        self.labels[y * self.width + x]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.labels.iter().map(|l| l.to_byte()).collect()
    }

    /// POSITIVE pixels as a mask; every other class reads as background.
    pub fn positives(&self) -> BinaryMask {
        let mut m = BinaryMask::zeros(self.width, self.height).expect("validated dims");
        for (i, l) in self.labels.iter().enumerate() {
            if *l == Label::Positive {
                m.set(i % self.width, i / self.width, true);
            }
        }
        m
    }

    /// Relabels every pixel outside `roi` as OUT_OF_ROI.
    pub fn apply_roi(&mut self, roi: &BinaryMask) -> Result<()> {
        if roi.dims() != self.dims() {
            return Err(Error::dims(self.dims(), roi.dims()));
        }
        for (i, l) in self.labels.iter_mut().enumerate() {
            if !roi.get(i % self.width, i / self.width) {
                *l = Label::OutOfRoi;
            }
        }
        Ok(())
    }
}

/// One 8-bit grayscale raster: an input video frame, or a raw mask/label file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::InvalidMask(format!(
                "expected {} bytes for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Threshold decode: bytes >= 128 are foreground.
    pub fn to_mask(&self) -> BinaryMask {
        let mut m = BinaryMask::zeros(self.width, self.height).expect("validated dims");
        for (i, &v) in self.data.iter().enumerate() {
            if v >= 128 {
                m.set(i % self.width, i / self.width, true);
            }
        }
        m
    }

    /// 1 encodes as 255, 0 as 0.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        let data = mask.to_bits().into_iter().map(|b| b * 255).collect();
        Self {
            width: mask.width(),
            height: mask.height(),
            data,
        }
    }
}
