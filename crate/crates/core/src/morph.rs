//! The six fusion operators: 3x3 erosion and dilation, 5x5 binary median,
//! pixelwise OR / AND, and odd-arity majority vote.
//!
//! Pixels outside the frame count as background for every spatial operator,
//! so foreground touching the border erodes away.
//!
//! All operators work on packed rows, 64 pixels per word. Counting operators
//! (median, majority) use bit-sliced adders: plane `p` of a counter holds bit
//! `p` of the per-pixel count.

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Row `row` with every column moved right by `k` (column x receives x - k).
#[inline]
fn from_left(row: &[u64], i: usize, k: u32) -> u64 {
    let mut w = row[i] << k;
    if i > 0 {
        w |= row[i - 1] >> (64 - k);
    }
    w
}

/// Column x receives x + k.
#[inline]
fn from_right(row: &[u64], i: usize, k: u32) -> u64 {
    let mut w = row[i] >> k;
    if i + 1 < row.len() {
        w |= row[i + 1] << (64 - k);
    }
    w
}

fn horizontal3(m: &BinaryMask, combine: impl Fn(u64, u64, u64) -> u64) -> Vec<u64> {
    let stride = m.stride();
    let tail = m.tail_mask();
    let mut out = vec![0u64; m.words().len()];
    for y in 0..m.height() {
        let row = m.row(y);
        for i in 0..stride {
            out[y * stride + i] = combine(from_left(row, i, 1), row[i], from_right(row, i, 1));
        }
        out[y * stride + stride - 1] &= tail;
    }
    out
}

fn separable3(m: &BinaryMask, is_erosion: bool) -> BinaryMask {
    let combine = |a: u64, b: u64, c: u64| if is_erosion { a & b & c } else { a | b | c };
    let h = horizontal3(m, combine);
    let (stride, height) = (m.stride(), m.height());
    let mut out = m.clone();
    let words = out.words_mut();
    for y in 0..height {
        for i in 0..stride {
            let up = if y > 0 { h[(y - 1) * stride + i] } else { 0 };
            let down = if y + 1 < height { h[(y + 1) * stride + i] } else { 0 };
            words[y * stride + i] = combine(up, h[y * stride + i], down);
        }
    }
    out
}

/// Erosion with a 3x3 square structuring element.
pub fn erode(m: &BinaryMask) -> BinaryMask {
    separable3(m, true)
}

/// Dilation with a 3x3 square structuring element.
pub fn dilate(m: &BinaryMask) -> BinaryMask {
    separable3(m, false)
}

/// Adds `bit` (weight `2^plane`) into a bit-sliced counter.
#[inline]
fn add_at(counter: &mut [u64], mut carry: u64, plane: usize) {
    for c in &mut counter[plane..] {
        if carry == 0 {
            break;
        }
        let next = *c & carry;
        *c ^= carry;
        carry = next;
    }
}

/// Lanes where the bit-sliced `counter` is >= `threshold`.
fn at_least(counter: &[u64], threshold: usize) -> u64 {
    let mut greater = 0u64;
    let mut equal = !0u64;
    for (p, &plane) in counter.iter().enumerate().rev() {
        if (threshold >> p) & 1 == 1 {
            equal &= plane;
        } else {
            greater |= equal & plane;
            equal &= !plane;
        }
    }
    if threshold >> counter.len() != 0 {
        return 0;
    }
    greater | equal
}

/// Binary median over a 5x5 window: foreground iff at least 13 of the 25
/// window positions are foreground.
pub fn median5(m: &BinaryMask) -> BinaryMask {
    const H_PLANES: usize = 3;
    let (stride, height) = (m.stride(), m.height());
    let tail = m.tail_mask();

    let mut horiz = vec![[0u64; H_PLANES]; stride * height];
    for y in 0..height {
        let row = m.row(y);
        for i in 0..stride {
            let c = &mut horiz[y * stride + i];
            for w in [
                from_left(row, i, 2),
                from_left(row, i, 1),
                row[i],
                from_right(row, i, 1),
                from_right(row, i, 2),
            ] {
                add_at(c, w, 0);
            }
        }
    }

    let mut out = m.clone();
    let words = out.words_mut();
    for y in 0..height {
        let lo = y.saturating_sub(2);
        let hi = (y + 2).min(height - 1);
        for i in 0..stride {
            let mut count = [0u64; 5];
            for r in lo..=hi {
                for (p, &plane) in horiz[r * stride + i].iter().enumerate() {
                    add_at(&mut count, plane, p);
                }
            }
            words[y * stride + i] = at_least(&count, 13);
        }
        words[y * stride + stride - 1] &= tail;
    }
    out
}

fn zip_with(a: &BinaryMask, b: &BinaryMask, f: impl Fn(u64, u64) -> u64) -> Result<BinaryMask> {
    a.ensure_same_dims(b)?;
    let mut out = a.clone();
    for (o, &w) in out.words_mut().iter_mut().zip(b.words()) {
        *o = f(*o, w);
    }
    Ok(out)
}

/// Pixelwise disjunction.
pub fn or(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    zip_with(a, b, |x, y| x | y)
}

/// Pixelwise conjunction.
pub fn and(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    zip_with(a, b, |x, y| x & y)
}

/// Number of bit planes needed to count up to `k`.
fn planes_for(k: usize) -> usize {
    (usize::BITS - k.leading_zeros()) as usize
}

/// Pixelwise majority of an odd number (at least 3) of masks.
pub fn majority<M: AsRef<BinaryMask>>(masks: &[M]) -> Result<BinaryMask> {
    let k = masks.len();
    if k < 3 || k % 2 == 0 {
        return Err(Error::Arity(format!(
            "majority vote needs an odd number of inputs >= 3, got {k}"
        )));
    }
    let first = masks[0].as_ref();
    for m in &masks[1..] {
        first.ensure_same_dims(m.as_ref())?;
    }
    let threshold = k / 2 + 1;
    let mut out = first.clone();
    if k == 3 {
        let (b, c) = (masks[1].as_ref().words(), masks[2].as_ref().words());
        for (i, o) in out.words_mut().iter_mut().enumerate() {
            let a = *o;
            *o = (a & b[i]) | (a & c[i]) | (b[i] & c[i]);
        }
        return Ok(out);
    }
    let planes = planes_for(k);
    let mut count = vec![0u64; planes];
    for (i, o) in out.words_mut().iter_mut().enumerate() {
        count.fill(0);
        for m in masks {
            add_at(&mut count, m.as_ref().words()[i], 0);
        }
        *o = at_least(&count, threshold);
    }
    Ok(out)
}

impl AsRef<BinaryMask> for BinaryMask {
    fn as_ref(&self) -> &BinaryMask {
        self
    }
}
