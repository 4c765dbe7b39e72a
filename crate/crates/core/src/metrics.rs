//! Confusion counting against ground truth, the seven change-detection
//! measures, and rank aggregation across methods.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, GroundTruthFrame, Label};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// How SHADOW pixels enter the tally. CDNET counts them as negatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ShadowPolicy {
    #[default]
    Negative,
    Excluded,
}

/// Ground truth split into packed positive/negative planes; pixels in
/// neither plane are not evaluated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalPlanes {
    positive: BinaryMask,
    negative: BinaryMask,
}

impl EvalPlanes {
    pub fn new(gt: &GroundTruthFrame, shadow: ShadowPolicy) -> Self {
        let (w, h) = gt.dims();
        let mut positive = BinaryMask::zeros(w, h).expect("validated dims");
        let mut negative = positive.clone();
        for (i, l) in gt.labels().iter().enumerate() {
            let (x, y) = (i % w, i / w);
            match l {
                Label::Positive => positive.set(x, y, true),
                Label::Negative => negative.set(x, y, true),
                Label::Shadow if shadow == ShadowPolicy::Negative => negative.set(x, y, true),
                _ => {}
            }
        }
        Self { positive, negative }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.positive.dims()
    }

    pub fn count(&self, pred: &BinaryMask) -> Result<ConfusionCounts> {
        pred.ensure_same_dims(&self.positive)?;
        let mut c = ConfusionCounts::default();
        for ((&p, &pos), &neg) in pred
            .words()
            .iter()
            .zip(self.positive.words())
            .zip(self.negative.words())
        {
            c.tp += u64::from((p & pos).count_ones());
            c.fn_ += u64::from((!p & pos).count_ones());
            c.fp += u64::from((p & neg).count_ones());
            c.tn += u64::from((!p & neg).count_ones());
        }
        Ok(c)
    }
}

impl From<&GroundTruthFrame> for EvalPlanes {
    fn from(gt: &GroundTruthFrame) -> Self {
        EvalPlanes::new(gt, ShadowPolicy::default())
    }
}

/// Tallies `pred` against `gt`. OUT_OF_ROI and UNKNOWN pixels are skipped;
/// SHADOW counts as negative.
pub fn confusion(pred: &BinaryMask, gt: &GroundTruthFrame) -> Result<ConfusionCounts> {
    if pred.dims() != gt.dims() {
        return Err(Error::dims(pred.dims(), gt.dims()));
    }
    EvalPlanes::from(gt).count(pred)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Measure {
    Recall,
    Specificity,
    Fpr,
    Fnr,
    Pwc,
    Precision,
    FMeasure,
}

impl Measure {
    pub const ALL: [Measure; 7] = [
        Measure::Recall,
        Measure::Specificity,
        Measure::Fpr,
        Measure::Fnr,
        Measure::Pwc,
        Measure::Precision,
        Measure::FMeasure,
    ];

    pub fn orientation(self) -> Orientation {
        match self {
            Measure::Fpr | Measure::Fnr | Measure::Pwc => Orientation::LowerBetter,
            _ => Orientation::HigherBetter,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::Recall => "recall",
            Measure::Specificity => "specificity",
            Measure::Fpr => "fpr",
            Measure::Fnr => "fnr",
            Measure::Pwc => "pwc",
            Measure::Precision => "precision",
            Measure::FMeasure => "fmeasure",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown measure {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricVector {
    pub recall: f64,
    pub specificity: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub pwc: f64,
    pub precision: f64,
    pub fmeasure: f64,
}

impl MetricVector {
    pub fn get(&self, m: Measure) -> f64 {
        self.to_array()[m.index()]
    }

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.recall,
            self.specificity,
            self.fpr,
            self.fnr,
            self.pwc,
            self.precision,
            self.fmeasure,
        ]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Self {
            recall: a[0],
            specificity: a[1],
            fpr: a[2],
            fnr: a[3],
            pwc: a[4],
            precision: a[5],
            fmeasure: a[6],
        }
    }

    /// Fieldwise arithmetic mean.
    pub fn mean<'a>(vs: impl IntoIterator<Item = &'a MetricVector>) -> Option<MetricVector> {
        let mut acc = [0.0; 7];
        let mut n = 0usize;
        for v in vs {
            for (a, x) in acc.iter_mut().zip(v.to_array()) {
                *a += x;
            }
            n += 1;
        }
        (n > 0).then(|| MetricVector::from_array(acc.map(|a| a / n as f64)))
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// The seven measures. Empty denominators fall back to: recall 1, fnr 0,
/// specificity 1, fpr 0, precision 1 when nothing was missed (else 0),
/// f-measure 0 when precision + recall = 0, pwc 0.
pub fn measures(c: &ConfusionCounts) -> MetricVector {
    let recall = ratio(c.tp, c.tp + c.fn_).unwrap_or(1.0);
    let fnr = ratio(c.fn_, c.tp + c.fn_).unwrap_or(0.0);
    let specificity = ratio(c.tn, c.tn + c.fp).unwrap_or(1.0);
    let fpr = ratio(c.fp, c.fp + c.tn).unwrap_or(0.0);
    let precision = ratio(c.tp, c.tp + c.fp).unwrap_or(if c.fn_ == 0 { 1.0 } else { 0.0 });
    let pwc = ratio(100 * (c.fn_ + c.fp), c.total()).unwrap_or(0.0);
    let fmeasure = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    MetricVector {
        recall,
        specificity,
        fpr,
        fnr,
        pwc,
        precision,
        fmeasure,
    }
}

/// Ranks `values` (1 = best); tied values share the mean of their positions.
pub fn rank_values(values: &[f64], orientation: Orientation) -> Vec<f64> {
    let better = |a: f64, b: f64| -> Ordering {
        let o = a.partial_cmp(&b).unwrap_or(Ordering::Equal);
        match orientation {
            Orientation::HigherBetter => o.reverse(),
            Orientation::LowerBetter => o,
        }
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| better(values[a], values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let shared = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    ranks
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoryReport {
    pub categories: Vec<(String, MetricVector)>,
    /// Mean of the category means.
    pub overall: MetricVector,
}

/// Per-category means of per-video measures plus the overall row.
pub fn category_report(groups: &[(String, Vec<MetricVector>)]) -> Result<CategoryReport> {
    if groups.is_empty() {
        return Err(Error::Dataset("no categories to report".into()));
    }
    let mut categories = Vec::with_capacity(groups.len());
    for (name, videos) in groups {
        let mean = MetricVector::mean(videos)
            .ok_or_else(|| Error::Dataset(format!("category {name:?} has no videos")))?;
        categories.push((name.clone(), mean));
    }
    let overall = MetricVector::mean(categories.iter().map(|(_, v)| v)).expect("nonempty");
    Ok(CategoryReport {
        categories,
        overall,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CdnetRanking {
    /// `[method][category]`: mean over the seven measures of the method's
    /// rank among all methods in that category.
    pub category_ranks: Vec<Vec<f64>>,
    /// Mean of the category ranks, per method.
    pub average_ranks: Vec<f64>,
}

/// Ranks methods given `table[method][category]`.
pub fn cdnet_rank(table: &[Vec<MetricVector>]) -> Result<CdnetRanking> {
    let methods = table.len();
    if methods == 0 {
        return Err(Error::Dataset("no methods to rank".into()));
    }
    let categories = table[0].len();
    if categories == 0 || table.iter().any(|row| row.len() != categories) {
        return Err(Error::Dataset(
            "ragged rank table: every method needs one entry per category".into(),
        ));
    }
    let mut category_ranks = vec![vec![0.0; categories]; methods];
    for c in 0..categories {
        for m in Measure::ALL {
            let values: Vec<f64> = table.iter().map(|row| row[c].get(m)).collect();
            for (k, r) in rank_values(&values, m.orientation()).into_iter().enumerate() {
                category_ranks[k][c] += r;
            }
        }
        for row in &mut category_ranks {
            row[c] /= Measure::ALL.len() as f64;
        }
    }
    let average_ranks = category_ranks
        .iter()
        .map(|r| r.iter().sum::<f64>() / categories as f64)
        .collect();
    Ok(CdnetRanking {
        category_ranks,
        average_ranks,
    })
}
