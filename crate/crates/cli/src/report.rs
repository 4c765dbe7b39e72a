//! Score reports: per-video, per-category and overall measures for one or
//! more methods, with CDNET-style ranks, as CSV.

use std::fmt::Write as _;

use cdfuse_core::metrics::{self, MetricVector};
use cdfuse_core::{Error, Result};

pub const HEADER: &str =
    "scope,method,category,video,recall,specificity,fpr,fnr,pwc,precision,fmeasure,category_rank,average_rank";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Video,
    Category,
    Overall,
}

impl Scope {
    fn name(self) -> &'static str {
        match self {
            Scope::Video => "video",
            Scope::Category => "category",
            Scope::Overall => "overall",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub scope: Scope,
    pub method: String,
    pub category: String,
    pub video: String,
    pub values: MetricVector,
    pub category_rank: Option<f64>,
    pub average_rank: Option<f64>,
}

/// Measures of one method on one video.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoScore {
    pub category: String,
    pub video: String,
    pub values: MetricVector,
}

/// Builds the full report. Every method must cover the same videos. Ranks
/// compare all methods within each category; the overall rank is their mean.
pub fn build_report(methods: &[(String, Vec<VideoScore>)]) -> Result<Vec<ReportRow>> {
    let Some((_, first)) = methods.first() else {
        return Err(Error::Dataset("no methods to report".into()));
    };
    let mut categories: Vec<String> = Vec::new();
    for s in first {
        if !categories.contains(&s.category) {
            categories.push(s.category.clone());
        }
    }
    let key = |s: &VideoScore| (s.category.clone(), s.video.clone());
    let videos: Vec<_> = first.iter().map(key).collect();
    let mut reports = Vec::with_capacity(methods.len());
    for (name, scores) in methods {
        let mut mine: Vec<_> = scores.iter().map(key).collect();
        let mut want = videos.clone();
        mine.sort();
        want.sort();
        if mine != want {
            return Err(Error::Dataset(format!("method {name} does not cover the same videos as {}", methods[0].0)));
        }
        let groups: Vec<(String, Vec<MetricVector>)> = categories
            .iter()
            .map(|c| {
                let vs = scores.iter().filter(|s| &s.category == c).map(|s| s.values).collect();
                (c.clone(), vs)
            })
            .collect();
        reports.push(metrics::category_report(&groups)?);
    }
    let table: Vec<Vec<MetricVector>> = reports
        .iter()
        .map(|r| r.categories.iter().map(|(_, v)| *v).collect())
        .collect();
    let ranking = metrics::cdnet_rank(&table)?;

    let mut rows = Vec::new();
    for (m, ((name, scores), report)) in methods.iter().zip(&reports).enumerate() {
        for s in scores {
            rows.push(ReportRow {
                scope: Scope::Video,
                method: name.clone(),
                category: s.category.clone(),
                video: s.video.clone(),
                values: s.values,
                category_rank: None,
                average_rank: None,
            });
        }
        for (c, (cat, values)) in report.categories.iter().enumerate() {
            rows.push(ReportRow {
                scope: Scope::Category,
                method: name.clone(),
                category: cat.clone(),
                video: String::new(),
                values: *values,
                category_rank: Some(ranking.category_ranks[m][c]),
                average_rank: None,
            });
        }
        rows.push(ReportRow {
            scope: Scope::Overall,
            method: name.clone(),
            category: String::new(),
            video: String::new(),
            values: report.overall,
            category_rank: None,
            average_rank: Some(ranking.average_ranks[m]),
        });
    }
    Ok(rows)
}

/// Rebuilds category, overall and rank rows from the video rows alone.
pub fn reaggregate(rows: &[ReportRow]) -> Result<Vec<ReportRow>> {
    let mut methods: Vec<(String, Vec<VideoScore>)> = Vec::new();
    for r in rows.iter().filter(|r| r.scope == Scope::Video) {
        let score = VideoScore {
            category: r.category.clone(),
            video: r.video.clone(),
            values: r.values,
        };
        match methods.iter_mut().find(|(m, _)| m == &r.method) {
            Some((_, v)) => v.push(score),
            None => methods.push((r.method.clone(), vec![score])),
        }
    }
    build_report(&methods)
}

fn check_field(s: &str) -> Result<&str> {
    if s.contains([',', '"', '\n']) {
        return Err(Error::Config(format!("report field {s:?} contains a delimiter")));
    }
    Ok(s)
}

pub fn to_csv(rows: &[ReportRow]) -> Result<String> {
    let mut out = String::from(HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        write!(
            out,
            "{},{},{},{}",
            r.scope.name(),
            check_field(&r.method)?,
            check_field(&r.category)?,
            check_field(&r.video)?
        )
        .expect("string write");
        for v in r.values.to_array() {
            write!(out, ",{v}").expect("string write");
        }
        writeln!(out, ",{},{}", opt(r.category_rank), opt(r.average_rank)).expect("string write");
    }
    Ok(out)
}

pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(HEADER) {
        return Err(Error::Parse {
            position: 0,
            message: "missing report header".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |m: String| Error::Parse {
            position: i + 2,
            message: m,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(bad(format!("expected 13 fields, got {}", f.len())));
        }
        let scope = match f[0] {
            "video" => Scope::Video,
            "category" => Scope::Category,
            "overall" => Scope::Overall,
            other => return Err(bad(format!("unknown scope {other:?}"))),
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        let mut vals = [0.0; 7];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = num(f[4 + k])?;
        }
        rows.push(ReportRow {
            scope,
            method: f[1].to_string(),
            category: f[2].to_string(),
            video: f[3].to_string(),
            values: MetricVector::from_array(vals),
            category_rank: opt(f[11])?,
            average_rank: opt(f[12])?,
        });
    }
    Ok(rows)
}
