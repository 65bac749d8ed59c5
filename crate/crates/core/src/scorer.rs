//! Decision scores: the sum of indicator signs over a citation's descriptors.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::chisq::IndicatorProfile;
use crate::corpus::{Citation, DomainLabel};
use crate::error::Result;

/// Minimum score for the positive class: `score >= theta` is genetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Threshold(pub i64);

impl Threshold {
    pub fn classify(self, score: i64) -> DomainLabel {
        classify(score, self)
    }
}

pub fn classify(score: i64, threshold: Threshold) -> DomainLabel {
    if score >= threshold.0 {
        DomainLabel::Genetic
    } else {
        DomainLabel::NonGenetic
    }
}

/// `(# positive indicators) - (# negative indicators)` among the citation's
/// descriptors. Descriptors absent from the profile contribute nothing.
pub fn score_citation(citation: &Citation, profile: &IndicatorProfile) -> i64 {
    citation
        .descriptors
        .iter()
        .filter_map(|d| profile.sign_of(d))
        .map(|s| s.value())
        .sum()
}

fn score_with(citation: &Citation, signs: &HashMap<&str, i64>) -> i64 {
    citation
        .descriptors
        .iter()
        .filter_map(|d| signs.get(d.as_str()))
        .sum()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ScoreReport {
    /// `(citation id, score)` in input order.
    pub scores: Vec<(String, i64)>,
    pub histogram: BTreeMap<i64, u64>,
    /// Citations that carried no descriptors at all.
    pub without_descriptors: usize,
}

impl ScoreReport {
    pub fn score_of(&self, id: &str) -> Option<i64> {
        self.scores.iter().find(|(i, _)| i == id).map(|(_, s)| *s)
    }

    pub fn values(&self) -> Vec<i64> {
        self.scores.iter().map(|(_, s)| *s).collect()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// `id,score,label` rows, labels assigned with `threshold`.
    pub fn write_scores_csv<W: Write>(&self, mut out: W, threshold: Threshold) -> Result<()> {
        writeln!(out, "id,score,label")?;
        for (id, score) in &self.scores {
            writeln!(
                out,
                "{},{},{}",
                csv_field(id),
                score,
                classify(*score, threshold)
            )?;
        }
        Ok(())
    }

    /// `score,count` rows in ascending score order.
    pub fn write_histogram_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "score,count")?;
        for (score, count) in &self.histogram {
            writeln!(out, "{score},{count}")?;
        }
        Ok(())
    }
}

pub(crate) fn csv_field(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}

/// Score every citation. Work is spread over the rayon pool; scores keep
/// input order, so the report is independent of the worker count.
pub fn score_corpus(citations: &[Citation], profile: &IndicatorProfile) -> ScoreReport {
    let signs = profile.sign_table();
    let values: Vec<i64> = citations
        .par_iter()
        .with_min_len(1024)
        .map(|c| score_with(c, &signs))
        .collect();
    let mut histogram = BTreeMap::new();
    for &s in &values {
        *histogram.entry(s).or_insert(0) += 1;
    }
    ScoreReport {
        scores: citations
            .iter()
            .zip(values)
            .map(|(c, s)| (c.id.clone(), s))
            .collect(),
        histogram,
        without_descriptors: citations
            .iter()
            .filter(|c| c.descriptors.is_empty())
            .count(),
    }
}
