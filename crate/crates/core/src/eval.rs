//! Evaluation: confusion counts and derived metrics, threshold fitting,
//! k-fold cross-validation, Cohen's kappa and McNemar's test.
//!
//! The genetic class is the positive class throughout.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::chisq::{build_indicator_profile, pvalue_chisq_df1, IndicatorProfile};
use crate::contingency::build_profile;
use crate::corpus::{split_folds, Citation, DomainLabel, ExclusionList, FoldAssignment};
use crate::error::{Error, Result};
use crate::scorer::{classify, score_corpus, Threshold};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    fn add(&mut self, predicted: DomainLabel, gold: DomainLabel) {
        match (predicted.is_positive(), gold.is_positive()) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    /// Counts from two label vectors aligned by position.
    pub fn from_labels(predicted: &[DomainLabel], gold: &[DomainLabel]) -> Result<Self> {
        if predicted.len() != gold.len() {
            return Err(Error::Alignment(format!(
                "{} predictions for {} gold labels",
                predicted.len(),
                gold.len()
            )));
        }
        let mut c = ConfusionCounts::default();
        for (&p, &g) in predicted.iter().zip(gold) {
            c.add(p, g);
        }
        Ok(c)
    }
}

/// Confusion counts of `(id, label)` predictions against gold labels. Both
/// sequences must list the same ids in the same order.
pub fn confusion<S: AsRef<str>, T: AsRef<str>>(
    predicted: &[(S, DomainLabel)],
    gold: &[(T, DomainLabel)],
) -> Result<ConfusionCounts> {
    if predicted.len() != gold.len() {
        return Err(Error::Alignment(format!(
            "{} predictions for {} gold labels",
            predicted.len(),
            gold.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for ((pid, p), (gid, g)) in predicted.iter().zip(gold) {
        if pid.as_ref() != gid.as_ref() {
            return Err(Error::Alignment(format!(
                "prediction for {:?} aligned with gold label for {:?}",
                pid.as_ref(),
                gid.as_ref()
            )));
        }
        c.add(*p, *g);
    }
    Ok(c)
}

/// Accuracy, recall, precision and F-measure for the positive class.
///
/// A ratio with a zero denominator is reported as 0 and flagged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MetricSet {
    pub acc: f64,
    pub rec: f64,
    pub pre: f64,
    pub f: f64,
    pub recall_undefined: bool,
    pub precision_undefined: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn metrics(counts: &ConfusionCounts) -> Result<MetricSet> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::InvalidArgument("no predictions to evaluate".into()));
    }
    let ConfusionCounts { tp, tn, fp, fn_ } = *counts;
    let (acc, _) = ratio(tp + tn, total);
    let (rec, recall_undefined) = ratio(tp, tp + fn_);
    let (pre, precision_undefined) = ratio(tp, tp + fp);
    // 2 pre rec / (pre + rec) == 2 tp / (2 tp + fp + fn) whenever both are
    // defined and tp > 0; the integer form avoids compounding rounding
    let f = if tp == 0 {
        0.0
    } else {
        ratio(2 * tp, 2 * tp + fp + fn_).0
    };
    Ok(MetricSet {
        acc,
        rec,
        pre,
        f,
        recall_undefined,
        precision_undefined,
    })
}

impl MetricSet {
    /// Arithmetic mean of each metric; a flag is set if any input had it.
    pub fn mean(sets: &[MetricSet]) -> MetricSet {
        let n = sets.len().max(1) as f64;
        let sum = |g: fn(&MetricSet) -> f64| sets.iter().map(g).sum::<f64>() / n;
        MetricSet {
            acc: sum(|m| m.acc),
            rec: sum(|m| m.rec),
            pre: sum(|m| m.pre),
            f: sum(|m| m.f),
            recall_undefined: sets.iter().any(|m| m.recall_undefined),
            precision_undefined: sets.iter().any(|m| m.precision_undefined),
        }
    }
}

/// The accuracy-maximizing threshold on a training set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdFit {
    pub threshold: Threshold,
    pub correct: u64,
    pub accuracy: f64,
}

fn class_counts_by_score(
    scores: &[i64],
    gold: &[DomainLabel],
) -> Result<BTreeMap<i64, (u64, u64)>> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument(
            "no scores to fit a threshold on".into(),
        ));
    }
    if scores.len() != gold.len() {
        return Err(Error::Alignment(format!(
            "{} scores for {} gold labels",
            scores.len(),
            gold.len()
        )));
    }
    let mut by_score: BTreeMap<i64, (u64, u64)> = BTreeMap::new();
    for (&s, &g) in scores.iter().zip(gold) {
        let e = by_score.entry(s).or_default();
        if g.is_positive() {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    Ok(by_score)
}

/// Sweep every threshold in `[min score, max score + 1]` and return the one
/// with the most correct classifications, preferring the smallest on ties.
///
/// Thresholds between two consecutive observed scores classify identically,
/// so only `min` and `s + 1` for each observed score `s` need evaluating.
pub fn fit_threshold(scores: &[i64], gold: &[DomainLabel]) -> Result<ThresholdFit> {
    let by_score = class_counts_by_score(scores, gold)?;
    let n = scores.len() as u64;
    let min = *by_score.keys().next().expect("non-empty");
    // at theta = min everything is classified genetic
    let mut correct: u64 = by_score.values().map(|c| c.0).sum();
    let mut best = (min, correct);
    for (&s, &(genetic, nongenetic)) in &by_score {
        // moving theta past s flips citations scoring exactly s to nongenetic
        correct = correct - genetic + nongenetic;
        if correct > best.1 {
            best = (s + 1, correct);
        }
    }
    Ok(ThresholdFit {
        threshold: Threshold(best.0),
        correct: best.1,
        accuracy: best.1 as f64 / n as f64,
    })
}

pub fn optimize_threshold(scores: &[i64], gold: &[DomainLabel]) -> Result<Threshold> {
    fit_threshold(scores, gold).map(|f| f.threshold)
}

/// Accuracy of the `score >= theta` rule for each theta in `lo..=hi`.
pub fn calibration_curve(
    scores: &[i64],
    gold: &[DomainLabel],
    lo: i64,
    hi: i64,
) -> Result<Vec<(i64, f64)>> {
    let by_score = class_counts_by_score(scores, gold)?;
    let n = scores.len() as f64;
    let total_genetic: u64 = by_score.values().map(|c| c.0).sum();
    let mut out = Vec::new();
    for theta in lo..=hi {
        let (mut genetic_below, mut nongenetic_below) = (0, 0);
        for (_, &(g, ng)) in by_score.range(..theta) {
            genetic_below += g;
            nongenetic_below += ng;
        }
        let correct = total_genetic - genetic_below + nongenetic_below;
        out.push((theta, correct as f64 / n));
    }
    Ok(out)
}

/// Where the indicator profile used inside cross-validation comes from.
#[derive(Clone, Copy, Debug)]
pub enum ProfileSource<'a> {
    /// One profile trained upstream; only the threshold is fit per fold.
    Fixed(&'a IndicatorProfile),
    /// Rebuild the profile from each fold's training citations.
    RefitPerFold {
        exclusion: &'a ExclusionList,
        critical_value: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub theta: i64,
    pub train_accuracy: f64,
    pub counts: ConfusionCounts,
    pub metrics: MetricSet,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationPoint {
    pub theta: i64,
    /// Training accuracy of each fold at this threshold.
    pub per_fold: Vec<f64>,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutOfFoldPrediction {
    pub id: String,
    pub fold: usize,
    pub score: i64,
    pub predicted: DomainLabel,
    pub gold: DomainLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossValReport {
    pub k: usize,
    pub seed: u64,
    pub refit_per_fold: bool,
    pub folds: Vec<FoldResult>,
    pub mean_metrics: MetricSet,
    pub mean_theta: f64,
    pub calibration: Vec<CalibrationPoint>,
    pub predictions: Vec<OutOfFoldPrediction>,
}

impl CrossValReport {
    /// The most frequent per-fold threshold (smallest on ties) and how many
    /// folds chose it.
    pub fn modal_theta(&self) -> (i64, usize) {
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for f in &self.folds {
            *counts.entry(f.theta).or_default() += 1;
        }
        counts.into_iter().fold(
            (0, 0),
            |best, (t, c)| if c > best.1 { (t, c) } else { best },
        )
    }

    pub fn predicted_labels(&self) -> Vec<DomainLabel> {
        self.predictions.iter().map(|p| p.predicted).collect()
    }
}

pub fn gold_labels(citations: &[Citation]) -> Result<Vec<DomainLabel>> {
    citations
        .iter()
        .map(|c| {
            c.label
                .ok_or_else(|| Error::InvalidArgument(format!("citation {} has no label", c.id)))
        })
        .collect()
}

/// k-fold cross-validation of the scoring rule: for every fold the threshold
/// is fit on the other `k - 1` folds and applied to the held-out one.
pub fn cross_validate(
    citations: &[Citation],
    k: usize,
    seed: u64,
    source: ProfileSource<'_>,
) -> Result<CrossValReport> {
    let folds = split_folds(citations, k, seed)?;
    cross_validate_with(citations, &folds, source)
}

pub fn cross_validate_with(
    citations: &[Citation],
    folds: &FoldAssignment,
    source: ProfileSource<'_>,
) -> Result<CrossValReport> {
    let gold = gold_labels(citations)?;
    let fixed_scores = match source {
        ProfileSource::Fixed(profile) => Some(score_corpus(citations, profile).values()),
        ProfileSource::RefitPerFold { .. } => None,
    };

    let mut fold_scores = Vec::with_capacity(folds.k);
    for fold in 0..folds.k {
        let scores = match (&fixed_scores, source) {
            (Some(s), _) => s.clone(),
            (
                None,
                ProfileSource::RefitPerFold {
                    exclusion,
                    critical_value,
                },
            ) => {
                let train: Vec<Citation> = folds
                    .train_indices(fold)
                    .into_iter()
                    .map(|i| citations[i].clone())
                    .collect();
                let counts = build_profile(&train, exclusion)?;
                let selection = build_indicator_profile(&counts, exclusion, critical_value)?;
                score_corpus(citations, &selection.profile).values()
            }
            (None, ProfileSource::Fixed(_)) => unreachable!(),
        };
        fold_scores.push(scores);
    }

    let lo = fold_scores.iter().flatten().copied().min().unwrap_or(0);
    let hi = fold_scores.iter().flatten().copied().max().unwrap_or(0) + 1;

    let mut results = Vec::with_capacity(folds.k);
    let mut curves = Vec::with_capacity(folds.k);
    let mut predictions: Vec<Option<OutOfFoldPrediction>> = vec![None; citations.len()];
    for (fold, scores) in fold_scores.iter().enumerate() {
        let train = folds.train_indices(fold);
        let test = folds.test_indices(fold);
        let train_scores: Vec<i64> = train.iter().map(|&i| scores[i]).collect();
        let train_gold: Vec<DomainLabel> = train.iter().map(|&i| gold[i]).collect();
        let fit = fit_threshold(&train_scores, &train_gold)?;
        curves.push(calibration_curve(&train_scores, &train_gold, lo, hi)?);

        let mut counts = ConfusionCounts::default();
        for &i in &test {
            let predicted = classify(scores[i], fit.threshold);
            counts.add(predicted, gold[i]);
            predictions[i] = Some(OutOfFoldPrediction {
                id: citations[i].id.clone(),
                fold,
                score: scores[i],
                predicted,
                gold: gold[i],
            });
        }
        results.push(FoldResult {
            fold,
            train_size: train.len(),
            test_size: test.len(),
            theta: fit.threshold.0,
            train_accuracy: fit.accuracy,
            counts,
            metrics: metrics(&counts)?,
        });
    }

    let calibration = (lo..=hi)
        .enumerate()
        .map(|(j, theta)| {
            let per_fold: Vec<f64> = curves.iter().map(|c| c[j].1).collect();
            let mean = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
            CalibrationPoint {
                theta,
                per_fold,
                mean,
            }
        })
        .collect();
    let fold_metrics: Vec<MetricSet> = results.iter().map(|r| r.metrics).collect();
    let mean_theta = results.iter().map(|r| r.theta as f64).sum::<f64>() / results.len() as f64;

    Ok(CrossValReport {
        k: folds.k,
        seed: folds.seed,
        refit_per_fold: matches!(source, ProfileSource::RefitPerFold { .. }),
        mean_metrics: MetricSet::mean(&fold_metrics),
        folds: results,
        mean_theta,
        calibration,
        predictions: predictions
            .into_iter()
            .map(|p| p.expect("every citation is in exactly one test fold"))
            .collect(),
    })
}

/// Cohen's kappa between two raters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KappaResult {
    /// `None` when chance agreement is 1 (both raters constant and equal).
    pub kappa: Option<f64>,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
}

pub fn cohen_kappa(a: &[DomainLabel], b: &[DomainLabel]) -> Result<KappaResult> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::Alignment(format!(
            "kappa needs two equal-length non-empty label vectors ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as u128;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as u128;
    let pos_a = a.iter().filter(|l| l.is_positive()).count() as u128;
    let pos_b = b.iter().filter(|l| l.is_positive()).count() as u128;
    // chance agreement scaled by n²
    let chance = pos_a * pos_b + (n - pos_a) * (n - pos_b);
    let nn = n * n;
    let kappa = if chance == nn {
        None
    } else {
        Some((agree as f64 * n as f64 - chance as f64) / (nn - chance) as f64)
    };
    Ok(KappaResult {
        kappa,
        observed_agreement: agree as f64 / n as f64,
        expected_agreement: chance as f64 / nn as f64,
    })
}

/// McNemar's test on the discordant errors of two classifiers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McNemarResult {
    pub statistic: f64,
    pub p_value: f64,
    /// A correct, B wrong.
    pub n01: u64,
    /// A wrong, B correct.
    pub n10: u64,
    pub no_discordant_pairs: bool,
}

/// Continuity-corrected statistic `(|n01 - n10| - 1)² / (n01 + n10)`.
pub fn mcnemar_from_counts(n01: u64, n10: u64) -> McNemarResult {
    let discordant = n01 + n10;
    if discordant == 0 {
        return McNemarResult {
            statistic: 0.0,
            p_value: 1.0,
            n01,
            n10,
            no_discordant_pairs: true,
        };
    }
    let diff = n01.abs_diff(n10) as f64 - 1.0;
    let statistic = diff * diff / discordant as f64;
    McNemarResult {
        statistic,
        p_value: pvalue_chisq_df1(statistic).expect("statistic is non-negative"),
        n01,
        n10,
        no_discordant_pairs: false,
    }
}

pub fn mcnemar(
    pred_a: &[DomainLabel],
    pred_b: &[DomainLabel],
    gold: &[DomainLabel],
) -> Result<McNemarResult> {
    if pred_a.len() != gold.len() || pred_b.len() != gold.len() {
        return Err(Error::Alignment(format!(
            "McNemar needs aligned triples ({}, {}, {})",
            pred_a.len(),
            pred_b.len(),
            gold.len()
        )));
    }
    let (mut n01, mut n10) = (0, 0);
    for ((a, b), g) in pred_a.iter().zip(pred_b).zip(gold) {
        match (a == g, b == g) {
            (true, false) => n01 += 1,
            (false, true) => n10 += 1,
            _ => {}
        }
    }
    Ok(mcnemar_from_counts(n01, n10))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chisq::Sign;
    use crate::corpus::DomainLabel::{Genetic as G, NonGenetic as N};
    use proptest::prelude::*;

    #[test]
    fn confusion_cases() {
        let gold = [("1", G), ("2", N), ("3", G)];
        let c = confusion(&gold, &gold).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let all_g = [("1", G), ("2", G)];
        let all_n = [("1", N), ("2", N)];
        assert_eq!(
            confusion(&all_g, &all_n).unwrap(),
            ConfusionCounts {
                tp: 0,
                tn: 0,
                fp: 2,
                fn_: 0
            }
        );
        assert!(matches!(
            confusion(&[("1", G)], &[("2", G)]),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn confusion_fixture_of_ten() {
        // hand-labelled: disagreements at positions 2 (fn), 5 (fp), 8 (fn)
        let gold = [G, N, G, N, N, N, G, N, G, N];
        let pred = [G, N, N, N, N, G, G, N, N, N];
        let c = ConfusionCounts::from_labels(&pred, &gold).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 2,
                tn: 5,
                fp: 1,
                fn_: 2
            }
        );
        assert_eq!(c.total(), 10);
    }

    #[test]
    fn metric_fixed_points() {
        let m = metrics(&ConfusionCounts {
            tp: 30,
            tn: 50,
            fp: 10,
            fn_: 10,
        })
        .unwrap();
        assert_eq!((m.acc, m.rec, m.pre, m.f), (0.80, 0.75, 0.75, 0.75));
        let perfect = metrics(&ConfusionCounts {
            tp: 3,
            tn: 4,
            fp: 0,
            fn_: 0,
        })
        .unwrap();
        assert_eq!(
            (perfect.acc, perfect.rec, perfect.pre, perfect.f),
            (1.0, 1.0, 1.0, 1.0)
        );
        let none = metrics(&ConfusionCounts {
            tp: 0,
            tn: 5,
            fp: 0,
            fn_: 4,
        })
        .unwrap();
        assert_eq!((none.rec, none.pre, none.f), (0.0, 0.0, 0.0));
        assert!(none.precision_undefined && !none.recall_undefined);
        assert!(metrics(&ConfusionCounts::default()).is_err());
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(
            optimize_threshold(&[-1, 0, 5], &[N, N, G]).unwrap(),
            Threshold(1)
        );
        assert_eq!(
            optimize_threshold(&[-3, 2, 7], &[N, N, N]).unwrap(),
            Threshold(8)
        );
        assert_eq!(
            optimize_threshold(&[-3, 2, 7], &[G, G, G]).unwrap(),
            Threshold(-3)
        );
        assert!(optimize_threshold(&[], &[]).is_err());
    }

    #[test]
    fn kappa_fixed_point() {
        // agreement table [[40, 10], [5, 45]]
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (x, y, n) in [(G, G, 40), (G, N, 10), (N, G, 5), (N, N, 45)] {
            for _ in 0..n {
                a.push(x);
                b.push(y);
            }
        }
        let k = cohen_kappa(&a, &b).unwrap();
        assert!((k.observed_agreement - 0.85).abs() < 1e-12);
        assert!((k.expected_agreement - 0.50).abs() < 1e-12);
        assert!((k.kappa.unwrap() - 0.70).abs() < 1e-12);
        let same = cohen_kappa(&[G, N, G], &[G, N, G]).unwrap();
        assert_eq!(same.kappa, Some(1.0));
        assert_eq!(cohen_kappa(&[G, G], &[G, G]).unwrap().kappa, None);
        assert!(cohen_kappa(&[], &[]).is_err());
    }

    #[test]
    fn mcnemar_fixed_points() {
        let r = mcnemar_from_counts(10, 20);
        assert!((r.statistic - 2.7).abs() < 1e-12);
        assert_eq!(mcnemar_from_counts(1, 0).statistic, 0.0);
        let same = mcnemar(&[G, N, G], &[G, N, G], &[G, G, N]).unwrap();
        assert_eq!((same.statistic, same.p_value), (0.0, 1.0));
        assert!(same.no_discordant_pairs);
        let r = mcnemar(&[G, G, N, N], &[N, G, G, N], &[G, G, G, G]).unwrap();
        assert_eq!((r.n01, r.n10), (1, 1));
    }

    fn planted(n: usize) -> Vec<Citation> {
        (0..n)
            .map(|i| {
                let genetic = i % 4 == 0;
                let ds: Vec<String> = if genetic {
                    vec!["P1".into(), "P2".into(), "P3".into(), format!("u{i}")]
                } else {
                    vec!["M1".into(), format!("u{i}")]
                };
                Citation::new(i.to_string())
                    .with_descriptors(ds)
                    .with_label(if genetic { G } else { N })
            })
            .collect()
    }

    fn planted_profile() -> IndicatorProfile {
        IndicatorProfile::from_signs([
            ("P1", Sign::Positive),
            ("P2", Sign::Positive),
            ("P3", Sign::Positive),
            ("M1", Sign::Negative),
        ])
    }

    #[test]
    fn cross_validation_fixed_profile() {
        let cs = planted(200);
        let p = planted_profile();
        let r = cross_validate(&cs, 10, 7, ProfileSource::Fixed(&p)).unwrap();
        assert_eq!(r.folds.len(), 10);
        assert_eq!(r.modal_theta(), (0, 10));
        assert_eq!(r.mean_metrics.acc, 1.0);
        assert_eq!(r.predictions.len(), 200);
        assert_eq!(
            r,
            cross_validate(&cs, 10, 7, ProfileSource::Fixed(&p)).unwrap()
        );
        let mean_acc = r.folds.iter().map(|f| f.metrics.acc).sum::<f64>() / 10.0;
        assert_eq!(r.mean_metrics.acc, mean_acc);
        let cal = r.calibration.iter().find(|c| c.theta == 0).unwrap();
        assert_eq!(cal.mean, 1.0);
    }

    #[test]
    fn cross_validation_symmetric_two_folds() {
        let cs = planted(40);
        let p = planted_profile();
        let r = cross_validate(&cs, 2, 1, ProfileSource::Fixed(&p)).unwrap();
        assert_eq!(r.folds[0].theta, r.folds[1].theta);
    }

    #[test]
    fn cross_validation_refit() {
        let cs = planted(200);
        let excl = ExclusionList::empty();
        let r = cross_validate(
            &cs,
            5,
            3,
            ProfileSource::RefitPerFold {
                exclusion: &excl,
                critical_value: 3.84,
            },
        )
        .unwrap();
        assert!(r.refit_per_fold);
        assert!(r.mean_metrics.acc > 0.99);
    }

    #[test]
    fn single_class_fold_is_flagged_not_fatal() {
        let cs: Vec<_> = (0..10)
            .map(|i| Citation::new(i.to_string()).with_label(if i == 0 { G } else { N }))
            .collect();
        let p = planted_profile();
        let r = cross_validate(&cs, 5, 0, ProfileSource::Fixed(&p)).unwrap();
        assert!(r.mean_metrics.recall_undefined);
    }

    fn brute_force_threshold(scores: &[i64], gold: &[DomainLabel]) -> (i64, usize) {
        let lo = *scores.iter().min().unwrap();
        let hi = *scores.iter().max().unwrap() + 1;
        let mut best = (lo, 0);
        for theta in lo..=hi {
            let correct = scores
                .iter()
                .zip(gold)
                .filter(|(&s, &g)| (s >= theta) == (g == G))
                .count();
            if correct > best.1 {
                best = (theta, correct);
            }
        }
        best
    }

    fn arb_scored() -> impl Strategy<Value = (Vec<i64>, Vec<DomainLabel>)> {
        proptest::collection::vec((-15i64..15, any::<bool>()), 1..120).prop_map(|v| {
            v.into_iter()
                .map(|(s, g)| (s, if g { G } else { N }))
                .unzip()
        })
    }

    fn arb_labels(n: usize) -> impl Strategy<Value = Vec<DomainLabel>> {
        proptest::collection::vec(prop_oneof![Just(G), Just(N)], n)
    }

    proptest! {
        #[test]
        fn threshold_matches_sweep((scores, gold) in arb_scored()) {
            let fit = fit_threshold(&scores, &gold).unwrap();
            let (theta, correct) = brute_force_threshold(&scores, &gold);
            prop_assert_eq!(fit.threshold.0, theta);
            prop_assert_eq!(fit.correct as usize, correct);
        }

        #[test]
        fn calibration_peak_is_fit((scores, gold) in arb_scored()) {
            let fit = fit_threshold(&scores, &gold).unwrap();
            let lo = *scores.iter().min().unwrap();
            let hi = *scores.iter().max().unwrap() + 1;
            let curve = calibration_curve(&scores, &gold, lo, hi).unwrap();
            let best = curve.iter().map(|c| c.1).fold(0.0, f64::max);
            prop_assert_eq!(best, fit.accuracy);
            let at = curve.iter().find(|c| c.0 == fit.threshold.0).unwrap();
            prop_assert_eq!(at.1, fit.accuracy);
        }

        #[test]
        fn accuracy_is_exact((a, b) in (1usize..60).prop_flat_map(|n| (arb_labels(n), arb_labels(n)))) {
            let c = ConfusionCounts::from_labels(&a, &b).unwrap();
            let m = metrics(&c).unwrap();
            prop_assert_eq!(m.acc, (c.tp + c.tn) as f64 / c.total() as f64);
            if !m.recall_undefined && !m.precision_undefined && m.pre + m.rec > 0.0 {
                let harmonic = 2.0 * m.pre * m.rec / (m.pre + m.rec);
                prop_assert!((m.f - harmonic).abs() < 1e-12);
            }
        }

        #[test]
        fn kappa_symmetric((a, b) in (1usize..60).prop_flat_map(|n| (arb_labels(n), arb_labels(n)))) {
            prop_assert_eq!(cohen_kappa(&a, &b).unwrap(), cohen_kappa(&b, &a).unwrap());
        }

        #[test]
        fn mcnemar_swap_invariant((a, b, g) in (1usize..60).prop_flat_map(|n| (arb_labels(n), arb_labels(n), arb_labels(n)))) {
            let ab = mcnemar(&a, &b, &g).unwrap();
            let ba = mcnemar(&b, &a, &g).unwrap();
            prop_assert_eq!(ab.statistic, ba.statistic);
            prop_assert_eq!((ab.n01, ab.n10), (ba.n10, ba.n01));
        }
    }

    #[test]
    fn kappa_independent_raters_near_zero() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let a: Vec<_> = (0..n)
            .map(|_| if rng.gen_bool(0.3) { G } else { N })
            .collect();
        let b: Vec<_> = (0..n)
            .map(|_| if rng.gen_bool(0.6) { G } else { N })
            .collect();
        let k = cohen_kappa(&a, &b).unwrap().kappa.unwrap();
        assert!(k.abs() < 0.01, "{k}");
    }
}
