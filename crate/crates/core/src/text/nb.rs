//! Multinomial naive Bayes over term counts with Laplace smoothing.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stem::StemmerKind;
use super::vocab::{build_vocabulary, count_vector, Vocabulary};
use super::{FieldSelector, PipelineConfig, StopwordList};
use crate::corpus::{Citation, DomainLabel, FoldAssignment};
use crate::error::{Error, Result};
use crate::eval::gold_labels;

const MODEL_FORMAT: &str = "chisq-triage-naive-bayes";
const MODEL_FORMAT_VERSION: u32 = 1;

/// Class parameters; index 0 is genetic, 1 nongenetic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    pub alpha: f64,
    pub log_prior: [f64; 2],
    pub log_likelihood: [Vec<f64>; 2],
}

fn class_index(label: DomainLabel) -> usize {
    match label {
        DomainLabel::Genetic => 0,
        DomainLabel::NonGenetic => 1,
    }
}

impl NaiveBayes {
    /// `P(t|c) = (n_tc + alpha) / (n_c + alpha·|V|)`, priors from document
    /// counts. Both classes must be present.
    pub fn train(
        docs: &[Vec<(usize, f64)>],
        labels: &[DomainLabel],
        vocab_size: usize,
        alpha: f64,
    ) -> Result<Self> {
        if docs.len() != labels.len() {
            return Err(Error::Alignment(format!(
                "{} documents but {} labels",
                docs.len(),
                labels.len()
            )));
        }
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        let mut n_docs = [0u64; 2];
        let mut counts = [vec![0.0; vocab_size], vec![0.0; vocab_size]];
        for (doc, &label) in docs.iter().zip(labels) {
            let c = class_index(label);
            n_docs[c] += 1;
            for &(i, x) in doc {
                counts[c][i] += x;
            }
        }
        if n_docs.contains(&0) {
            return Err(Error::Model(
                "training data must contain both classes".into(),
            ));
        }
        let total = (n_docs[0] + n_docs[1]) as f64;
        let log_prior = [
            (n_docs[0] as f64 / total).ln(),
            (n_docs[1] as f64 / total).ln(),
        ];
        let log_likelihood = counts.map(|row| {
            let denom = (row.iter().sum::<f64>() + alpha * vocab_size as f64).ln();
            row.into_iter().map(|n| (n + alpha).ln() - denom).collect()
        });
        Ok(NaiveBayes {
            alpha,
            log_prior,
            log_likelihood,
        })
    }

    /// `log P(genetic | d) - log P(nongenetic | d)` up to the shared evidence term.
    pub fn log_odds(&self, doc: &[(usize, f64)]) -> f64 {
        let mut s = [self.log_prior[0], self.log_prior[1]];
        for &(i, x) in doc {
            s[0] += x * self.log_likelihood[0][i];
            s[1] += x * self.log_likelihood[1][i];
        }
        s[0] - s[1]
    }

    /// Ties go to the nongenetic class.
    pub fn predict(&self, doc: &[(usize, f64)]) -> (DomainLabel, f64) {
        let odds = self.log_odds(doc);
        let label = if odds > 0.0 {
            DomainLabel::Genetic
        } else {
            DomainLabel::NonGenetic
        };
        (label, odds)
    }
}

/// Naive Bayes together with the text pipeline that feeds it.
#[derive(Clone, Debug)]
pub struct TextClassifier {
    pub config: PipelineConfig,
    pub vocabulary: Vocabulary,
    pub model: NaiveBayes,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    format_version: u32,
    version: String,
    field: FieldSelector,
    stemmer: StemmerKind,
    min_df: u64,
    stopwords: Vec<String>,
    vocabulary: Vocabulary,
    model: NaiveBayes,
}

impl TextClassifier {
    pub fn fit(citations: &[Citation], config: PipelineConfig, alpha: f64) -> Result<Self> {
        let labels = gold_labels(citations)?;
        let tokens: Vec<Vec<String>> = citations.par_iter().map(|c| config.tokens(c)).collect();
        Self::fit_tokens(&tokens, &labels, config, alpha)
    }

    fn fit_tokens(
        tokens: &[Vec<String>],
        labels: &[DomainLabel],
        config: PipelineConfig,
        alpha: f64,
    ) -> Result<Self> {
        let vocabulary = build_vocabulary(tokens, config.min_df);
        let counts: Vec<_> = tokens
            .par_iter()
            .map(|t| count_vector(t, &vocabulary))
            .collect();
        let model = NaiveBayes::train(&counts, labels, vocabulary.len(), alpha)?;
        Ok(TextClassifier {
            config,
            vocabulary,
            model,
        })
    }

    pub fn predict(&self, citation: &Citation) -> (DomainLabel, f64) {
        self.predict_tokens(&self.config.tokens(citation))
    }

    fn predict_tokens(&self, tokens: &[String]) -> (DomainLabel, f64) {
        self.model.predict(&count_vector(tokens, &self.vocabulary))
    }

    pub fn predict_all(&self, citations: &[Citation]) -> Vec<(DomainLabel, f64)> {
        citations.par_iter().map(|c| self.predict(c)).collect()
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        let mut stopwords: Vec<String> = self.config.stopwords.iter().map(str::to_owned).collect();
        stopwords.sort();
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            format_version: MODEL_FORMAT_VERSION,
            version: crate::VERSION.into(),
            field: self.config.field,
            stemmer: self.config.stemmer,
            min_df: self.config.min_df,
            stopwords,
            vocabulary: self.vocabulary.clone(),
            model: self.model.clone(),
        };
        serde_json::to_writer_pretty(out, &file).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_reader(input).map_err(|e| Error::Model(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported model format {} v{}",
                file.format, file.format_version
            )));
        }
        let mut vocabulary = file.vocabulary;
        vocabulary.reindex();
        let n = vocabulary.len();
        if file.model.log_likelihood.iter().any(|row| row.len() != n) {
            return Err(Error::Model(
                "likelihood table does not match vocabulary".into(),
            ));
        }
        Ok(TextClassifier {
            config: PipelineConfig {
                field: file.field,
                stemmer: file.stemmer,
                min_df: file.min_df,
                stopwords: file.stopwords.into_iter().collect::<StopwordList>(),
            },
            vocabulary,
            model: file.model,
        })
    }
}

/// Out-of-fold naive Bayes predictions aligned with `citations`. Vocabulary
/// and parameters are rebuilt from each fold's training part.
pub fn nb_cross_validate(
    citations: &[Citation],
    folds: &FoldAssignment,
    config: &PipelineConfig,
    alpha: f64,
) -> Result<Vec<(DomainLabel, f64)>> {
    if folds.len() != citations.len() {
        return Err(Error::Alignment(format!(
            "fold assignment covers {} citations, corpus has {}",
            folds.len(),
            citations.len()
        )));
    }
    let labels = gold_labels(citations)?;
    let tokens: Vec<Vec<String>> = citations.par_iter().map(|c| config.tokens(c)).collect();
    let mut out = vec![(DomainLabel::NonGenetic, 0.0); citations.len()];
    for fold in 0..folds.k {
        let train = folds.train_indices(fold);
        let train_tokens: Vec<Vec<String>> = train.iter().map(|&i| tokens[i].clone()).collect();
        let train_labels: Vec<DomainLabel> = train.iter().map(|&i| labels[i]).collect();
        let clf = TextClassifier::fit_tokens(&train_tokens, &train_labels, config.clone(), alpha)?;
        for i in folds.test_indices(fold) {
            out[i] = clf.predict_tokens(&tokens[i]);
        }
    }
    Ok(out)
}
