//! Text pipeline for the naive Bayes baseline: tokenization, stopword
//! removal, stemming, vocabulary, TF-IDF vectors and the classifier itself.

pub mod nb;
pub mod stem;
pub mod vocab;

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Citation;
use crate::error::{Error, Result};

pub use nb::{nb_cross_validate, NaiveBayes, TextClassifier};
pub use stem::{lovins_stem, Stemmer, StemmerKind};
pub use vocab::{
    build_vocabulary, count_vector, tfidf_vectors, write_vectors_csv, DocumentVector, Vocabulary,
};

const SMART_STOPWORDS: &str = include_str!("../../assets/smart_stopwords.txt");

/// Which part of a citation becomes the document.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldSelector {
    Title,
    Abstract,
    #[default]
    TitleAbstract,
    /// Each descriptor string is a single token; no stopwords or stemming.
    Descriptors,
}

impl FromStr for FieldSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "title" => Ok(FieldSelector::Title),
            "abstract" => Ok(FieldSelector::Abstract),
            "title-abstract" | "title+abstract" => Ok(FieldSelector::TitleAbstract),
            "descriptors" | "mesh" => Ok(FieldSelector::Descriptors),
            other => Err(Error::InvalidArgument(format!(
                "unknown text field {other:?}"
            ))),
        }
    }
}

impl fmt::Display for FieldSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldSelector::Title => "title",
            FieldSelector::Abstract => "abstract",
            FieldSelector::TitleAbstract => "title-abstract",
            FieldSelector::Descriptors => "descriptors",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    /// The SMART list (570 distinct words).
    pub fn smart() -> Self {
        SMART_STOPWORDS.lines().collect()
    }

    pub fn empty() -> Self {
        StopwordList {
            words: HashSet::new(),
        }
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut words = HashSet::new();
        for line in input.lines() {
            let line = line?;
            let w = line.trim();
            if !w.is_empty() && !w.starts_with('#') {
                words.insert(w.to_lowercase());
            }
        }
        Ok(StopwordList { words })
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl<S: AsRef<str>> FromIterator<S> for StopwordList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        StopwordList {
            words: iter
                .into_iter()
                .map(|s| s.as_ref().trim().to_lowercase())
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub field: FieldSelector,
    pub stopwords: StopwordList,
    pub stemmer: StemmerKind,
    /// Terms occurring in fewer training documents are dropped.
    pub min_df: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            field: FieldSelector::TitleAbstract,
            stopwords: StopwordList::smart(),
            stemmer: StemmerKind::Lovins,
            min_df: 2,
        }
    }
}

impl PipelineConfig {
    pub fn descriptors() -> Self {
        PipelineConfig {
            field: FieldSelector::Descriptors,
            ..Default::default()
        }
    }

    /// Token stream of one citation under this configuration.
    pub fn tokens(&self, citation: &Citation) -> Vec<String> {
        let text = match self.field {
            FieldSelector::Descriptors => return citation.descriptors.iter().cloned().collect(),
            FieldSelector::Title => citation.title.clone(),
            FieldSelector::Abstract => citation.abstract_text.clone().unwrap_or_default(),
            FieldSelector::TitleAbstract => match &citation.abstract_text {
                Some(a) => format!("{} {}", citation.title, a),
                None => citation.title.clone(),
            },
        };
        let stemmer = self.stemmer.stemmer();
        tokenize(&text)
            .filter(|t| !self.stopwords.contains(t))
            .map(|t| stemmer.stem(&t))
            .collect()
    }
}

/// Lowercased maximal runs of alphanumeric characters. Tokens made only of
/// digits are dropped.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !t.chars().all(|c| c.is_ascii_digit()))
        .map(str::to_lowercase)
}
