//! Vocabulary construction and TF-IDF document vectors.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scorer::csv_field;

/// Sorted term list with document frequencies over the collection it was
/// built from. Term indices follow the sorted order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<u64>,
    n_docs: u64,
    min_df: u64,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub(crate) fn from_parts(
        terms: Vec<String>,
        doc_freq: Vec<u64>,
        n_docs: u64,
        min_df: u64,
    ) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            terms,
            doc_freq,
            n_docs,
            min_df,
            index,
        }
    }

    /// Rebuilds the lookup table after deserialization.
    pub(crate) fn reindex(&mut self) {
        self.index = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, index: usize) -> u64 {
        self.doc_freq[index]
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn min_df(&self) -> u64 {
        self.min_df
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `ln(N / df)`.
    pub fn idf(&self, index: usize) -> f64 {
        (self.n_docs as f64 / self.doc_freq[index] as f64).ln()
    }
}

fn doc_freqs(docs: &[Vec<String>]) -> HashMap<&str, u64> {
    let mut df: HashMap<&str, u64> = HashMap::new();
    for doc in docs {
        let unique: HashSet<&str> = doc.iter().map(String::as_str).collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    df
}

/// Terms present in at least `min_df` documents. Document frequencies are
/// counted per shard and merged, then sorted, so the result does not depend
/// on the worker count.
pub fn build_vocabulary(docs: &[Vec<String>], min_df: u64) -> Vocabulary {
    let merged: BTreeMap<&str, u64> = docs
        .par_chunks(2048)
        .map(doc_freqs)
        .collect::<Vec<_>>()
        .into_iter()
        .fold(BTreeMap::new(), |mut acc, shard| {
            for (t, n) in shard {
                *acc.entry(t).or_default() += n;
            }
            acc
        });
    let (terms, doc_freq): (Vec<String>, Vec<u64>) = merged
        .into_iter()
        .filter(|&(_, n)| n >= min_df.max(1))
        .map(|(t, n)| (t.to_owned(), n))
        .unzip();
    Vocabulary::from_parts(terms, doc_freq, docs.len() as u64, min_df)
}

/// Raw in-vocabulary term counts, sorted by term index.
pub fn count_vector(doc: &[String], vocab: &Vocabulary) -> Vec<(usize, f64)> {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for t in doc {
        if let Some(i) = vocab.index_of(t) {
            *counts.entry(i).or_default() += 1.0;
        }
    }
    counts.into_iter().collect()
}

/// Sparse unit-length TF-IDF vector.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DocumentVector {
    pub id: String,
    /// `(term index, weight)` sorted by index; zero weights are kept out.
    pub entries: Vec<(usize, f64)>,
    /// No in-vocabulary term carried weight, so the vector is all zeros.
    pub zero: bool,
}

impl DocumentVector {
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }
}

/// `tf × ln(N/df)` per term, scaled to unit L2 norm. Documents whose weights
/// all vanish are returned empty and flagged.
pub fn tfidf_vectors<S: AsRef<str> + Sync>(
    ids: &[S],
    docs: &[Vec<String>],
    vocab: &Vocabulary,
) -> Vec<DocumentVector> {
    ids.par_iter()
        .zip(docs.par_iter())
        .map(|(id, doc)| {
            let mut entries: Vec<(usize, f64)> = count_vector(doc, vocab)
                .into_iter()
                .map(|(i, tf)| (i, tf * vocab.idf(i)))
                .filter(|&(_, w)| w != 0.0)
                .collect();
            let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                for e in &mut entries {
                    e.1 /= norm;
                }
            }
            DocumentVector {
                id: id.as_ref().to_owned(),
                zero: entries.is_empty(),
                entries,
            }
        })
        .collect()
}

/// `doc_id,term_index,weight` rows, one per non-zero entry.
pub fn write_vectors_csv<W: Write>(mut out: W, vectors: &[DocumentVector]) -> Result<()> {
    writeln!(out, "doc_id,term_index,weight")?;
    for v in vectors {
        for (i, w) in &v.entries {
            writeln!(out, "{},{},{}", csv_field(&v.id), i, w)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn docs(raw: &[&str]) -> Vec<Vec<String>> {
        raw.iter()
            .map(|d| d.split_whitespace().map(String::from).collect())
            .collect()
    }

    #[test]
    fn vocabulary_min_df() {
        let d = docs(&["a b c", "a b", "a d", "a e e", "a b"]);
        let v = build_vocabulary(&d, 2);
        assert_eq!(v.terms(), ["a", "b"]);
        assert_eq!(v.doc_freq(0), 5);
        assert_eq!(v.doc_freq(1), 3);
        let all = build_vocabulary(&d, 1);
        assert_eq!(all.terms(), ["a", "b", "c", "d", "e"]);
        assert_eq!(all.doc_freq(4), 1, "repeats within a document count once");
    }

    #[test]
    fn tfidf_weights() {
        let d = docs(&["a b b", "a c", "a b"]);
        let v = build_vocabulary(&d, 1);
        let ids = ["x", "y", "z"];
        let vs = tfidf_vectors(&ids, &d, &v);
        // "a" is in every document: idf 0
        assert_eq!(vs[0].weight(0), 0.0);
        // only "b" survives in x and z, so its weight normalizes to 1
        assert_eq!(vs[0].entries, vec![(1, 1.0)]);
        assert_eq!(vs[2].entries, vec![(1, 1.0)]);
        let empty = tfidf_vectors(&["w"], &docs(&["a a"]), &v);
        assert!(empty[0].zero && empty[0].entries.is_empty());
    }

    #[test]
    fn tfidf_mixed_weights() {
        let d = docs(&["b b c", "a", "a b"]);
        let v = build_vocabulary(&d, 1);
        let vs = tfidf_vectors(&["1", "2", "3"], &d, &v);
        let wb = 2.0 * (1.5f64).ln();
        let wc = (3.0f64).ln();
        let n = (wb * wb + wc * wc).sqrt();
        assert!((vs[0].weight(1) - wb / n).abs() < 1e-15);
        assert!((vs[0].weight(2) - wc / n).abs() < 1e-15);
    }

    #[test]
    fn csv_dump() {
        let d = docs(&["a b", "b c", "c a"]);
        let v = build_vocabulary(&d, 1);
        let vs = tfidf_vectors(&["p,1", "q", "r"], &d, &v);
        let mut buf = Vec::new();
        write_vectors_csv(&mut buf, &vs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("doc_id,term_index,weight\n\"p,1\",0,"));
        assert_eq!(text.lines().count(), 7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn unit_norm(raw in proptest::collection::vec(
            proptest::collection::vec("[a-f]", 0..12), 1..40)) {
            let ids: Vec<String> = (0..raw.len()).map(|i| i.to_string()).collect();
            let v = build_vocabulary(&raw, 1);
            for dv in tfidf_vectors(&ids, &raw, &v) {
                if dv.zero {
                    prop_assert_eq!(dv.norm(), 0.0);
                } else {
                    prop_assert!((dv.norm() - 1.0).abs() < 1e-9);
                }
                prop_assert!(dv.entries.windows(2).all(|w| w[0].0 < w[1].0));
            }
        }

        #[test]
        fn shard_independent(raw in proptest::collection::vec(
            proptest::collection::vec("[a-z]{1,2}", 0..6), 0..3000), min_df in 1u64..4) {
            let v = build_vocabulary(&raw, min_df);
            let serial = doc_freqs(&raw);
            let mut expect: Vec<(&str, u64)> =
                serial.into_iter().filter(|&(_, n)| n >= min_df).collect();
            expect.sort();
            let got: Vec<(&str, u64)> =
                v.terms().iter().map(String::as_str).zip((0..v.len()).map(|i| v.doc_freq(i))).collect();
            prop_assert_eq!(got, expect);
        }
    }
}
