//! Seeded synthetic corpora with planted indicator descriptors.
//!
//! Each citation draws a number of descriptor slots. A slot holds a planted
//! descriptor of the citation's own class with probability `in_class_rate`,
//! one of the opposite class with probability `out_class_rate`, and a
//! background descriptor otherwise. Some citations also carry check tags so
//! that exclusion lists have something to remove.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chisq::{IndicatorProfile, Sign};
use crate::corpus::{Citation, DomainLabel, ExclusionList};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub citations: usize,
    pub genetic_fraction: f64,
    pub planted_positive: usize,
    pub planted_negative: usize,
    pub in_class_rate: f64,
    pub out_class_rate: f64,
    pub background: usize,
    /// Descriptor slots per citation are uniform on
    /// `[mean_descriptors - spread, mean_descriptors + spread]`.
    pub mean_descriptors: usize,
    pub spread: usize,
    /// Probability that a citation also carries each of a few check tags.
    pub check_tag_rate: f64,
    /// Emit titles and abstracts built from class-flavoured word lists.
    pub with_text: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            citations: 5_000,
            genetic_fraction: 0.3,
            planted_positive: 50,
            planted_negative: 50,
            in_class_rate: 0.4,
            out_class_rate: 0.05,
            background: 2_000,
            mean_descriptors: 12,
            spread: 4,
            check_tag_rate: 0.3,
            with_text: true,
            seed: 1,
        }
    }
}

pub fn positive_descriptor(i: usize) -> String {
    format!("Planted Positive {i:03}")
}

pub fn negative_descriptor(i: usize) -> String {
    format!("Planted Negative {i:03}")
}

pub fn background_descriptor(i: usize) -> String {
    format!("Background {i:05}")
}

const CHECK_TAGS: &[&str] = &["Humans", "Animals", "Female", "Male", "Adult", "Mice"];

const GENETIC_WORDS: &[&str] = &[
    "allele",
    "mutation",
    "locus",
    "genotype",
    "sequencing",
    "polymorphism",
    "chromosome",
    "transcription",
    "exon",
    "promoter",
    "heritability",
    "linkage",
    "haplotype",
    "genome",
];
const NONGENETIC_WORDS: &[&str] = &[
    "fracture",
    "surgery",
    "dosage",
    "outcome",
    "rehabilitation",
    "infection",
    "pain",
    "hospital",
    "therapy",
    "injury",
    "nursing",
    "diet",
    "exercise",
    "imaging",
];
const SHARED_WORDS: &[&str] = &[
    "patients",
    "study",
    "results",
    "analysis",
    "clinical",
    "cells",
    "effect",
    "levels",
    "group",
    "response",
    "increased",
    "observed",
    "associated",
    "role",
    "model",
    "data",
];

fn sentence(rng: &mut ChaCha8Rng, own: &[&str], other: &[&str], len: usize) -> String {
    let words: Vec<&str> = (0..len)
        .map(|_| {
            let u: f64 = rng.gen();
            let pool = if u < 0.3 {
                own
            } else if u < 0.35 {
                other
            } else {
                SHARED_WORDS
            };
            *pool.choose(rng).expect("word lists are non-empty")
        })
        .collect();
    words.join(" ")
}

/// Labeled synthetic corpus; identical for identical configurations.
pub fn generate(config: &SynthConfig) -> Vec<Citation> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let positives: Vec<String> = (0..config.planted_positive)
        .map(positive_descriptor)
        .collect();
    let negatives: Vec<String> = (0..config.planted_negative)
        .map(negative_descriptor)
        .collect();
    let background: Vec<String> = (0..config.background).map(background_descriptor).collect();
    let lo = config.mean_descriptors.saturating_sub(config.spread).max(1);
    let hi = config.mean_descriptors + config.spread;
    (0..config.citations)
        .map(|i| {
            let label = if rng.gen_bool(config.genetic_fraction) {
                DomainLabel::Genetic
            } else {
                DomainLabel::NonGenetic
            };
            let (own, other) = match label {
                DomainLabel::Genetic => (&positives, &negatives),
                DomainLabel::NonGenetic => (&negatives, &positives),
            };
            let slots = rng.gen_range(lo..=hi);
            let mut descriptors = Vec::with_capacity(slots + CHECK_TAGS.len());
            for _ in 0..slots {
                let u: f64 = rng.gen();
                let pool = if u < config.in_class_rate {
                    own
                } else if u < config.in_class_rate + config.out_class_rate {
                    other
                } else {
                    &background
                };
                if let Some(d) = pool.choose(&mut rng) {
                    descriptors.push(d.as_str());
                }
            }
            for tag in CHECK_TAGS {
                if rng.gen_bool(config.check_tag_rate) {
                    descriptors.push(tag);
                }
            }
            let mut c = Citation::new(format!("S{:07}", i + 1))
                .with_descriptors(descriptors)
                .with_label(label);
            if config.with_text {
                let (own_w, other_w) = match label {
                    DomainLabel::Genetic => (GENETIC_WORDS, NONGENETIC_WORDS),
                    DomainLabel::NonGenetic => (NONGENETIC_WORDS, GENETIC_WORDS),
                };
                c.title = sentence(&mut rng, own_w, other_w, 8);
                c.abstract_text = Some(sentence(&mut rng, own_w, other_w, 60));
            }
            c
        })
        .collect()
}

/// The check tags the generator may attach.
pub fn generator_check_tags() -> ExclusionList {
    CHECK_TAGS.iter().copied().collect()
}

/// Unlabeled citations with exactly `per_citation` distinct descriptors each,
/// drawn uniformly from a vocabulary of `vocabulary` names.
pub fn bulk_citations(
    n: usize,
    per_citation: usize,
    vocabulary: usize,
    seed: u64,
) -> Vec<Citation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..vocabulary).map(|i| format!("D{i:06}")).collect();
    (0..n)
        .map(|i| {
            let picks =
                rand::seq::index::sample(&mut rng, vocabulary, per_citation.min(vocabulary));
            Citation::new(format!("B{:08}", i + 1))
                .with_descriptors(picks.iter().map(|j| &names[j]))
        })
        .collect()
}

/// Random signs for the first `entries` names of the [`bulk_citations`]
/// vocabulary.
pub fn bulk_profile(entries: usize, seed: u64) -> IndicatorProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    IndicatorProfile::from_signs((0..entries).map(|i| {
        let sign = if rng.gen_bool(0.5) {
            Sign::Positive
        } else {
            Sign::Negative
        };
        (format!("D{i:06}"), sign)
    }))
}
