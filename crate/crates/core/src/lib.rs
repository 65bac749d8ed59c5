//! Two-class document triage by chi-square indicator descriptors.
//!
//! Descriptor frequencies are compared between a positive and a negative
//! corpus; every descriptor whose 2×2 chi-square statistic clears the
//! critical value becomes a signed indicator, and a document's score is the
//! sum of the signs of its descriptors. A cross-validated threshold turns
//! scores into labels. A multinomial naive Bayes text pipeline is included
//! as a comparison baseline.

pub mod chisq;
pub mod contingency;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod scorer;
pub mod synth;
pub mod text;

pub use chisq::{build_indicator_profile, chi_square, indicator_of, pvalue_chisq_df1};
pub use chisq::{ChiSquareResult, Indicator, IndicatorProfile, Sign};
pub use contingency::{build_profile, expected, ContingencyTable, ExpectedTable, FrequencyProfile};
pub use corpus::{
    Citation, DomainLabel, ErrorPolicy, ExclusionList, FoldAssignment, ReferenceList,
};
pub use error::{Error, Result};
pub use scorer::{classify, score_citation, score_corpus, ScoreReport, Threshold};

/// Version string stamped into every persisted artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Critical value of the chi-square distribution with one degree of freedom
/// at the 0.05 level.
pub const DEFAULT_CRITICAL_VALUE: f64 = 3.84;
