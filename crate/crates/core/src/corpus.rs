//! Citation corpora: parsing (MEDLINE XML, JSONL, relational TSV), labeling
//! against a reference list, descriptor exclusion and fold splitting.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use quick_xml::events::Event;
use quick_xml::Reader;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The two domains a citation can belong to. `Genetic` is the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainLabel {
    Genetic,
    NonGenetic,
}

impl DomainLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainLabel::Genetic => "genetic",
            DomainLabel::NonGenetic => "nongenetic",
        }
    }

    pub fn is_positive(self) -> bool {
        self == DomainLabel::Genetic
    }

    pub fn other(self) -> Self {
        match self {
            DomainLabel::Genetic => DomainLabel::NonGenetic,
            DomainLabel::NonGenetic => DomainLabel::Genetic,
        }
    }
}

impl fmt::Display for DomainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DomainLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "genetic" | "positive" | "pos" | "1" => Ok(DomainLabel::Genetic),
            "nongenetic" | "negative" | "neg" | "0" => Ok(DomainLabel::NonGenetic),
            other => Err(Error::InvalidArgument(format!("unknown label {other:?}"))),
        }
    }
}

/// One document: identifier, free text and its descriptor set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract", default, skip_serializing_if = "Option::is_none")]
    pub abstract_text: Option<String>,
    #[serde(default)]
    pub descriptors: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<DomainLabel>,
}

impl Citation {
    pub fn new(id: impl Into<String>) -> Self {
        Citation {
            id: id.into(),
            title: String::new(),
            abstract_text: None,
            descriptors: BTreeSet::new(),
            label: None,
        }
    }

    pub fn with_descriptors<I, S>(mut self, descriptors: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for d in descriptors {
            insert_descriptor(&mut self.descriptors, d.as_ref());
        }
        self
    }

    pub fn with_label(mut self, label: DomainLabel) -> Self {
        self.label = Some(label);
        self
    }
}

fn insert_descriptor(set: &mut BTreeSet<String>, raw: &str) {
    let name = raw.trim();
    if !name.is_empty() && !set.contains(name) {
        set.insert(name.to_owned());
    }
}

/// How record-level problems are handled while parsing a stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ErrorPolicy {
    #[default]
    FailFast,
    SkipAndReport,
}

/// Parsed citations plus the record-level errors that were skipped.
#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub citations: Vec<Citation>,
    pub errors: Vec<Error>,
}

impl ParseOutcome {
    fn push(&mut self, item: Result<Citation>, policy: ErrorPolicy) -> Result<()> {
        match item {
            Ok(c) => self.citations.push(c),
            Err(e) if policy == ErrorPolicy::SkipAndReport => self.errors.push(e),
            Err(e) => return Err(e),
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// MEDLINE XML

/// Streaming reader over `MedlineCitation` records.
///
/// Only the PMID, article title, abstract text and MeSH descriptor names are
/// extracted. Memory use is bounded by the size of a single record.
pub struct MedlineReader<R: BufRead> {
    reader: Reader<R>,
    buf: Vec<u8>,
    record_index: usize,
    seen: HashSet<String>,
    done: bool,
}

#[derive(Default)]
struct RecordState {
    start: u64,
    pmid: String,
    title: String,
    abstract_parts: Vec<String>,
    current_abstract: Option<String>,
    descriptors: BTreeSet<String>,
    current_descriptor: Option<String>,
    // element names below the MedlineCitation element
    path: Vec<Vec<u8>>,
}

impl RecordState {
    fn in_element(&self, name: &[u8]) -> bool {
        self.path.iter().any(|n| n == name)
    }

    fn text(&mut self, text: &str) {
        if self.path.len() == 1 && self.path[0] == b"PMID" {
            self.pmid.push_str(text);
        } else if self.in_element(b"ArticleTitle") && self.in_element(b"Article") {
            self.title.push_str(text);
        } else if let Some(buf) = self.current_abstract.as_mut() {
            buf.push_str(text);
        } else if let Some(buf) = self.current_descriptor.as_mut() {
            buf.push_str(text);
        }
    }
}

const RECORD: &[u8] = b"MedlineCitation";

impl<R: BufRead> MedlineReader<R> {
    pub fn new(input: R) -> Self {
        let mut reader = Reader::from_reader(input);
        reader.config_mut().expand_empty_elements = true;
        MedlineReader {
            reader,
            buf: Vec::new(),
            record_index: 0,
            seen: HashSet::new(),
            done: false,
        }
    }

    fn xml_error(&self, message: impl fmt::Display) -> Error {
        Error::Xml {
            offset: self.reader.buffer_position(),
            message: message.to_string(),
        }
    }

    fn next_record(&mut self) -> Result<Option<Citation>> {
        let mut record: Option<RecordState> = None;
        loop {
            self.buf.clear();
            let event = self
                .reader
                .read_event_into(&mut self.buf)
                .map_err(|e| Error::Xml {
                    offset: self.reader.error_position(),
                    message: e.to_string(),
                })?;
            match event {
                Event::Start(e) => {
                    let name = e.name().as_ref().to_vec();
                    match record.as_mut() {
                        None if name == RECORD => {
                            record = Some(RecordState {
                                start: self.reader.buffer_position(),
                                ..Default::default()
                            })
                        }
                        None => {}
                        Some(state) => {
                            match name.as_slice() {
                                b"AbstractText"
                                    if state.in_element(b"Abstract")
                                        && !state.in_element(b"OtherAbstract") =>
                                {
                                    state.current_abstract = Some(String::new())
                                }
                                b"DescriptorName" if state.in_element(b"MeshHeading") => {
                                    state.current_descriptor = Some(String::new())
                                }
                                _ => {}
                            }
                            state.path.push(name);
                        }
                    }
                }
                Event::End(e) => {
                    let Some(state) = record.as_mut() else {
                        continue;
                    };
                    if state.path.is_empty() {
                        // closing MedlineCitation
                        debug_assert_eq!(e.name().as_ref(), RECORD);
                        let state = record.take().unwrap_or_default();
                        return self.finish_record(state).map(Some);
                    }
                    let name = state.path.pop().unwrap_or_default();
                    match name.as_slice() {
                        b"AbstractText" => {
                            if let Some(text) = state.current_abstract.take() {
                                let text = text.trim();
                                if !text.is_empty() {
                                    state.abstract_parts.push(text.to_owned());
                                }
                            }
                        }
                        b"DescriptorName" => {
                            if let Some(text) = state.current_descriptor.take() {
                                insert_descriptor(&mut state.descriptors, &text);
                            }
                        }
                        _ => {}
                    }
                }
                Event::Text(t) => {
                    if let Some(state) = record.as_mut() {
                        let offset = self.reader.buffer_position();
                        let text = t.unescape().map_err(|e| Error::Xml {
                            offset,
                            message: e.to_string(),
                        })?;
                        state.text(&text);
                    }
                }
                Event::CData(t) => {
                    if let Some(state) = record.as_mut() {
                        let text = String::from_utf8_lossy(&t.into_inner()).into_owned();
                        state.text(&text);
                    }
                }
                Event::Eof => {
                    if record.is_some() {
                        return Err(self.xml_error("unexpected end of input inside a record"));
                    }
                    return Ok(None);
                }
                _ => {}
            }
        }
    }

    fn finish_record(&mut self, state: RecordState) -> Result<Citation> {
        let index = self.record_index;
        self.record_index += 1;
        let id = state.pmid.trim().to_owned();
        let record_error = |message: &str| Error::Record {
            index,
            offset: state.start,
            message: message.to_owned(),
        };
        if id.is_empty() {
            return Err(record_error("missing citation id"));
        }
        if !self.seen.insert(id.clone()) {
            return Err(record_error(&format!("duplicate citation id {id}")));
        }
        let abstract_text = if state.abstract_parts.is_empty() {
            None
        } else {
            Some(state.abstract_parts.join(" "))
        };
        Ok(Citation {
            id,
            title: state.title.trim().to_owned(),
            abstract_text,
            descriptors: state.descriptors,
            label: None,
        })
    }
}

impl<R: BufRead> Iterator for MedlineReader<R> {
    type Item = Result<Citation>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(c)) => Some(Ok(c)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                // a broken stream cannot be resynchronised
                if matches!(e, Error::Xml { .. } | Error::Io(_)) {
                    self.done = true;
                }
                Some(Err(e))
            }
        }
    }
}

/// Parse a MEDLINE XML stream into citations, in document order.
///
/// Malformed XML is always fatal. Records without an id (or repeating an
/// earlier id) are fatal under [`ErrorPolicy::FailFast`] and collected in
/// [`ParseOutcome::errors`] under [`ErrorPolicy::SkipAndReport`].
pub fn parse_medline_xml<R: BufRead>(input: R, policy: ErrorPolicy) -> Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    for item in MedlineReader::new(input) {
        if let Err(e @ (Error::Xml { .. } | Error::Io(_))) = item {
            return Err(e);
        }
        out.push(item, policy)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// JSONL

#[derive(Deserialize)]
struct JsonRecord {
    id: Option<String>,
    #[serde(default)]
    title: Option<String>,
    #[serde(rename = "abstract", default)]
    abstract_text: Option<String>,
    #[serde(default)]
    descriptors: Vec<String>,
    #[serde(default)]
    label: Option<DomainLabel>,
}

fn parse_json_line(line: &str, line_no: usize) -> Result<Citation> {
    let record: JsonRecord =
        serde_json::from_str(line).map_err(|e| Error::line(line_no, e.to_string()))?;
    let id = match record.id {
        Some(id) if !id.trim().is_empty() => id.trim().to_owned(),
        _ => return Err(Error::line(line_no, "missing id")),
    };
    Ok(Citation {
        id,
        title: record.title.unwrap_or_default(),
        abstract_text: record.abstract_text,
        descriptors: BTreeSet::new(),
        label: record.label,
    }
    .with_descriptors(&record.descriptors))
}

/// Parse the canonical JSONL citation format (one object per line).
pub fn parse_jsonl<R: BufRead>(input: R, policy: ErrorPolicy) -> Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    let mut seen = HashSet::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = parse_json_line(&line, line_no).and_then(|c| {
            if seen.insert(c.id.clone()) {
                Ok(c)
            } else {
                Err(Error::line(line_no, format!("duplicate id {}", c.id)))
            }
        });
        out.push(item, policy)?;
    }
    Ok(out)
}

/// Write citations as canonical JSONL, one object per line.
pub fn write_jsonl<W: Write>(mut out: W, citations: &[Citation]) -> Result<()> {
    for c in citations {
        serde_json::to_writer(&mut out, c).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// relational TSV

/// Parse `id<TAB>descriptor` rows. Rows sharing an id are merged into one
/// citation; citations appear in order of first occurrence.
pub fn parse_tsv<R: BufRead>(input: R, policy: ErrorPolicy) -> Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    let mut index_of: HashMap<String, usize> = HashMap::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or("").trim();
        let descriptor = fields.next();
        let item = if id.is_empty() {
            Err(Error::line(line_no, "missing id"))
        } else if fields.next().is_some() {
            Err(Error::line(
                line_no,
                "expected at most two tab-separated columns",
            ))
        } else {
            Ok((id, descriptor))
        };
        match item {
            Ok((id, descriptor)) => {
                let slot = *index_of.entry(id.to_owned()).or_insert_with(|| {
                    out.citations.push(Citation::new(id));
                    out.citations.len() - 1
                });
                if let Some(d) = descriptor {
                    insert_descriptor(&mut out.citations[slot].descriptors, d);
                }
            }
            Err(e) => out.push(Err(e), policy)?,
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// reference and exclusion lists

/// Set of citation ids forming the positive (genetic) corpus.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReferenceList {
    ids: HashSet<String>,
}

impl ReferenceList {
    /// Read ids from `column` (1-based) of each line. Columns are split on
    /// tabs or runs of whitespace; blank lines and `#` comments are skipped,
    /// as is any line whose selected column is missing.
    pub fn read<R: BufRead>(input: R, column: usize) -> Result<Self> {
        if column == 0 {
            return Err(Error::InvalidArgument("reference column is 1-based".into()));
        }
        let mut ids = HashSet::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(id) = line.split_whitespace().nth(column - 1) {
                ids.insert(id.to_owned());
            }
        }
        Ok(ReferenceList { ids })
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.contains(id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for ReferenceList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        ReferenceList {
            ids: iter.into_iter().map(Into::into).collect(),
        }
    }
}

/// Descriptors removed before counting and scoring (check tags).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExclusionList {
    descriptors: HashSet<String>,
}

const DEFAULT_CHECK_TAGS: &str = include_str!("../assets/check_tags.txt");

impl ExclusionList {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The bundled MEDLINE check-tag list.
    pub fn check_tags() -> Self {
        Self::read(DEFAULT_CHECK_TAGS.as_bytes()).expect("bundled list is valid")
    }

    /// One descriptor per line; blank lines and `#` comments are ignored.
    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut descriptors = HashSet::new();
        for line in input.lines() {
            let line = line?;
            let name = line.trim();
            if !name.is_empty() && !name.starts_with('#') {
                descriptors.insert(name.to_owned());
            }
        }
        Ok(ExclusionList { descriptors })
    }

    pub fn contains(&self, descriptor: &str) -> bool {
        self.descriptors.contains(descriptor.trim())
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for ExclusionList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        ExclusionList {
            descriptors: iter
                .into_iter()
                .map(|s| s.into().trim().to_owned())
                .collect(),
        }
    }
}

/// Label every citation: `Genetic` iff its id is on the reference list.
pub fn label_by_reference(citations: &mut [Citation], reference: &ReferenceList) {
    for c in citations {
        c.label = Some(if reference.contains(&c.id) {
            DomainLabel::Genetic
        } else {
            DomainLabel::NonGenetic
        });
    }
}

pub fn apply_exclusion(citation: &Citation, exclusion: &ExclusionList) -> Citation {
    let mut out = citation.clone();
    if !exclusion.is_empty() {
        out.descriptors.retain(|d| !exclusion.contains(d));
    }
    out
}

// ---------------------------------------------------------------------------
// folds

/// Assignment of each citation (by position) to one of `k` folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    ids: Vec<String>,
    fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, index: usize) -> usize {
        self.fold_of[index]
    }

    pub fn fold_of_id(&self, id: &str) -> Option<usize> {
        self.ids
            .iter()
            .position(|x| x == id)
            .map(|i| self.fold_of[i])
    }

    pub fn len(&self) -> usize {
        self.fold_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fold_of.is_empty()
    }

    /// Positions (in input order) of the citations held out in `fold`.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded uniform shuffle followed by round-robin assignment, so fold sizes
/// differ by at most one.
pub fn split_folds(citations: &[Citation], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "k must be at least 2, got {k}"
        )));
    }
    if k > citations.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the number of citations ({})",
            citations.len()
        )));
    }
    let mut order: Vec<usize> = (0..citations.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut fold_of = vec![0; citations.len()];
    for (slot, &index) in order.iter().enumerate() {
        fold_of[index] = slot % k;
    }
    Ok(FoldAssignment {
        k,
        seed,
        ids: citations.iter().map(|c| c.id.clone()).collect(),
        fold_of,
    })
}
