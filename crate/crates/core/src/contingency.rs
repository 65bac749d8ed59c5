//! Per-class descriptor frequency profiles and the 2×2 tables built from them.
//!
//! Rows of a table are descriptor presence / absence, columns are the
//! genetic (positive) and nongenetic (negative) corpora:
//!
//! ```text
//!              genetic   nongenetic
//! present        o11        o12       r1
//! absent         o21        o22       r2
//!                c1         c2        n
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::corpus::{Citation, DomainLabel, ExclusionList};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct DescriptorCounts {
    pub genetic: u64,
    pub nongenetic: u64,
}

/// Number of citations per class containing each descriptor, plus class sizes.
///
/// Profiles form a commutative monoid under [`FrequencyProfile::merge`], so a
/// corpus can be counted in shards and merged in any order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrequencyProfile {
    counts: BTreeMap<String, DescriptorCounts>,
    genetic_total: u64,
    nongenetic_total: u64,
}

impl FrequencyProfile {
    pub fn from_parts(
        counts: BTreeMap<String, DescriptorCounts>,
        genetic_total: u64,
        nongenetic_total: u64,
    ) -> Result<Self> {
        for (d, c) in &counts {
            if c.genetic > genetic_total || c.nongenetic > nongenetic_total {
                return Err(Error::InvalidArgument(format!(
                    "count for {d:?} exceeds its corpus total"
                )));
            }
        }
        Ok(FrequencyProfile {
            counts,
            genetic_total,
            nongenetic_total,
        })
    }

    /// Count a slice of labeled citations without checking for degeneracy.
    pub fn count(citations: &[Citation], exclusion: &ExclusionList) -> Result<Self> {
        let mut profile = FrequencyProfile::default();
        for c in citations {
            let label = c
                .label
                .ok_or_else(|| Error::InvalidArgument(format!("citation {} has no label", c.id)))?;
            let genetic = label == DomainLabel::Genetic;
            if genetic {
                profile.genetic_total += 1;
            } else {
                profile.nongenetic_total += 1;
            }
            for d in &c.descriptors {
                if exclusion.contains(d) {
                    continue;
                }
                let entry = match profile.counts.get_mut(d.as_str()) {
                    Some(entry) => entry,
                    None => profile.counts.entry(d.clone()).or_default(),
                };
                if genetic {
                    entry.genetic += 1;
                } else {
                    entry.nongenetic += 1;
                }
            }
        }
        Ok(profile)
    }

    pub fn merge(mut self, other: FrequencyProfile) -> FrequencyProfile {
        let (mut big, small) = if self.counts.len() >= other.counts.len() {
            (std::mem::take(&mut self.counts), other.counts)
        } else {
            (other.counts, std::mem::take(&mut self.counts))
        };
        for (d, c) in small {
            let entry = big.entry(d).or_default();
            entry.genetic += c.genetic;
            entry.nongenetic += c.nongenetic;
        }
        FrequencyProfile {
            counts: big,
            genetic_total: self.genetic_total + other.genetic_total,
            nongenetic_total: self.nongenetic_total + other.nongenetic_total,
        }
    }

    /// Profile with the two classes exchanged.
    pub fn swap_classes(&self) -> FrequencyProfile {
        FrequencyProfile {
            counts: self
                .counts
                .iter()
                .map(|(d, c)| {
                    (
                        d.clone(),
                        DescriptorCounts {
                            genetic: c.nongenetic,
                            nongenetic: c.genetic,
                        },
                    )
                })
                .collect(),
            genetic_total: self.nongenetic_total,
            nongenetic_total: self.genetic_total,
        }
    }

    pub fn genetic_total(&self) -> u64 {
        self.genetic_total
    }

    pub fn nongenetic_total(&self) -> u64 {
        self.nongenetic_total
    }

    pub fn counts_of(&self, descriptor: &str) -> Option<DescriptorCounts> {
        self.counts.get(descriptor).copied()
    }

    pub fn genetic_count_of(&self, descriptor: &str) -> u64 {
        self.counts.get(descriptor).map_or(0, |c| c.genetic)
    }

    pub fn nongenetic_count_of(&self, descriptor: &str) -> u64 {
        self.counts.get(descriptor).map_or(0, |c| c.nongenetic)
    }

    /// Descriptors in sorted order with their counts.
    pub fn iter(&self) -> impl Iterator<Item = (&str, DescriptorCounts)> {
        self.counts.iter().map(|(d, c)| (d.as_str(), *c))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn check_non_degenerate(&self) -> Result<()> {
        if self.genetic_total == 0 || self.nongenetic_total == 0 {
            return Err(Error::DegenerateCorpus(format!(
                "both classes need at least one citation (genetic {}, nongenetic {})",
                self.genetic_total, self.nongenetic_total
            )));
        }
        Ok(())
    }

    /// Persist as CSV: a `#totals` row, a header, then one row per descriptor
    /// in sorted order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        let totals = [
            "#totals".to_owned(),
            self.genetic_total.to_string(),
            self.nongenetic_total.to_string(),
        ];
        w.write_record(&totals).map_err(csv_err)?;
        w.write_record(["descriptor", "genetic_count", "nongenetic_count"])
            .map_err(csv_err)?;
        for (d, c) in &self.counts {
            w.write_record([
                d.as_str(),
                &c.genetic.to_string(),
                &c.nongenetic.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(input);
        let mut totals = None;
        let mut counts = BTreeMap::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 1;
            let rec = rec.map_err(|e| Error::line(line, e.to_string()))?;
            let field = |j: usize| {
                rec.get(j)
                    .ok_or_else(|| Error::line(line, "missing column"))
            };
            let number = |j: usize| -> Result<u64> {
                field(j)?
                    .parse()
                    .map_err(|_| Error::line(line, format!("column {} is not a count", j + 1)))
            };
            match i {
                0 if field(0)? == "#totals" => totals = Some((number(1)?, number(2)?)),
                0 => return Err(Error::line(line, "expected #totals row")),
                1 => {}
                _ => {
                    counts.insert(
                        field(0)?.to_owned(),
                        DescriptorCounts {
                            genetic: number(1)?,
                            nongenetic: number(2)?,
                        },
                    );
                }
            }
        }
        let (g, n) = totals.ok_or_else(|| Error::line(1, "empty profile file"))?;
        Self::from_parts(counts, g, n)
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("{other:?}")),
    }
}

const SHARD_SIZE: usize = 4096;

/// Count descriptor presence per class over labeled citations.
///
/// Counting is sharded across the rayon pool; the merge is exact, so the
/// result does not depend on the number of workers.
pub fn build_profile(
    citations: &[Citation],
    exclusion: &ExclusionList,
) -> Result<FrequencyProfile> {
    let profile = citations
        .par_chunks(SHARD_SIZE)
        .map(|chunk| FrequencyProfile::count(chunk, exclusion))
        .try_reduce(FrequencyProfile::default, |a, b| Ok(a.merge(b)))?;
    profile.check_non_degenerate()?;
    Ok(profile)
}

/// Observed 2×2 counts for one descriptor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ContingencyTable {
    pub o11: u64,
    pub o12: u64,
    pub o21: u64,
    pub o22: u64,
}

impl ContingencyTable {
    pub fn new(o11: u64, o12: u64, o21: u64, o22: u64) -> Self {
        ContingencyTable { o11, o12, o21, o22 }
    }

    pub fn r1(&self) -> u64 {
        self.o11 + self.o12
    }

    pub fn r2(&self) -> u64 {
        self.o21 + self.o22
    }

    pub fn c1(&self) -> u64 {
        self.o11 + self.o21
    }

    pub fn c2(&self) -> u64 {
        self.o12 + self.o22
    }

    pub fn n(&self) -> u64 {
        self.o11 + self.o12 + self.o21 + self.o22
    }

    /// Exchange the two corpora.
    pub fn swap_columns(&self) -> Self {
        ContingencyTable::new(self.o12, self.o11, self.o22, self.o21)
    }

    pub fn cells(&self) -> [u64; 4] {
        [self.o11, self.o12, self.o21, self.o22]
    }

    pub(crate) fn check_margins(&self) -> Result<()> {
        if self.r1() == 0 || self.r2() == 0 || self.c1() == 0 || self.c2() == 0 {
            return Err(Error::DegenerateTable(format!(
                "zero margin in [[{}, {}], [{}, {}]]",
                self.o11, self.o12, self.o21, self.o22
            )));
        }
        Ok(())
    }
}

pub fn table_for(profile: &FrequencyProfile, descriptor: &str) -> Result<ContingencyTable> {
    let c = profile
        .counts_of(descriptor)
        .ok_or_else(|| Error::UnknownDescriptor(descriptor.to_owned()))?;
    Ok(ContingencyTable::new(
        c.genetic,
        c.nongenetic,
        profile.genetic_total - c.genetic,
        profile.nongenetic_total - c.nongenetic,
    ))
}

/// Expected counts under independence, `e_ij = r_i * c_j / n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpectedTable {
    pub e11: f64,
    pub e12: f64,
    pub e21: f64,
    pub e22: f64,
}

impl ExpectedTable {
    pub fn cells(&self) -> [f64; 4] {
        [self.e11, self.e12, self.e21, self.e22]
    }

    pub fn min(&self) -> f64 {
        self.cells().into_iter().fold(f64::INFINITY, f64::min)
    }
}

pub fn expected(table: &ContingencyTable) -> Result<ExpectedTable> {
    table.check_margins()?;
    let n = table.n() as f64;
    let cell = |r: u64, c: u64| (r as u128 * c as u128) as f64 / n;
    Ok(ExpectedTable {
        e11: cell(table.r1(), table.c1()),
        e12: cell(table.r1(), table.c2()),
        e21: cell(table.r2(), table.c1()),
        e22: cell(table.r2(), table.c2()),
    })
}
