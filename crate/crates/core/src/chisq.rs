//! Chi-square testing of descriptor tables and the signed indicator profile.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::contingency::{csv_err, expected, table_for, ContingencyTable, FrequencyProfile};
use crate::corpus::ExclusionList;
use crate::error::{Error, Result};

/// Expected counts below this trigger the continuity correction.
pub const YATES_THRESHOLD: f64 = 5.0;

/// Raw statistic for one table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub yates_applied: bool,
}

/// Direction of association between a descriptor and the genetic corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Indicator {
    Positive,
    Negative,
    Neutral,
}

impl Indicator {
    pub fn flip(self) -> Self {
        match self {
            Indicator::Positive => Indicator::Negative,
            Indicator::Negative => Indicator::Positive,
            Indicator::Neutral => Indicator::Neutral,
        }
    }

    pub fn sign(self) -> Option<Sign> {
        match self {
            Indicator::Positive => Some(Sign::Positive),
            Indicator::Negative => Some(Sign::Negative),
            Indicator::Neutral => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub yates_applied: bool,
    pub significant: bool,
    pub indicator: Indicator,
}

/// Pearson's X² for a 2×2 table, with Yates's correction when any expected
/// count is below five.
///
/// Evaluated through the closed form `n (|ad - bc| - k)² / (r1 r2 c1 c2)`
/// (`k = 0` or `n / 2`) on exact integer intermediates. Every cell of a 2×2
/// table has the same `|o - e| = |ad - bc| / n`, which makes this equal to
/// the cell-wise sum; the corrected deviation is clamped at zero.
pub fn chi_square(table: &ContingencyTable) -> Result<ChiSquare> {
    let e = expected(table)?;
    let yates_applied = e.min() < YATES_THRESHOLD;
    let statistic = closed_form(table, yates_applied);
    Ok(ChiSquare {
        statistic,
        yates_applied,
    })
}

fn closed_form(t: &ContingencyTable, yates: bool) -> f64 {
    let exact = || -> Option<f64> {
        let ad = (t.o11 as u128).checked_mul(t.o22 as u128)?;
        let bc = (t.o12 as u128).checked_mul(t.o21 as u128)?;
        let det = ad.abs_diff(bc);
        let n = t.n() as u128;
        // r1 r2 and c1 c2 pair up so that exchanging columns only commutes
        // factors and the result is bit-identical
        let rows = (t.r1() as u128).checked_mul(t.r2() as u128)?;
        let cols = (t.c1() as u128).checked_mul(t.c2() as u128)?;
        let denom = rows as f64 * cols as f64;
        if yates {
            let m = det.checked_mul(2)?.saturating_sub(n);
            let num = n.checked_mul(m.checked_mul(m)?)?;
            Some(num as f64 / (4.0 * denom))
        } else {
            let num = n.checked_mul(det.checked_mul(det)?)?;
            Some(num as f64 / denom)
        }
    };
    exact().unwrap_or_else(|| {
        let n = t.n() as f64;
        let det = ((t.o11 as f64) * (t.o22 as f64) - (t.o12 as f64) * (t.o21 as f64)).abs();
        let dev = if yates { (det - n / 2.0).max(0.0) } else { det };
        let rows = t.r1() as f64 * t.r2() as f64;
        let cols = t.c1() as f64 * t.c2() as f64;
        n * (dev / rows) * (dev / cols)
    })
}

/// Compare relative frequencies `o11 / c1` and `o12 / c2` by exact cross
/// multiplication.
pub fn indicator_of(table: &ContingencyTable) -> Result<Indicator> {
    if table.c1() == 0 || table.c2() == 0 {
        return Err(Error::DegenerateTable("a corpus total is zero".into()));
    }
    let genetic = table.o11 as u128 * table.c2() as u128;
    let nongenetic = table.o12 as u128 * table.c1() as u128;
    Ok(match genetic.cmp(&nongenetic) {
        std::cmp::Ordering::Greater => Indicator::Positive,
        std::cmp::Ordering::Less => Indicator::Negative,
        std::cmp::Ordering::Equal => Indicator::Neutral,
    })
}

/// Full test of one table: significance is `statistic > critical_value`.
pub fn test_table(table: &ContingencyTable, critical_value: f64) -> Result<ChiSquareResult> {
    let ChiSquare {
        statistic,
        yates_applied,
    } = chi_square(table)?;
    let significant = statistic > critical_value;
    let indicator = if significant {
        indicator_of(table)?
    } else {
        Indicator::Neutral
    };
    Ok(ChiSquareResult {
        statistic,
        yates_applied,
        significant,
        indicator,
    })
}

/// Survival function of the chi-square distribution with one degree of
/// freedom: `P(X > x) = erfc(sqrt(x / 2))`.
pub fn pvalue_chisq_df1(statistic: f64) -> Result<f64> {
    if statistic.is_nan() || statistic < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "chi-square statistic must be non-negative, got {statistic}"
        )));
    }
    Ok(statrs::function::erf::erfc((statistic / 2.0).sqrt()).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> i64 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Positive => "+1",
            Sign::Negative => "-1",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IndicatorEntry {
    pub sign: Sign,
    pub statistic: f64,
    pub yates_applied: bool,
}

/// The trained model: every significant, non-excluded descriptor with its sign.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorProfile {
    entries: BTreeMap<String, IndicatorEntry>,
    pub genetic_total: u64,
    pub nongenetic_total: u64,
    pub critical_value: f64,
    pub version: String,
}

/// Counts reported alongside a freshly built profile.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SelectionSummary {
    pub descriptors: usize,
    pub excluded: usize,
    pub tested: usize,
    pub significant: usize,
    pub positive: usize,
    pub negative: usize,
    /// Significant descriptors dropped because both relative frequencies match.
    pub tied: Vec<String>,
    /// Descriptors skipped because their table has a zero margin.
    pub degenerate: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub profile: IndicatorProfile,
    pub summary: SelectionSummary,
}

impl IndicatorProfile {
    pub fn new(
        entries: BTreeMap<String, IndicatorEntry>,
        genetic_total: u64,
        nongenetic_total: u64,
        critical_value: f64,
    ) -> Self {
        IndicatorProfile {
            entries,
            genetic_total,
            nongenetic_total,
            critical_value,
            version: crate::VERSION.to_owned(),
        }
    }

    /// Profile built directly from `(descriptor, sign)` pairs, with no
    /// statistics attached.
    pub fn from_signs<I, S>(signs: I) -> Self
    where
        I: IntoIterator<Item = (S, Sign)>,
        S: Into<String>,
    {
        let entries = signs
            .into_iter()
            .map(|(d, sign)| {
                (
                    d.into(),
                    IndicatorEntry {
                        sign,
                        statistic: f64::INFINITY,
                        yates_applied: false,
                    },
                )
            })
            .collect();
        Self::new(entries, 0, 0, crate::DEFAULT_CRITICAL_VALUE)
    }

    pub fn sign_of(&self, descriptor: &str) -> Option<Sign> {
        self.entries.get(descriptor).map(|e| e.sign)
    }

    pub fn get(&self, descriptor: &str) -> Option<&IndicatorEntry> {
        self.entries.get(descriptor)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &IndicatorEntry)> {
        self.entries.iter().map(|(d, e)| (d.as_str(), e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| e.sign == Sign::Positive)
            .count()
    }

    pub fn negative_count(&self) -> usize {
        self.len() - self.positive_count()
    }

    /// Hash lookup of sign values for bulk scoring.
    pub fn sign_table(&self) -> HashMap<&str, i64> {
        self.entries
            .iter()
            .map(|(d, e)| (d.as_str(), e.sign.value()))
            .collect()
    }

    /// Same profile with every sign flipped and the class totals exchanged.
    pub fn negated(&self) -> Self {
        IndicatorProfile {
            entries: self
                .entries
                .iter()
                .map(|(d, e)| {
                    (
                        d.clone(),
                        IndicatorEntry {
                            sign: e.sign.flip(),
                            ..*e
                        },
                    )
                })
                .collect(),
            genetic_total: self.nongenetic_total,
            nongenetic_total: self.genetic_total,
            critical_value: self.critical_value,
            version: self.version.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        let meta = [
            ("#genetic_total", self.genetic_total.to_string()),
            ("#nongenetic_total", self.nongenetic_total.to_string()),
            ("#critical_value", self.critical_value.to_string()),
            ("#version", self.version.clone()),
        ];
        for (k, v) in &meta {
            w.write_record([*k, v.as_str()]).map_err(csv_err)?;
        }
        w.write_record(["descriptor", "sign", "chi_square", "yates_applied"])
            .map_err(csv_err)?;
        for (d, e) in &self.entries {
            w.write_record([
                d.as_str(),
                &e.sign.to_string(),
                &e.statistic.to_string(),
                if e.yates_applied { "true" } else { "false" },
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
        let mut meta: HashMap<String, String> = HashMap::new();
        let mut entries = BTreeMap::new();
        let mut in_body = false;
        for (i, rec) in r.records().enumerate() {
            let line = i + 1;
            let rec = rec.map_err(|e| Error::line(line, e.to_string()))?;
            let field = |j: usize| {
                rec.get(j)
                    .ok_or_else(|| Error::line(line, "missing column"))
            };
            if !in_body {
                let key = field(0)?;
                if let Some(key) = key.strip_prefix('#') {
                    meta.insert(key.to_owned(), field(1)?.to_owned());
                } else if key == "descriptor" {
                    in_body = true;
                } else {
                    return Err(Error::line(line, "expected metadata or header row"));
                }
                continue;
            }
            let sign = match field(1)? {
                "+1" | "1" | "+" => Sign::Positive,
                "-1" | "-" => Sign::Negative,
                other => return Err(Error::line(line, format!("bad sign {other:?}"))),
            };
            let statistic = field(2)?
                .parse()
                .map_err(|_| Error::line(line, "bad chi_square value"))?;
            let yates_applied = field(3)?
                .parse()
                .map_err(|_| Error::line(line, "bad yates_applied value"))?;
            entries.insert(
                field(0)?.to_owned(),
                IndicatorEntry {
                    sign,
                    statistic,
                    yates_applied,
                },
            );
        }
        let get = |k: &str| -> Result<&String> {
            meta.get(k)
                .ok_or_else(|| Error::Model(format!("indicator file lacks #{k}")))
        };
        let parse_u64 = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Model(format!("bad #{k}")))
        };
        Ok(IndicatorProfile {
            entries,
            genetic_total: parse_u64("genetic_total")?,
            nongenetic_total: parse_u64("nongenetic_total")?,
            critical_value: get("critical_value")?
                .parse()
                .map_err(|_| Error::Model("bad #critical_value".into()))?,
            version: get("version")?.clone(),
        })
    }
}

/// Test every non-excluded descriptor of `profile` and keep the significant,
/// non-tied ones with their sign.
pub fn build_indicator_profile(
    profile: &FrequencyProfile,
    exclusion: &ExclusionList,
    critical_value: f64,
) -> Result<Selection> {
    profile.check_non_degenerate()?;
    let candidates: Vec<&str> = profile.iter().map(|(d, _)| d).collect();
    let results: Vec<(&str, Option<Result<ChiSquareResult>>)> = candidates
        .par_iter()
        .map(|&d| {
            if exclusion.contains(d) {
                return (d, None);
            }
            let outcome = table_for(profile, d).and_then(|t| test_table(&t, critical_value));
            (d, Some(outcome))
        })
        .collect();

    let mut summary = SelectionSummary {
        descriptors: candidates.len(),
        ..Default::default()
    };
    let mut entries = BTreeMap::new();
    for (d, outcome) in results {
        let result = match outcome {
            None => {
                summary.excluded += 1;
                continue;
            }
            Some(Err(Error::DegenerateTable(_))) => {
                summary.degenerate.push(d.to_owned());
                continue;
            }
            Some(Err(e)) => return Err(e),
            Some(Ok(r)) => r,
        };
        summary.tested += 1;
        if !result.significant {
            continue;
        }
        summary.significant += 1;
        match result.indicator.sign() {
            Some(sign) => {
                match sign {
                    Sign::Positive => summary.positive += 1,
                    Sign::Negative => summary.negative += 1,
                }
                entries.insert(
                    d.to_owned(),
                    IndicatorEntry {
                        sign,
                        statistic: result.statistic,
                        yates_applied: result.yates_applied,
                    },
                );
            }
            None => summary.tied.push(d.to_owned()),
        }
    }
    Ok(Selection {
        profile: IndicatorProfile::new(
            entries,
            profile.genetic_total(),
            profile.nongenetic_total(),
            critical_value,
        ),
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contingency::DescriptorCounts;
    use proptest::prelude::*;

    fn t(a: u64, b: u64, c: u64, d: u64) -> ContingencyTable {
        ContingencyTable::new(a, b, c, d)
    }

    #[test]
    fn reference_table() {
        let r = chi_square(&t(30, 10, 70, 190)).unwrap();
        assert!(!r.yates_applied);
        // 20.833 + 10.417 + 3.205 + 1.603
        assert!((r.statistic - 36.058).abs() < 1e-3, "{}", r.statistic);
    }

    #[test]
    fn proportional_is_zero() {
        let r = chi_square(&t(10, 20, 20, 40)).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.yates_applied);
    }

    #[test]
    fn yates_small_expected() {
        let r = chi_square(&t(1, 9, 4, 86)).unwrap();
        assert!(r.yates_applied);
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn yates_trigger_is_any_cell() {
        // e11 = 4 is the only expected count below five
        let r = chi_square(&t(2, 8, 38, 52)).unwrap();
        let e = expected(&t(2, 8, 38, 52)).unwrap();
        assert!(e.e11 < 5.0 && e.e12 >= 5.0 && e.e21 >= 5.0 && e.e22 >= 5.0);
        assert!(r.yates_applied);
    }

    #[test]
    fn degenerate_propagates() {
        assert!(matches!(
            chi_square(&t(0, 0, 5, 5)),
            Err(Error::DegenerateTable(_))
        ));
    }

    #[test]
    fn indicators() {
        assert_eq!(
            indicator_of(&t(30, 10, 70, 190)).unwrap(),
            Indicator::Positive
        );
        assert_eq!(indicator_of(&t(5, 10, 45, 90)).unwrap(), Indicator::Neutral);
        assert_eq!(
            indicator_of(&t(10, 30, 190, 70)).unwrap(),
            Indicator::Negative
        );
        assert!(indicator_of(&t(0, 1, 0, 1)).is_err());
    }

    #[test]
    fn significance_is_strict() {
        let r = test_table(&t(30, 10, 70, 190), 3.84).unwrap();
        assert!(r.significant);
        assert_eq!(r.indicator, Indicator::Positive);
        let stat = chi_square(&t(30, 10, 70, 190)).unwrap().statistic;
        let at = test_table(&t(30, 10, 70, 190), stat).unwrap();
        assert!(!at.significant);
        assert_eq!(at.indicator, Indicator::Neutral);
    }

    #[test]
    fn pvalues() {
        assert_eq!(pvalue_chisq_df1(0.0).unwrap(), 1.0);
        assert!((pvalue_chisq_df1(3.841).unwrap() - 0.05).abs() < 5e-4);
        assert!((pvalue_chisq_df1(6.635).unwrap() - 0.01).abs() < 5e-5);
        assert!(pvalue_chisq_df1(-1.0).is_err());
        assert!(pvalue_chisq_df1(f64::NAN).is_err());
    }

    /// Survival function by composite Simpson quadrature of the df=1 density
    /// after substituting x = u², which removes the singularity at zero:
    /// P(X > s) = 1 - (2 / sqrt(2π)) ∫_0^{sqrt(s)} exp(-u²/2) du.
    fn sf_by_quadrature(s: f64) -> f64 {
        let b = s.sqrt();
        let n = 20_000;
        let h = b / n as f64;
        let f = |u: f64| (-u * u / 2.0).exp();
        let mut acc = f(0.0) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        1.0 - 2.0 / (2.0 * std::f64::consts::PI).sqrt() * acc * h / 3.0
    }

    #[test]
    fn pvalue_matches_quadrature() {
        for s in [0.01, 0.5, 1.0, 2.7, 3.84, 6.635, 10.0, 20.0] {
            let p = pvalue_chisq_df1(s).unwrap();
            assert!((p - sf_by_quadrature(s)).abs() < 1e-10, "s = {s}");
        }
    }

    fn profile(rows: &[(&str, u64, u64)], g: u64, n: u64) -> FrequencyProfile {
        let counts = rows
            .iter()
            .map(|(d, a, b)| {
                (
                    d.to_string(),
                    DescriptorCounts {
                        genetic: *a,
                        nongenetic: *b,
                    },
                )
            })
            .collect();
        FrequencyProfile::from_parts(counts, g, n).unwrap()
    }

    #[test]
    fn selection() {
        let p = profile(
            &[
                ("Base Sequence", 30, 10),
                ("Weak", 12, 17),
                ("Humans", 100, 10),
                ("Tied", 50, 100),
                ("Everywhere", 100, 200),
            ],
            100,
            200,
        );
        let weak = chi_square(&table_for(&p, "Weak").unwrap())
            .unwrap()
            .statistic;
        assert!(weak < 3.84);
        let sel = build_indicator_profile(&p, &["Humans"].into_iter().collect(), 3.84).unwrap();
        assert_eq!(sel.profile.sign_of("Base Sequence"), Some(Sign::Positive));
        assert_eq!(sel.profile.sign_of("Weak"), None);
        assert_eq!(sel.profile.sign_of("Humans"), None);
        assert_eq!(sel.profile.sign_of("Tied"), None);
        assert_eq!(sel.summary.excluded, 1);
        assert_eq!(sel.summary.degenerate, vec!["Everywhere".to_string()]);
        assert_eq!((sel.summary.positive, sel.summary.negative), (1, 0));
        assert_eq!(sel.summary.tested, 3);
        let stat = sel.profile.get("Base Sequence").unwrap().statistic;
        assert!((stat - 36.058).abs() < 1e-3);
    }

    #[test]
    fn csv_round_trip_is_byte_stable() {
        let p = profile(&[("a, b", 30, 10), ("c", 1, 40), ("d", 3, 3)], 100, 200);
        let sel = build_indicator_profile(&p, &ExclusionList::empty(), 3.84).unwrap();
        let mut first = Vec::new();
        sel.profile.write_csv(&mut first).unwrap();
        let back = IndicatorProfile::read_csv(first.as_slice()).unwrap();
        assert_eq!(back, sel.profile);
        let mut second = Vec::new();
        back.write_csv(&mut second).unwrap();
        assert_eq!(first, second);
        let text = String::from_utf8(first).unwrap();
        assert!(
            text.starts_with("#genetic_total,100\n#nongenetic_total,200\n#critical_value,3.84\n")
        );
    }

    fn arb_table() -> impl Strategy<Value = ContingencyTable> {
        (0u64..300, 0u64..300, 0u64..300, 0u64..300)
            .prop_map(|(a, b, c, d)| t(a, b, c, d))
            .prop_filter("non-degenerate", |t| t.check_margins().is_ok())
    }

    proptest! {
        #[test]
        fn column_swap(t in arb_table()) {
            let a = chi_square(&t).unwrap();
            let b = chi_square(&t.swap_columns()).unwrap();
            prop_assert_eq!(a.statistic.to_bits(), b.statistic.to_bits());
            prop_assert_eq!(indicator_of(&t).unwrap().flip(), indicator_of(&t.swap_columns()).unwrap());
        }

        #[test]
        fn column_scaling_keeps_sign(t in arb_table(), k in 1u64..50) {
            let scaled = ContingencyTable::new(t.o11 * k, t.o12 * k, t.o21 * k, t.o22 * k);
            prop_assert_eq!(indicator_of(&t).unwrap(), indicator_of(&scaled).unwrap());
        }

        #[test]
        fn yates_never_exceeds_raw(t in arb_table()) {
            prop_assert!(closed_form(&t, true) <= closed_form(&t, false));
            prop_assert!(closed_form(&t, true) >= 0.0);
        }

        #[test]
        fn zero_iff_proportional(t in arb_table()) {
            let raw = closed_form(&t, false);
            let proportional = t.o11 * t.o22 == t.o12 * t.o21;
            prop_assert_eq!(raw == 0.0, proportional);
        }
    }
}
