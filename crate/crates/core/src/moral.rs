//! Lexicon-based moral-foundation scoring.
//!
//! A lexicon maps each surface word to an association probability and a
//! sentiment per foundation. Negative sentiment is the vice pole, positive
//! the virtue pole. A tweet gets, per foundation, a loading (mean matched
//! probability) and a single polarity from the sign of the
//! probability-weighted mean sentiment.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MoralError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("lexicon is missing column {0:?}")]
    MissingColumn(String),
    #[error("lexicon row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("lexicon row {row}: duplicate word {word:?}")]
    DuplicateWord { row: usize, word: String },
    #[error("lexicon counts differ from expected: {0}")]
    CountMismatch(String),
    #[error("no ratios to summarize")]
    NoRatios,
    #[error("unknown foundation {0:?}")]
    UnknownFoundation(String),
    #[error("unknown polarity {0:?}")]
    UnknownPolarity(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Foundation {
    CareHarm,
    FairnessReciprocity,
    LoyaltyIngroup,
    AuthorityRespect,
    PuritySanctity,
}

impl Foundation {
    pub const ALL: [Foundation; 5] = [
        Foundation::CareHarm,
        Foundation::FairnessReciprocity,
        Foundation::LoyaltyIngroup,
        Foundation::AuthorityRespect,
        Foundation::PuritySanctity,
    ];

    /// Row/column order of the pairwise entropy table.
    pub const TABLE_ORDER: [Foundation; 5] = [
        Foundation::AuthorityRespect,
        Foundation::CareHarm,
        Foundation::FairnessReciprocity,
        Foundation::LoyaltyIngroup,
        Foundation::PuritySanctity,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Machine key used in CSV outputs.
    pub fn key(self) -> &'static str {
        match self {
            Foundation::CareHarm => "care_harm",
            Foundation::FairnessReciprocity => "fairness_reciprocity",
            Foundation::LoyaltyIngroup => "loyalty_ingroup",
            Foundation::AuthorityRespect => "authority_respect",
            Foundation::PuritySanctity => "purity_sanctity",
        }
    }

    fn column_stem(self) -> &'static str {
        match self {
            Foundation::CareHarm => "care",
            Foundation::FairnessReciprocity => "fairness",
            Foundation::LoyaltyIngroup => "loyalty",
            Foundation::AuthorityRespect => "authority",
            Foundation::PuritySanctity => "sanctity",
        }
    }

    pub fn vice_name(self) -> &'static str {
        match self {
            Foundation::CareHarm => "Harm",
            Foundation::FairnessReciprocity => "Cheating",
            Foundation::LoyaltyIngroup => "Betrayal",
            Foundation::AuthorityRespect => "Subversion",
            Foundation::PuritySanctity => "Degradation",
        }
    }

    pub fn virtue_name(self) -> &'static str {
        match self {
            Foundation::CareHarm => "Care",
            Foundation::FairnessReciprocity => "Fairness",
            Foundation::LoyaltyIngroup => "Loyalty",
            Foundation::AuthorityRespect => "Respect",
            Foundation::PuritySanctity => "Sanctity",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Foundation::CareHarm => "Harm/Care",
            Foundation::FairnessReciprocity => "Fairness/Reciprocity",
            Foundation::LoyaltyIngroup => "In-group/Loyalty",
            Foundation::AuthorityRespect => "Authority/Respect",
            Foundation::PuritySanctity => "Purity/Sanctity",
        }
    }
}

impl fmt::Display for Foundation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Foundation {
    type Err = MoralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Foundation::ALL
            .into_iter()
            .find(|f| f.key() == s)
            .ok_or_else(|| MoralError::UnknownFoundation(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Vice,
    Virtue,
    None,
}

impl Polarity {
    pub fn key(self) -> &'static str {
        match self {
            Polarity::Vice => "vice",
            Polarity::Virtue => "virtue",
            Polarity::None => "none",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Polarity {
    type Err = MoralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vice" => Ok(Polarity::Vice),
            "virtue" => Ok(Polarity::Virtue),
            "none" => Ok(Polarity::None),
            other => Err(MoralError::UnknownPolarity(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub word: String,
    pub prob: [f64; 5],
    pub sentiment: [f64; 5],
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    index: HashMap<String, usize>,
}

/// Virtue/vice word counts per foundation, in `Foundation::ALL` order.
pub type DimensionCounts = [(usize, usize); 5];

/// Per-dimension (virtue, vice) sizes of the published extended moral
/// foundations dictionary.
pub const EMFD_EXPECTED_COUNTS: DimensionCounts =
    [(95, 85), (69, 57), (99, 72), (160, 101), (97, 161)];

const PROB_COLUMNS: [&str; 5] = ["care_p", "fairness_p", "loyalty_p", "authority_p", "sanctity_p"];

impl Lexicon {
    pub fn from_entries(entries: Vec<LexiconEntry>) -> Result<Self, MoralError> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            validate_entry(e).map_err(|reason| MoralError::BadRow { row: i + 1, reason })?;
            if index.insert(e.word.clone(), i).is_some() {
                return Err(MoralError::DuplicateWord {
                    row: i + 1,
                    word: e.word.clone(),
                });
            }
        }
        Ok(Self { entries, index })
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self, MoralError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| MoralError::MissingColumn(name.to_string()))
        };
        let word_col = col("word")?;
        let mut prob_cols = [0; 5];
        let mut sent_cols = [0; 5];
        for f in Foundation::ALL {
            prob_cols[f.index()] = col(PROB_COLUMNS[f.index()])?;
            sent_cols[f.index()] = col(&format!("{}_sent", f.column_stem()))?;
        }

        let mut entries = Vec::new();
        let mut index = HashMap::new();
        for (i, record) in rdr.records().enumerate() {
            // Header is row 1.
            let row = i + 2;
            let record = record?;
            let field = |c: usize| record.get(c).unwrap_or("");
            let parse = |c: usize| -> Result<f64, MoralError> {
                field(c).parse::<f64>().map_err(|_| MoralError::BadRow {
                    row,
                    reason: format!("column {:?} is not a number: {:?}", &headers[c], field(c)),
                })
            };
            let mut prob = [0.0; 5];
            let mut sentiment = [0.0; 5];
            for f in 0..5 {
                prob[f] = parse(prob_cols[f])?;
                sentiment[f] = parse(sent_cols[f])?;
            }
            let entry = LexiconEntry {
                word: field(word_col).to_string(),
                prob,
                sentiment,
            };
            validate_entry(&entry).map_err(|reason| MoralError::BadRow { row, reason })?;
            if index.insert(entry.word.clone(), entries.len()).is_some() {
                return Err(MoralError::DuplicateWord {
                    row,
                    word: entry.word,
                });
            }
            entries.push(entry);
        }
        Ok(Self { entries, index })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn lookup(&self, word: &str) -> Option<&LexiconEntry> {
        self.index.get(word).map(|&i| &self.entries[i])
    }

    /// Words per foundation on each pole: a word counts for a foundation when
    /// its probability there is positive, on the side given by the sign of
    /// its sentiment.
    pub fn dimension_counts(&self) -> DimensionCounts {
        let mut counts = [(0, 0); 5];
        for e in &self.entries {
            for f in 0..5 {
                if e.prob[f] > 0.0 {
                    if e.sentiment[f] > 0.0 {
                        counts[f].0 += 1;
                    } else if e.sentiment[f] < 0.0 {
                        counts[f].1 += 1;
                    }
                }
            }
        }
        counts
    }

    pub fn check_counts(&self, expected: &DimensionCounts) -> Result<(), MoralError> {
        let actual = self.dimension_counts();
        let diffs: Vec<String> = Foundation::ALL
            .iter()
            .filter(|f| actual[f.index()] != expected[f.index()])
            .map(|f| {
                let (av, ac) = actual[f.index()];
                let (ev, ec) = expected[f.index()];
                format!("{f}: virtue {av} (expected {ev}), vice {ac} (expected {ec})")
            })
            .collect();
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(MoralError::CountMismatch(diffs.join("; ")))
        }
    }
}

fn validate_entry(e: &LexiconEntry) -> Result<(), String> {
    if e.word.is_empty() {
        return Err("empty word".into());
    }
    if e.word != e.word.to_lowercase() {
        return Err(format!("word {:?} is not lowercase", e.word));
    }
    for f in 0..5 {
        let p = e.prob[f];
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(format!("{} probability {p} outside [0, 1]", PROB_COLUMNS[f]));
        }
        let s = e.sentiment[f];
        if !s.is_finite() || !(-1.0..=1.0).contains(&s) {
            return Err(format!(
                "{}_sent value {s} outside [-1, 1]",
                Foundation::ALL[f].column_stem()
            ));
        }
    }
    Ok(())
}

/// Loads a lexicon CSV. With `expected` set, the per-dimension virtue/vice
/// counts must match it.
pub fn load_lexicon(path: &Path, expected: Option<&DimensionCounts>) -> Result<Lexicon, MoralError> {
    let file = std::fs::File::open(path).map_err(|source| MoralError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let lexicon = Lexicon::from_csv_reader(file)?;
    if let Some(expected) = expected {
        lexicon.check_counts(expected)?;
    }
    Ok(lexicon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoundationScore {
    pub loading: f64,
    pub polarity: Polarity,
    pub matched: usize,
}

impl FoundationScore {
    pub const EMPTY: FoundationScore = FoundationScore {
        loading: 0.0,
        polarity: Polarity::None,
        matched: 0,
    };

    /// Loading credited to `polarity`, zero for the other pole.
    pub fn loading_for(&self, polarity: Polarity) -> f64 {
        if self.polarity == polarity {
            self.loading
        } else {
            0.0
        }
    }
}

/// The ten per-tweet outputs: a loading and a polarity for each foundation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoralScore {
    pub foundations: [FoundationScore; 5],
}

impl Default for MoralScore {
    fn default() -> Self {
        Self {
            foundations: [FoundationScore::EMPTY; 5],
        }
    }
}

impl MoralScore {
    pub fn get(&self, f: Foundation) -> &FoundationScore {
        &self.foundations[f.index()]
    }
}

pub fn score_tweet(tokens: &[String], lexicon: &Lexicon) -> MoralScore {
    // Count occurrences per lexicon entry so sums run in lexicon order and
    // the result does not depend on token order.
    let mut hits: BTreeMap<usize, usize> = BTreeMap::new();
    for t in tokens {
        if let Some(&i) = lexicon.index.get(t.as_str()) {
            *hits.entry(i).or_insert(0) += 1;
        }
    }
    let mut score = MoralScore::default();
    for f in 0..5 {
        let mut matched = 0usize;
        let mut prob_sum = 0.0;
        let mut weighted_sent = 0.0;
        for (&i, &n) in &hits {
            let e = &lexicon.entries[i];
            if e.prob[f] > 0.0 {
                matched += n;
                prob_sum += n as f64 * e.prob[f];
                weighted_sent += n as f64 * e.prob[f] * e.sentiment[f];
            }
        }
        if matched == 0 {
            continue;
        }
        let mean_sent = weighted_sent / prob_sum;
        let polarity = if mean_sent > 0.0 {
            Polarity::Virtue
        } else if mean_sent < 0.0 {
            Polarity::Vice
        } else {
            Polarity::None
        };
        score.foundations[f] = FoundationScore {
            loading: if polarity == Polarity::None {
                0.0
            } else {
                prob_sum / matched as f64
            },
            polarity,
            matched,
        };
    }
    score
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoralRatio {
    pub moral_word_count: usize,
    pub nonmoral_word_count: usize,
    /// `f64::INFINITY` when every token is moral.
    pub ratio: f64,
}

impl MoralRatio {
    pub fn from_counts(moral: usize, nonmoral: usize) -> Self {
        let ratio = match (moral, nonmoral) {
            (0, _) => 0.0,
            (_, 0) => f64::INFINITY,
            (m, n) => m as f64 / n as f64,
        };
        Self {
            moral_word_count: moral,
            nonmoral_word_count: nonmoral,
            ratio,
        }
    }
}

pub fn moral_ratio(tokens: &[String], lexicon: &Lexicon) -> MoralRatio {
    let moral = tokens
        .iter()
        .filter(|t| {
            lexicon
                .lookup(t)
                .is_some_and(|e| e.prob.iter().any(|&p| p > 0.0))
        })
        .count();
    MoralRatio::from_counts(moral, tokens.len() - moral)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioStatistics {
    pub bin_width: f64,
    /// Counts for `[i*w, (i+1)*w)`; the last entry is the overflow bin that
    /// also holds infinite ratios.
    pub histogram: Vec<usize>,
    pub fraction_above_one: f64,
    pub total: usize,
}

impl RatioStatistics {
    pub fn overflow_start(&self) -> f64 {
        (self.histogram.len() - 1) as f64 * self.bin_width
    }
}

/// Histogram of moral/non-moral ratios over `[0, max_ratio)` in steps of
/// `bin_width`, with one overflow bin on top.
pub fn ratio_statistics(
    ratios: &[MoralRatio],
    bin_width: f64,
    max_ratio: f64,
) -> Result<RatioStatistics, MoralError> {
    if ratios.is_empty() {
        return Err(MoralError::NoRatios);
    }
    assert!(bin_width > 0.0 && max_ratio > 0.0, "bin width and range must be positive");
    let regular = (max_ratio / bin_width).round().max(1.0) as usize;
    let mut histogram = vec![0usize; regular + 1];
    let mut above = 0usize;
    for r in ratios {
        let bin = if r.ratio.is_finite() {
            ((r.ratio / bin_width).floor() as usize).min(regular)
        } else {
            regular
        };
        histogram[bin] += 1;
        if r.ratio > 1.0 {
            above += 1;
        }
    }
    Ok(RatioStatistics {
        bin_width,
        histogram,
        fraction_above_one: above as f64 / ratios.len() as f64,
        total: ratios.len(),
    })
}

/// Small lexicon bundled for tests and the synthetic fixture.
pub const TOY_LEXICON_CSV: &str = include_str!("../data/toy_lexicon.csv");

pub fn toy_lexicon() -> Lexicon {
    Lexicon::from_csv_reader(TOY_LEXICON_CSV.as_bytes()).expect("bundled lexicon is valid")
}
