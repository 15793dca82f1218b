//! Windowed, per-topic and daily aggregation of moral loadings.
//!
//! Every mean is taken only over tweets whose polarity for that foundation
//! matches the pole being averaged; tweets with no loading never enter a
//! denominator.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::moral::{Foundation, MoralScore, Polarity};
use crate::topics::TopicAssignment;

#[derive(Debug, Error)]
pub enum TimeSeriesError {
    #[error("invalid window {label:?}: {reason}")]
    InvalidWindow { label: String, reason: String },
    #[error("topic {topic} outside [0, {k})")]
    UnknownTopic { topic: usize, k: usize },
    #[error("tweet {0:?} has no topic assignment")]
    MissingAssignment(String),
    #[error("cannot parse date {0:?} (expected YYYY-MM-DD)")]
    BadDate(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTweet {
    pub id: String,
    pub timestamp: i64,
    pub score: MoralScore,
}

/// UTC calendar day of a Unix timestamp.
pub fn day_of(timestamp: i64) -> NaiveDate {
    DateTime::from_timestamp(timestamp.div_euclid(86_400) * 86_400, 0)
        .expect("timestamp in chrono range")
        .date_naive()
}

pub fn parse_date(s: &str) -> Result<NaiveDate, TimeSeriesError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| TimeSeriesError::BadDate(s.to_string()))
}

fn midnight(date: NaiveDate) -> i64 {
    date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp()
}

/// Half-open `[start, end)` interval of Unix seconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub label: String,
    pub start: i64,
    pub end: i64,
}

impl TimeWindow {
    pub fn new(label: impl Into<String>, start: i64, end: i64) -> Result<Self, TimeSeriesError> {
        let label = label.into();
        if start >= end {
            return Err(TimeSeriesError::InvalidWindow {
                label,
                reason: format!("start {start} is not before end {end}"),
            });
        }
        Ok(Self { label, start, end })
    }

    /// Window from midnight UTC of `start` to midnight UTC of `end`.
    pub fn from_dates(label: impl Into<String>, start: &str, end: &str) -> Result<Self, TimeSeriesError> {
        Self::new(label, midnight(parse_date(start)?), midnight(parse_date(end)?))
    }

    pub fn contains(&self, timestamp: i64) -> bool {
        self.start <= timestamp && timestamp < self.end
    }
}

/// Boundary dates of the four study periods. The last boundary is the day
/// after the final collection day so that day is included.
pub const DEFAULT_WINDOW_BOUNDARIES: [&str; 5] =
    ["2018-04-01", "2018-05-04", "2018-07-22", "2018-12-18", "2019-05-01"];

pub fn default_windows() -> Vec<TimeWindow> {
    DEFAULT_WINDOW_BOUNDARIES
        .windows(2)
        .enumerate()
        .map(|(i, b)| TimeWindow::from_dates(format!("t{}", i + 1), b[0], b[1]).expect("valid default window"))
        .collect()
}

/// Checks that windows are individually valid, ordered and non-overlapping.
pub fn validate_partition(windows: &[TimeWindow]) -> Result<(), TimeSeriesError> {
    for w in windows {
        TimeWindow::new(w.label.clone(), w.start, w.end)?;
    }
    for pair in windows.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(TimeSeriesError::InvalidWindow {
                label: pair[1].label.clone(),
                reason: format!("overlaps or precedes {:?}", pair[0].label),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub mean: f64,
    pub n: usize,
}

/// Mean loading per foundation and pole (`[foundation][vice, virtue]`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DimensionAggregate {
    pub cells: [[GroupMean; 2]; 5],
}

fn pole_index(p: Polarity) -> Option<usize> {
    match p {
        Polarity::Vice => Some(0),
        Polarity::Virtue => Some(1),
        Polarity::None => None,
    }
}

pub const POLES: [Polarity; 2] = [Polarity::Vice, Polarity::Virtue];

impl DimensionAggregate {
    pub fn from_scores<'a>(scores: impl IntoIterator<Item = &'a MoralScore>) -> Self {
        let mut sums = [[0.0f64; 2]; 5];
        let mut counts = [[0usize; 2]; 5];
        for s in scores {
            for (f, fs) in s.foundations.iter().enumerate() {
                if let Some(p) = pole_index(fs.polarity) {
                    sums[f][p] += fs.loading;
                    counts[f][p] += 1;
                }
            }
        }
        let mut agg = Self::default();
        for f in 0..5 {
            for p in 0..2 {
                let n = counts[f][p];
                agg.cells[f][p] = GroupMean {
                    mean: if n == 0 { 0.0 } else { sums[f][p] / n as f64 },
                    n,
                };
            }
        }
        agg
    }

    pub fn get(&self, f: Foundation, p: Polarity) -> GroupMean {
        pole_index(p).map(|i| self.cells[f.index()][i]).unwrap_or_default()
    }

    pub fn total_n(&self) -> usize {
        self.cells.iter().flatten().map(|c| c.n).sum()
    }
}

pub fn window_aggregate(scores: &[ScoredTweet], window: &TimeWindow) -> DimensionAggregate {
    DimensionAggregate::from_scores(
        scores
            .iter()
            .filter(|s| window.contains(s.timestamp))
            .map(|s| &s.score),
    )
}

fn assignment_map(assignments: &[TopicAssignment]) -> HashMap<&str, usize> {
    assignments.iter().map(|a| (a.doc_id.as_str(), a.topic)).collect()
}

fn topic_of(map: &HashMap<&str, usize>, tweet: &ScoredTweet) -> Result<usize, TimeSeriesError> {
    map.get(tweet.id.as_str())
        .copied()
        .ok_or_else(|| TimeSeriesError::MissingAssignment(tweet.id.clone()))
}

pub fn topic_aggregate(
    scores: &[ScoredTweet],
    assignments: &[TopicAssignment],
    topic: usize,
    num_topics: usize,
) -> Result<DimensionAggregate, TimeSeriesError> {
    if topic >= num_topics {
        return Err(TimeSeriesError::UnknownTopic { topic, k: num_topics });
    }
    let map = assignment_map(assignments);
    let mut members = Vec::new();
    for s in scores {
        if topic_of(&map, s)? == topic {
            members.push(&s.score);
        }
    }
    Ok(DimensionAggregate::from_scores(members))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DailyPolarization {
    /// Virtue mean minus vice mean; `None` when the day has neither.
    pub polarization: Option<f64>,
    pub virtue_mean: f64,
    pub vice_mean: f64,
    pub n_virtue: usize,
    pub n_vice: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationPoint {
    pub day: NaiveDate,
    pub foundations: [DailyPolarization; 5],
}

fn group_by_day(scores: &[ScoredTweet]) -> BTreeMap<NaiveDate, Vec<&ScoredTweet>> {
    let mut days: BTreeMap<NaiveDate, Vec<&ScoredTweet>> = BTreeMap::new();
    for s in scores {
        days.entry(day_of(s.timestamp)).or_default().push(s);
    }
    days
}

/// One point per UTC day that has at least one tweet. A pole with no tweets
/// on a day contributes 0 to the difference and shows up as a zero count.
pub fn daily_polarization(scores: &[ScoredTweet]) -> Vec<PolarizationPoint> {
    group_by_day(scores)
        .into_iter()
        .map(|(day, tweets)| {
            let agg = DimensionAggregate::from_scores(tweets.iter().map(|t| &t.score));
            let mut foundations = [DailyPolarization::default(); 5];
            for f in 0..5 {
                let [vice, virtue] = agg.cells[f];
                foundations[f] = DailyPolarization {
                    polarization: (vice.n > 0 || virtue.n > 0).then_some(virtue.mean - vice.mean),
                    virtue_mean: virtue.mean,
                    vice_mean: vice.mean,
                    n_virtue: virtue.n,
                    n_vice: vice.n,
                };
            }
            PolarizationPoint { day, foundations }
        })
        .collect()
}

/// Date-indexed polarization series per foundation, in table order. Days
/// where a foundation is undefined are absent.
pub fn polarization_series(points: &[PolarizationPoint]) -> Vec<(Foundation, BTreeMap<NaiveDate, f64>)> {
    Foundation::TABLE_ORDER
        .iter()
        .map(|&f| {
            let series = points
                .iter()
                .filter_map(|p| p.foundations[f.index()].polarization.map(|v| (p.day, v)))
                .collect();
            (f, series)
        })
        .collect()
}

/// Fills every missing day between the first and last observation by linear
/// interpolation.
pub fn interpolate_daily(series: &BTreeMap<NaiveDate, f64>) -> BTreeMap<NaiveDate, f64> {
    let mut out = BTreeMap::new();
    let points: Vec<(NaiveDate, f64)> = series.iter().map(|(d, v)| (*d, *v)).collect();
    for pair in points.windows(2) {
        let ((d0, v0), (d1, v1)) = (pair[0], pair[1]);
        let span = (d1 - d0).num_days() as f64;
        let mut d = d0;
        while d < d1 {
            let frac = (d - d0).num_days() as f64 / span;
            out.insert(d, v0 + frac * (v1 - v0));
            d = d.succ_opt().unwrap();
        }
    }
    if let Some(&(d, v)) = points.last() {
        out.insert(d, v);
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PresencePct {
    pub pct_days_vice: f64,
    pub pct_days_virtue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayPresence {
    /// `[topic][foundation]`.
    pub rows: Vec<[PresencePct; 5]>,
    pub active_days: Vec<usize>,
}

/// For each topic, the share of its active days (days with at least one of
/// its tweets) that contain a vice-polarity and a virtue-polarity tweet.
pub fn day_presence(
    scores: &[ScoredTweet],
    assignments: &[TopicAssignment],
    num_topics: usize,
) -> Result<DayPresence, TimeSeriesError> {
    let map = assignment_map(assignments);
    let mut active: Vec<BTreeSet<NaiveDate>> = vec![BTreeSet::new(); num_topics];
    let mut vice: Vec<[BTreeSet<NaiveDate>; 5]> = vec![Default::default(); num_topics];
    let mut virtue: Vec<[BTreeSet<NaiveDate>; 5]> = vec![Default::default(); num_topics];
    for s in scores {
        let t = topic_of(&map, s)?;
        if t >= num_topics {
            return Err(TimeSeriesError::UnknownTopic { topic: t, k: num_topics });
        }
        let day = day_of(s.timestamp);
        active[t].insert(day);
        for (f, fs) in s.score.foundations.iter().enumerate() {
            match fs.polarity {
                Polarity::Vice => {
                    vice[t][f].insert(day);
                }
                Polarity::Virtue => {
                    virtue[t][f].insert(day);
                }
                Polarity::None => {}
            }
        }
    }
    let rows = (0..num_topics)
        .map(|t| {
            let days = active[t].len();
            let pct = |n: usize| if days == 0 { 0.0 } else { 100.0 * n as f64 / days as f64 };
            let mut row = [PresencePct::default(); 5];
            for f in 0..5 {
                row[f] = PresencePct {
                    pct_days_vice: pct(vice[t][f].len()),
                    pct_days_virtue: pct(virtue[t][f].len()),
                };
            }
            row
        })
        .collect();
    Ok(DayPresence {
        rows,
        active_days: active.iter().map(BTreeSet::len).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityPoint {
    pub day: NaiveDate,
    pub activities: usize,
    pub unique_users: usize,
}

/// Tweets and distinct authors per UTC day; days without tweets are absent.
pub fn activity_series(corpus: &Corpus) -> Vec<ActivityPoint> {
    let mut days: BTreeMap<NaiveDate, (usize, BTreeSet<&str>)> = BTreeMap::new();
    for r in corpus.records() {
        let e = days.entry(day_of(r.timestamp)).or_default();
        e.0 += 1;
        e.1.insert(&r.author_id);
    }
    days.into_iter()
        .map(|(day, (activities, users))| ActivityPoint {
            day,
            activities,
            unique_users: users.len(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TweetRecord;
    use crate::moral::FoundationScore;

    fn score(entries: &[(Foundation, f64, Polarity)]) -> MoralScore {
        let mut s = MoralScore::default();
        for &(f, loading, polarity) in entries {
            s.foundations[f.index()] = FoundationScore { loading, polarity, matched: 1 };
        }
        s
    }

    fn tweet(id: &str, ts: i64, s: MoralScore) -> ScoredTweet {
        ScoredTweet { id: id.into(), timestamp: ts, score: s }
    }

    fn assign(id: &str, topic: usize) -> TopicAssignment {
        TopicAssignment { doc_id: id.into(), topic, mixture: vec![] }
    }

    const DAY: i64 = 86_400;

    #[test]
    fn default_windows_match_study_periods() {
        let w = default_windows();
        assert_eq!(w.len(), 4);
        assert_eq!(day_of(w[0].start).to_string(), "2018-04-01");
        assert_eq!(day_of(w[1].start).to_string(), "2018-05-04");
        assert_eq!(day_of(w[2].start).to_string(), "2018-07-22");
        assert_eq!(day_of(w[3].start).to_string(), "2018-12-18");
        assert_eq!(day_of(w[3].end - 1).to_string(), "2019-04-30");
        validate_partition(&w).unwrap();
    }

    #[test]
    fn invalid_windows() {
        assert!(TimeWindow::new("x", 5, 5).is_err());
        let a = TimeWindow::new("a", 0, 10).unwrap();
        let b = TimeWindow::new("b", 5, 20).unwrap();
        assert!(validate_partition(&[a, b]).is_err());
        assert!(TimeWindow::from_dates("c", "2018-13-01", "2019-01-01").is_err());
    }

    #[test]
    fn window_mean() {
        let w = TimeWindow::new("w", 0, 100).unwrap();
        let scores = vec![
            tweet("a", 1, score(&[(Foundation::CareHarm, 0.4, Polarity::Virtue)])),
            tweet("b", 2, score(&[(Foundation::CareHarm, 0.6, Polarity::Virtue)])),
            tweet("c", 200, score(&[(Foundation::CareHarm, 0.9, Polarity::Virtue)])),
        ];
        let agg = window_aggregate(&scores, &w);
        let care = agg.get(Foundation::CareHarm, Polarity::Virtue);
        assert!((care.mean - 0.5).abs() < 1e-15);
        assert_eq!(care.n, 2);
        let auth = agg.get(Foundation::AuthorityRespect, Polarity::Vice);
        assert_eq!((auth.mean, auth.n), (0.0, 0));
    }

    #[test]
    fn one_topic_equals_full_window() {
        let scores: Vec<ScoredTweet> = (0..10)
            .map(|i| {
                let p = if i % 3 == 0 { Polarity::Vice } else { Polarity::Virtue };
                tweet(&format!("t{i}"), i * 50, score(&[(Foundation::LoyaltyIngroup, 0.1 * i as f64 + 0.05, p)]))
            })
            .collect();
        let assignments: Vec<_> = scores.iter().map(|s| assign(&s.id, 0)).collect();
        let by_topic = topic_aggregate(&scores, &assignments, 0, 1).unwrap();
        let full = window_aggregate(&scores, &TimeWindow::new("all", 0, i64::MAX).unwrap());
        assert_eq!(by_topic, full);
    }

    #[test]
    fn topic_errors_and_empty_topic() {
        let scores = vec![tweet("a", 0, score(&[(Foundation::CareHarm, 0.5, Polarity::Vice)]))];
        let asg = vec![assign("a", 0)];
        assert!(matches!(topic_aggregate(&scores, &asg, 3, 2), Err(TimeSeriesError::UnknownTopic { .. })));
        assert_eq!(topic_aggregate(&scores, &asg, 1, 2).unwrap(), DimensionAggregate::default());
        assert!(matches!(
            topic_aggregate(&scores, &[], 0, 2),
            Err(TimeSeriesError::MissingAssignment(_))
        ));
    }

    #[test]
    fn polarization_two_sided_and_one_sided() {
        let scores = vec![
            tweet("a", 10, score(&[(Foundation::CareHarm, 0.6, Polarity::Virtue)])),
            tweet("b", 20, score(&[(Foundation::CareHarm, 0.4, Polarity::Vice)])),
            tweet("c", DAY + 5, score(&[(Foundation::CareHarm, 0.3, Polarity::Vice)])),
        ];
        let points = daily_polarization(&scores);
        assert_eq!(points.len(), 2);
        let d0 = points[0].foundations[Foundation::CareHarm.index()];
        assert!((d0.polarization.unwrap() - 0.2).abs() < 1e-15);
        let d1 = points[1].foundations[Foundation::CareHarm.index()];
        assert!((d1.polarization.unwrap() + 0.3).abs() < 1e-15);
        assert_eq!((d1.n_virtue, d1.n_vice), (0, 1));
        assert_eq!(points[0].foundations[Foundation::PuritySanctity.index()].polarization, None);
    }

    #[test]
    fn presence_counts() {
        let mut scores = Vec::new();
        for d in 0..10 {
            let s = if d < 7 {
                score(&[(Foundation::CareHarm, 0.5, Polarity::Virtue)])
            } else {
                MoralScore::default()
            };
            scores.push(tweet(&format!("t{d}"), d * DAY + 100, s));
        }
        let asg: Vec<_> = scores.iter().map(|s| assign(&s.id, 0)).collect();
        let p = day_presence(&scores, &asg, 2).unwrap();
        let care = p.rows[0][Foundation::CareHarm.index()];
        assert!((care.pct_days_virtue - 70.0).abs() < 1e-12);
        assert_eq!(care.pct_days_vice, 0.0);
        assert_eq!(p.rows[1][0], PresencePct::default());
        assert_eq!(p.active_days, vec![10, 0]);
    }

    #[test]
    fn activity_by_day() {
        let rec = |id: &str, author: &str, ts: i64| TweetRecord {
            id: id.into(),
            parent_id: None,
            author_id: author.into(),
            timestamp: ts,
            text: String::new(),
            lang: None,
        };
        let corpus = Corpus::from_records(vec![
            rec("1", "u1", 10),
            rec("2", "u2", 20),
            rec("3", "u1", 30),
            rec("4", "u3", 5 * DAY),
        ])
        .unwrap();
        let series = activity_series(&corpus);
        assert_eq!(series.len(), 2);
        assert_eq!((series[0].activities, series[0].unique_users), (3, 2));
        assert_eq!(series[1].day, day_of(5 * DAY));
    }

    #[test]
    fn interpolation_fills_gaps() {
        let d = |s: &str| parse_date(s).unwrap();
        let series: BTreeMap<_, _> = [(d("2018-04-01"), 1.0), (d("2018-04-05"), 5.0)].into_iter().collect();
        let filled = interpolate_daily(&series);
        assert_eq!(filled.len(), 5);
        assert!((filled[&d("2018-04-03")] - 3.0).abs() < 1e-15);
    }
}
