//! Synthetic tweet corpus with planted topics, planted lexicon words and a
//! known cascade forest, used to exercise every pipeline stage without the
//! original data.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::TweetRecord;
use crate::timeseries::{default_windows, TimeWindow};

/// Derives an independent sub-seed: the first eight bytes (little-endian) of
/// SHA-256 over the parent seed's little-endian bytes followed by `label`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Word pools of the planted topics.
pub const TOPIC_WORDS: [&[&str]; 5] = [
    &["chemical", "douma", "gas", "chlorine", "victims", "hospital", "inspectors", "samples", "symptoms", "evidence"],
    &["helmets", "rescue", "volunteers", "rubble", "sirens", "ambulance", "civilians", "shelter", "dust", "survivors"],
    &["media", "footage", "staged", "propaganda", "video", "narrative", "broadcast", "journalist", "actors", "claims"],
    &["funding", "donors", "oscar", "film", "documentary", "budget", "award", "grants", "charity", "sponsors"],
    &["airstrike", "idlib", "aleppo", "regime", "militants", "offensive", "ceasefire", "frontline", "convoy", "border"],
];

const VIRTUE_WORDS: [&str; 10] =
    ["care", "protect", "fair", "justice", "loyal", "solidarity", "respect", "law", "sacred", "pure"];
const VICE_WORDS: [&str; 10] =
    ["harm", "kill", "cheat", "fraud", "betray", "traitor", "defy", "chaos", "disgust", "filth"];
const FILLER: [&str; 8] = ["the", "and", "is", "this", "of", "about", "now", "again"];
const EMOTICONS: [&str; 4] = [":)", ":(", "<3", "😡"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureConfig {
    pub seed: u64,
    pub n_tweets: usize,
    pub n_orphans: usize,
    pub n_users: usize,
    /// Active days drawn per window.
    pub days_per_window: usize,
    pub windows: Vec<TimeWindow>,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_tweets: 200,
            n_orphans: 4,
            n_users: 30,
            days_per_window: 10,
            windows: default_windows(),
        }
    }
}

/// Daily cascades: each active day hosts one cascade about one topic whose
/// members reply to a random earlier member within a few hours. Orphans
/// reference parents absent from the corpus. Output is sorted by
/// `(timestamp, id)`.
pub fn generate_fixture(config: &FixtureConfig) -> Vec<TweetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "fixture"));
    let mut days: Vec<i64> = Vec::new();
    for w in &config.windows {
        let first = w.start.div_euclid(86_400);
        let last = (w.end - 1).div_euclid(86_400);
        let mut picked = BTreeSet::new();
        let wanted = config.days_per_window.min((last - first + 1) as usize);
        while picked.len() < wanted {
            picked.insert(rng.random_range(first..=last));
        }
        days.extend(picked);
    }
    assert!(!days.is_empty(), "fixture needs at least one active day");

    let in_cascades = config.n_tweets.saturating_sub(config.n_orphans);
    let mut sizes = vec![in_cascades / days.len(); days.len()];
    for s in sizes.iter_mut().take(in_cascades % days.len()) {
        *s += 1;
    }
    sizes.shuffle(&mut rng);

    let mut records = Vec::with_capacity(config.n_tweets);
    let mut next_id = 0usize;
    let mut new_id = || {
        next_id += 1;
        format!("t{next_id:04}")
    };
    for (c, (&day, &size)) in days.iter().zip(&sizes).enumerate() {
        let topic = c % TOPIC_WORDS.len();
        let root_ts = day * 86_400 + rng.random_range(0..12 * 3600);
        let mut members: Vec<(String, i64)> = Vec::new();
        for m in 0..size {
            let id = new_id();
            let (parent_id, ts) = if m == 0 {
                (None, root_ts)
            } else {
                let (pid, pts) = members[rng.random_range(0..members.len())].clone();
                (Some(pid), pts + rng.random_range(60..3600))
            };
            let text = tweet_text(&mut rng, topic, config.n_users);
            records.push(TweetRecord {
                id: id.clone(),
                parent_id,
                author_id: format!("u{:02}", rng.random_range(0..config.n_users)),
                timestamp: ts,
                text,
                lang: Some("en".into()),
            });
            members.push((id, ts));
        }
    }
    for o in 0..config.n_orphans {
        let day = days[rng.random_range(0..days.len())];
        let topic = rng.random_range(0..TOPIC_WORDS.len());
        records.push(TweetRecord {
            id: new_id(),
            parent_id: Some(format!("deleted{o}")),
            author_id: format!("u{:02}", rng.random_range(0..config.n_users)),
            timestamp: day * 86_400 + rng.random_range(0..86_400),
            text: tweet_text(&mut rng, topic, config.n_users),
            lang: Some("en".into()),
        });
    }
    records.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
    records
}

fn tweet_text(rng: &mut ChaCha8Rng, topic: usize, n_users: usize) -> String {
    let mut words: Vec<String> = Vec::new();
    let pool = TOPIC_WORDS[topic];
    for _ in 0..rng.random_range(4..7) {
        words.push(pool[rng.random_range(0..pool.len())].to_string());
    }
    for _ in 0..rng.random_range(1..3) {
        words.push(FILLER[rng.random_range(0..FILLER.len())].to_string());
    }
    for _ in 0..2 {
        let list = if rng.random_bool(0.5) { &VIRTUE_WORDS } else { &VICE_WORDS };
        words.push(list[rng.random_range(0..list.len())].to_string());
    }
    words.shuffle(rng);
    if rng.random_bool(0.3) {
        let w = &mut words[0];
        *w = w[..1].to_uppercase() + &w[1..];
    }
    if rng.random_bool(0.4) {
        words.insert(0, format!("@u{:02}", rng.random_range(0..n_users)));
    }
    if rng.random_bool(0.3) {
        words.push(format!("#{}", pool[rng.random_range(0..pool.len())]));
    }
    if rng.random_bool(0.25) {
        words.push(format!("https://t.co/{:08x}", rng.random::<u32>()));
    }
    if rng.random_bool(0.2) {
        words.push(EMOTICONS[rng.random_range(0..EMOTICONS.len())].to_string());
    }
    let mut text = words.join(" ");
    if rng.random_bool(0.3) {
        text.push('!');
    }
    text
}

pub fn to_jsonl(records: &[TweetRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// The committed 200-tweet fixture generated with the default config.
pub const FIXTURE_JSONL: &str = include_str!("../data/fixture_tweets.jsonl");
