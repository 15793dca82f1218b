//! Tweet cleaning, tokenization, vocabulary construction and bag-of-words.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextPrepError {
    #[error("cannot read stopword list {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no documents to build a vocabulary from")]
    NoDocuments,
    #[error("every token was eliminated while building the vocabulary")]
    EmptyVocabulary,
    #[error("invalid clean config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanConfig {
    pub remove_usernames: bool,
    pub remove_urls: bool,
    pub remove_emoticons: bool,
    pub strip_punctuation: bool,
    pub strip_hashtag_symbol: bool,
    pub lowercase: bool,
    #[serde(skip)]
    pub stopwords: BTreeSet<String>,
    pub drop_top_n_frequent: usize,
    pub min_token_length: usize,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            remove_usernames: true,
            remove_urls: true,
            remove_emoticons: true,
            strip_punctuation: true,
            strip_hashtag_symbol: true,
            lowercase: true,
            stopwords: BTreeSet::new(),
            drop_top_n_frequent: 0,
            min_token_length: 1,
        }
    }
}

impl CleanConfig {
    /// Every transformation switched off.
    pub fn passthrough() -> Self {
        Self {
            remove_usernames: false,
            remove_urls: false,
            remove_emoticons: false,
            strip_punctuation: false,
            strip_hashtag_symbol: false,
            lowercase: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TextPrepError> {
        if self.min_token_length < 1 {
            return Err(TextPrepError::InvalidConfig(
                "min_token_length must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>, TextPrepError> {
    let text = fs::read_to_string(path).map_err(|source| TextPrepError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

const ASCII_EMOTICONS: [&str; 6] = [":)", ":(", ";)", ":D", ":P", "<3"];

fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F300..=0x1F5FF
        | 0x1F600..=0x1F64F
        | 0x1F680..=0x1F6FF
        | 0x1F900..=0x1F9FF
        | 0x1FA70..=0x1FAFF
        | 0x1F1E6..=0x1F1FF
        | 0x2600..=0x26FF
        | 0x2700..=0x27BF
        | 0xFE0F
        | 0x200D)
}

fn is_punctuation(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_punctuation();
    }
    // General punctuation, CJK/fullwidth punctuation and common quote marks.
    matches!(c as u32,
        0x00A1..=0x00BF
        | 0x2010..=0x205E
        | 0x3000..=0x303F
        | 0xFF01..=0xFF0F
        | 0xFF1A..=0xFF20
        | 0xFF3B..=0xFF40
        | 0xFF5B..=0xFF65)
        || c == '\u{00D7}'
        || c == '\u{00F7}'
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

fn has_prefix_ignore_case(token: &str, prefix: &str) -> bool {
    token.len() >= prefix.len()
        && token
            .get(..prefix.len())
            .is_some_and(|head| head.eq_ignore_ascii_case(prefix))
}

fn is_url(token: &str) -> bool {
    ["http://", "https://", "t.co/"]
        .iter()
        .any(|p| has_prefix_ignore_case(token, p))
}

fn map_tokens(text: &str, f: impl Fn(&str) -> Option<String>) -> String {
    text.split_whitespace()
        .filter_map(f)
        .collect::<Vec<_>>()
        .join(" ")
}

fn clean_pass(text: &str, config: &CleanConfig) -> String {
    let mut out = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if config.remove_urls {
        out = map_tokens(&out, |t| (!is_url(t)).then(|| t.to_string()));
    }
    if config.remove_usernames {
        out = map_tokens(&out, |t| (!t.starts_with('@')).then(|| t.to_string()));
    }
    if config.remove_emoticons {
        let spaced: String = out
            .chars()
            .map(|c| if is_emoji(c) { ' ' } else { c })
            .collect();
        out = map_tokens(&spaced, |t| {
            (!ASCII_EMOTICONS.contains(&t)).then(|| t.to_string())
        });
    }
    if config.strip_hashtag_symbol {
        out = map_tokens(&out, |t| {
            let word = t.trim_start_matches('#');
            // A stripped tag can expose a marker the earlier stages remove.
            let exposed = (config.remove_urls && is_url(word))
                || (config.remove_usernames && word.starts_with('@'));
            (!word.is_empty() && !exposed).then(|| word.to_string())
        });
    }
    if config.strip_punctuation {
        let spaced: String = out
            .chars()
            .filter(|&c| !is_apostrophe(c))
            .map(|c| if is_punctuation(c) { ' ' } else { c })
            .collect();
        out = spaced.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    if config.lowercase {
        out = out.to_lowercase();
    }
    out
}

/// Cleans a raw tweet. Stages run in the order URL, username, emoticon,
/// hashtag symbol, punctuation, lowercase; whitespace is collapsed. The
/// stage sequence is repeated until the text stops changing, so a removal
/// that exposes a new URL or username (e.g. `#https://...`) is caught.
pub fn clean(text: &str, config: &CleanConfig) -> String {
    let mut current = clean_pass(text, config);
    // Each changing pass removes at least one non-space character, so this
    // terminates quickly; the bound is a backstop.
    for _ in 0..64 {
        let next = clean_pass(&current, config);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

pub fn tokenize(text: &str, config: &CleanConfig) -> Vec<String> {
    text.split_whitespace()
        .filter(|t| t.chars().count() >= config.min_token_length)
        .filter(|t| !config.stopwords.contains(*t))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    words: Vec<String>,
    doc_freq: Vec<usize>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from `(word, document frequency)` rows in index
    /// order.
    pub fn from_entries(entries: Vec<(String, usize)>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (w.clone(), i))
            .collect();
        let (words, doc_freq) = entries.into_iter().unzip();
        Self {
            words,
            doc_freq,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, index: usize) -> &str {
        &self.words[index]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn doc_freq(&self, index: usize) -> usize {
        self.doc_freq[index]
    }
}

/// Builds the vocabulary. Words are ranked by document frequency (descending,
/// ties by word); the top `drop_top_n_frequent` are discarded and the rest
/// are indexed in rank order.
pub fn build_vocabulary(
    docs: &[Vec<String>],
    config: &CleanConfig,
) -> Result<Vocabulary, TextPrepError> {
    if docs.is_empty() {
        return Err(TextPrepError::NoDocuments);
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let unique: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
        for w in unique {
            *df.entry(w).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = df.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let kept: Vec<(String, usize)> = ranked
        .into_iter()
        .skip(config.drop_top_n_frequent)
        .map(|(w, n)| (w.to_string(), n))
        .collect();
    if kept.is_empty() {
        return Err(TextPrepError::EmptyVocabulary);
    }
    Ok(Vocabulary::from_entries(kept))
}

/// Sparse word-count vector, sorted by word index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BagOfWords {
    pub entries: Vec<(usize, u32)>,
}

impl BagOfWords {
    pub fn from_counts(counts: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut merged: BTreeMap<usize, u32> = BTreeMap::new();
        for (w, c) in counts {
            if c > 0 {
                *merged.entry(w).or_insert(0) += c;
            }
        }
        Self {
            entries: merged.into_iter().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|&(w, _)| w)
    }
}

pub fn doc_to_bow(tokens: &[String], vocab: &Vocabulary) -> BagOfWords {
    BagOfWords::from_counts(tokens.iter().filter_map(|t| vocab.index_of(t)).map(|i| (i, 1)))
}

/// Row of the cleaned-corpus JSON-lines output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub id: String,
    pub tokens: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn clean_reference_tweet() {
        let cfg = CleanConfig::default();
        assert_eq!(
            clean("@user check https://t.co/x #WhiteHelmets!", &cfg),
            "check whitehelmets"
        );
    }

    #[test]
    fn clean_empty_and_passthrough() {
        assert_eq!(clean("", &CleanConfig::default()), "");
        assert_eq!(clean("Hello.", &CleanConfig::passthrough()), "Hello.");
        assert_eq!(clean("  a \t b  ", &CleanConfig::passthrough()), "a b");
    }

    #[test]
    fn clean_emoticons() {
        let cfg = CleanConfig::default();
        assert_eq!(clean("so sad :( but <3 you 😀ok", &cfg), "so sad but you ok");
        assert_eq!(clean(":D", &cfg), "");
    }

    #[test]
    fn clean_nested_markers() {
        let cfg = CleanConfig::default();
        assert_eq!(clean("see #https://t.co/abc now", &cfg), "see now");
        assert_eq!(clean("HTTP://EXAMPLE.COM Douma", &cfg), "douma");
        assert_eq!(clean("don't stop-gap", &cfg), "dont stop gap");
    }

    #[test]
    fn tokenize_filters() {
        let mut cfg = CleanConfig::default();
        assert_eq!(tokenize("chemical attack douma", &cfg), toks(&["chemical", "attack", "douma"]));
        cfg.stopwords.insert("a".into());
        assert_eq!(tokenize("a chemical", &cfg), toks(&["chemical"]));
        let cfg = CleanConfig {
            min_token_length: 2,
            ..CleanConfig::default()
        };
        assert_eq!(tokenize("x chemical", &cfg), toks(&["chemical"]));
    }

    #[test]
    fn vocabulary_counts_and_drop() {
        let docs = vec![toks(&["a", "b"]), toks(&["a"])];
        let v = build_vocabulary(&docs, &CleanConfig::default()).unwrap();
        assert_eq!(v.words(), &toks(&["a", "b"])[..]);
        assert_eq!(v.doc_freq(v.index_of("a").unwrap()), 2);
        assert_eq!(v.doc_freq(v.index_of("b").unwrap()), 1);

        let cfg = CleanConfig {
            drop_top_n_frequent: 1,
            ..CleanConfig::default()
        };
        let v = build_vocabulary(&docs, &cfg).unwrap();
        assert_eq!(v.words(), &toks(&["b"])[..]);
        assert_eq!(v.index_of("b"), Some(0));
    }

    #[test]
    fn vocabulary_errors() {
        assert!(matches!(
            build_vocabulary(&[], &CleanConfig::default()),
            Err(TextPrepError::NoDocuments)
        ));
        let cfg = CleanConfig {
            drop_top_n_frequent: 5,
            ..CleanConfig::default()
        };
        assert!(matches!(
            build_vocabulary(&[toks(&["a", "b"])], &cfg),
            Err(TextPrepError::EmptyVocabulary)
        ));
    }

    #[test]
    fn bow_counts() {
        let v = Vocabulary::from_entries(vec![("a".into(), 1), ("b".into(), 1)]);
        assert_eq!(doc_to_bow(&toks(&["b", "b"]), &v).entries, vec![(1, 2)]);
        assert!(doc_to_bow(&toks(&["z", "q"]), &v).is_empty());
    }

    fn naive_df(docs: &[Vec<String>]) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for doc in docs {
            let mut seen: Vec<&String> = Vec::new();
            for t in doc {
                if !seen.contains(&t) {
                    seen.push(t);
                    *out.entry(t.clone()).or_insert(0) += 1;
                }
            }
        }
        out
    }

    fn word_strategy() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["aa", "bb", "cc", "dd", "ee", "ff", "gg", "hh", "ii", "jj"])
            .prop_map(str::to_string)
    }

    proptest! {
        #[test]
        fn clean_is_idempotent(
            text in r#"[ a-zA-Z@#:/.!?'’()<3DP😀🙂\-]{0,60}"#,
            mask in 0u8..64,
        ) {
            let cfg = CleanConfig {
                remove_urls: mask & 1 != 0,
                remove_usernames: mask & 2 != 0,
                remove_emoticons: mask & 4 != 0,
                strip_hashtag_symbol: mask & 8 != 0,
                strip_punctuation: mask & 16 != 0,
                lowercase: mask & 32 != 0,
                ..CleanConfig::default()
            };
            let once = clean(&text, &cfg);
            prop_assert_eq!(clean(&once, &cfg), once.clone());
        }

        #[test]
        fn clean_idempotent_on_urls(prefix in "(#|@|\\(|😀)?", host in "[A-Za-z]{1,5}") {
            let cfg = CleanConfig::default();
            let text = format!("x {prefix}https://{host}.co/{host} y");
            let once = clean(&text, &cfg);
            prop_assert_eq!(clean(&once, &cfg), once);
        }

        #[test]
        fn vocabulary_df_matches_recount(
            docs in prop::collection::vec(prop::collection::vec(word_strategy(), 0..8), 100)
        ) {
            prop_assume!(docs.iter().any(|d| !d.is_empty()));
            let vocab = build_vocabulary(&docs, &CleanConfig::default()).unwrap();
            let oracle = naive_df(&docs);
            prop_assert_eq!(vocab.len(), oracle.len());
            for (w, n) in &oracle {
                prop_assert_eq!(vocab.doc_freq(vocab.index_of(w).unwrap()), *n);
            }
            let kept: usize = (0..vocab.len()).map(|i| vocab.doc_freq(i)).sum();
            let unique: usize = oracle.values().sum();
            prop_assert!(kept <= unique);
        }

        #[test]
        fn bow_matches_naive_count(doc in prop::collection::vec(word_strategy(), 0..30)) {
            let vocab = Vocabulary::from_entries(
                ["aa", "cc", "ee", "gg", "ii"].iter().map(|w| (w.to_string(), 1)).collect(),
            );
            let bow = doc_to_bow(&doc, &vocab);
            let mut naive: HashMap<usize, u32> = HashMap::new();
            for t in &doc {
                if let Some(i) = vocab.index_of(t) {
                    *naive.entry(i).or_insert(0) += 1;
                }
            }
            prop_assert_eq!(bow.entries.len(), naive.len());
            for (i, c) in &bow.entries {
                prop_assert_eq!(naive[i], *c);
            }
            prop_assert!(bow.total() as usize <= doc.len());
        }
    }
}
