//! Tweet ingestion, interaction-forest construction and cascade aggregation.
//!
//! Every record names at most one parent. A record is a cascade root when it
//! has no parent, or when its parent is not part of the corpus (orphans are
//! promoted so that no text is lost). Internal nodes are both children and
//! parents; leaves are children that nobody replies to.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate tweet id {0:?}")]
    DuplicateId(String),
    #[error("invalid record {id:?}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("unknown tweet id {0:?}")]
    UnknownId(String),
    #[error("cycle in parent chain through tweet {0:?}")]
    Cycle(String),
}

/// One social-media post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    #[serde(default)]
    pub parent_id: Option<String>,
    pub author_id: String,
    pub timestamp: i64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

impl TweetRecord {
    fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |reason: &str| CorpusError::InvalidRecord {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.is_empty() {
            return Err(invalid("empty id"));
        }
        if self.parent_id.as_deref() == Some(self.id.as_str()) {
            return Err(invalid("record is its own parent"));
        }
        if self.timestamp < 0 {
            return Err(invalid("negative timestamp"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRole {
    Root,
    Internal,
    Leaf,
}

/// An immutable collection of tweets indexed by id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    records: Vec<TweetRecord>,
    index: HashMap<String, usize>,
    child_count: Vec<usize>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids and records that violate the
    /// record invariants.
    pub fn from_records(records: Vec<TweetRecord>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            rec.validate()?;
            if index.insert(rec.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(rec.id.clone()));
            }
        }
        let mut child_count = vec![0; records.len()];
        for rec in &records {
            if let Some(p) = rec.parent_id.as_ref().and_then(|p| index.get(p)) {
                child_count[*p] += 1;
            }
        }
        Ok(Self {
            records,
            index,
            child_count,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[TweetRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&TweetRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    fn position(&self, id: &str) -> Result<usize, CorpusError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| CorpusError::UnknownId(id.to_string()))
    }

    /// Parent position inside the corpus, if the parent is present.
    fn effective_parent(&self, pos: usize) -> Option<usize> {
        self.records[pos]
            .parent_id
            .as_ref()
            .and_then(|p| self.index.get(p).copied())
    }

    pub fn classify_node(&self, id: &str) -> Result<NodeRole, CorpusError> {
        let pos = self.position(id)?;
        Ok(self.role_at(pos))
    }

    fn role_at(&self, pos: usize) -> NodeRole {
        match (self.effective_parent(pos), self.child_count[pos]) {
            (None, _) => NodeRole::Root,
            (Some(_), 0) => NodeRole::Leaf,
            (Some(_), _) => NodeRole::Internal,
        }
    }

    /// Ids of records whose parent id is set but missing from the corpus.
    pub fn orphans(&self) -> Vec<&str> {
        self.records
            .iter()
            .enumerate()
            .filter(|(i, r)| r.parent_id.is_some() && self.effective_parent(*i).is_none())
            .map(|(_, r)| r.id.as_str())
            .collect()
    }
}

/// Result of reading a JSON-lines corpus file.
#[derive(Debug)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub skipped_lines: usize,
}

pub fn load_corpus(path: &Path) -> Result<LoadedCorpus, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut records = Vec::new();
    let mut skipped_lines = 0;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TweetRecord>(&line) {
            Ok(rec) => match rec.validate() {
                Ok(()) => records.push(rec),
                Err(e) => {
                    log::warn!("{}:{}: skipping record: {}", path.display(), lineno + 1, e);
                    skipped_lines += 1;
                }
            },
            Err(e) => {
                log::warn!("{}:{}: skipping malformed line: {}", path.display(), lineno + 1, e);
                skipped_lines += 1;
            }
        }
    }
    Ok(LoadedCorpus {
        corpus: Corpus::from_records(records)?,
        skipped_lines,
    })
}

/// A rooted interaction tree. `member_ids[0]` is always the root; the other
/// members follow in `(timestamp, id)` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cascade {
    pub root_id: String,
    pub root_timestamp: i64,
    pub member_ids: Vec<String>,
}

impl Cascade {
    pub fn size(&self) -> usize {
        self.member_ids.len()
    }
}

/// Builds one cascade per root. Cascades come out sorted by root
/// `(timestamp, id)`.
pub fn build_cascades(corpus: &Corpus) -> Result<Vec<Cascade>, CorpusError> {
    let n = corpus.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut roots = Vec::new();
    for pos in 0..n {
        match corpus.effective_parent(pos) {
            Some(p) => children[p].push(pos),
            None => roots.push(pos),
        }
    }

    let mut owner = vec![usize::MAX; n];
    let mut cascades = Vec::with_capacity(roots.len());
    for (ci, &root) in roots.iter().enumerate() {
        let mut members = Vec::new();
        let mut stack = vec![root];
        while let Some(pos) = stack.pop() {
            owner[pos] = ci;
            members.push(pos);
            stack.extend(children[pos].iter().copied());
        }
        let recs = corpus.records();
        members[1..].sort_by(|&a, &b| {
            (recs[a].timestamp, &recs[a].id).cmp(&(recs[b].timestamp, &recs[b].id))
        });
        cascades.push(Cascade {
            root_id: recs[root].id.clone(),
            root_timestamp: recs[root].timestamp,
            member_ids: members.iter().map(|&p| recs[p].id.clone()).collect(),
        });
    }

    // Anything not reached from a root hangs off a cycle.
    if let Some(start) = (0..n).find(|&p| owner[p] == usize::MAX) {
        let mut seen = HashSet::new();
        let mut pos = start;
        while seen.insert(pos) {
            pos = corpus
                .effective_parent(pos)
                .expect("unreached node always has a parent");
        }
        return Err(CorpusError::Cycle(corpus.records()[pos].id.clone()));
    }

    cascades.sort_by(|a, b| (a.root_timestamp, &a.root_id).cmp(&(b.root_timestamp, &b.root_id)));
    Ok(cascades)
}

/// The `k` largest cascades; ties go to the earlier root, then the smaller
/// root id.
pub fn top_k_cascades(cascades: &[Cascade], k: usize) -> Vec<Cascade> {
    let mut sorted: Vec<&Cascade> = cascades.iter().collect();
    sorted.sort_by(|a, b| {
        b.size()
            .cmp(&a.size())
            .then(a.root_timestamp.cmp(&b.root_timestamp))
            .then(a.root_id.cmp(&b.root_id))
    });
    sorted.into_iter().take(k).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoDocument {
    pub cascade_root_id: String,
    pub text: String,
    pub start_time: i64,
    pub end_time: i64,
}

pub fn aggregate_pseudo_document(
    cascade: &Cascade,
    corpus: &Corpus,
) -> Result<PseudoDocument, CorpusError> {
    let mut texts = Vec::with_capacity(cascade.size());
    let mut start_time = i64::MAX;
    let mut end_time = i64::MIN;
    for id in &cascade.member_ids {
        let rec = corpus
            .get(id)
            .ok_or_else(|| CorpusError::UnknownId(id.clone()))?;
        texts.push(rec.text.as_str());
        start_time = start_time.min(rec.timestamp);
        end_time = end_time.max(rec.timestamp);
    }
    if texts.is_empty() {
        return Err(CorpusError::UnknownId(cascade.root_id.clone()));
    }
    Ok(PseudoDocument {
        cascade_root_id: cascade.root_id.clone(),
        text: texts.join(" "),
        start_time,
        end_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn rec(id: &str, parent: Option<&str>, ts: i64) -> TweetRecord {
        TweetRecord {
            id: id.into(),
            parent_id: parent.map(Into::into),
            author_id: format!("u{id}"),
            timestamp: ts,
            text: id.to_lowercase(),
            lang: None,
        }
    }

    fn chain() -> Corpus {
        Corpus::from_records(vec![
            rec("A", None, 0),
            rec("B", Some("A"), 1),
            rec("C", Some("B"), 2),
        ])
        .unwrap()
    }

    #[test]
    fn load_valid_and_malformed_lines() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"1","parent_id":null,"author_id":"a","timestamp":10,"text":"hi"}}"#).unwrap();
        writeln!(f, r#"{{"id":"2","parent_id":"1","author_id":"b","timestamp":11,"text":"yo","lang":"en"}}"#).unwrap();
        writeln!(f, "{{not json").unwrap();
        let loaded = load_corpus(f.path()).unwrap();
        assert_eq!(loaded.corpus.len(), 2);
        assert_eq!(loaded.skipped_lines, 1);

        writeln!(f, r#"{{"id":"3","author_id":"c","timestamp":12,"text":"x"}}"#).unwrap();
        let loaded = load_corpus(f.path()).unwrap();
        assert_eq!(loaded.corpus.len(), 3);
    }

    #[test]
    fn load_empty_file() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let loaded = load_corpus(f.path()).unwrap();
        assert!(loaded.corpus.is_empty());
        assert_eq!(loaded.skipped_lines, 0);
    }

    #[test]
    fn load_missing_file_is_fatal() {
        assert!(matches!(
            load_corpus(Path::new("/nonexistent/tweets.jsonl")),
            Err(CorpusError::Io { .. })
        ));
    }

    #[test]
    fn duplicate_id_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for _ in 0..2 {
            writeln!(f, r#"{{"id":"dup","author_id":"a","timestamp":1,"text":"x"}}"#).unwrap();
        }
        match load_corpus(f.path()) {
            Err(CorpusError::DuplicateId(id)) => assert_eq!(id, "dup"),
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_records_are_skipped_on_load() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"a","parent_id":"a","author_id":"a","timestamp":1,"text":"x"}}"#).unwrap();
        writeln!(f, r#"{{"id":"b","author_id":"a","timestamp":-5,"text":"x"}}"#).unwrap();
        let loaded = load_corpus(f.path()).unwrap();
        assert_eq!(loaded.corpus.len(), 0);
        assert_eq!(loaded.skipped_lines, 2);
    }

    #[test]
    fn chain_roles() {
        let c = chain();
        assert_eq!(c.classify_node("A").unwrap(), NodeRole::Root);
        assert_eq!(c.classify_node("B").unwrap(), NodeRole::Internal);
        assert_eq!(c.classify_node("C").unwrap(), NodeRole::Leaf);
        assert!(matches!(c.classify_node("Z"), Err(CorpusError::UnknownId(_))));
    }

    #[test]
    fn isolated_record_is_root() {
        let c = Corpus::from_records(vec![rec("solo", None, 5)]).unwrap();
        assert_eq!(c.classify_node("solo").unwrap(), NodeRole::Root);
        let cascades = build_cascades(&c).unwrap();
        assert_eq!(cascades.len(), 1);
        assert_eq!(cascades[0].size(), 1);
    }

    #[test]
    fn orphan_promoted_to_root() {
        let c = Corpus::from_records(vec![rec("x", Some("gone"), 3), rec("y", Some("x"), 4)]).unwrap();
        assert_eq!(c.classify_node("x").unwrap(), NodeRole::Root);
        assert_eq!(c.orphans(), vec!["x"]);
        let cascades = build_cascades(&c).unwrap();
        assert_eq!(cascades.len(), 1);
        assert_eq!(cascades[0].member_ids, vec!["x", "y"]);
    }

    #[test]
    fn chain_forms_one_cascade() {
        let cascades = build_cascades(&chain()).unwrap();
        assert_eq!(cascades.len(), 1);
        assert_eq!(cascades[0].root_id, "A");
        assert_eq!(cascades[0].size(), 3);
    }

    #[test]
    fn disjoint_chains() {
        let c = Corpus::from_records(vec![
            rec("A", None, 0),
            rec("B", Some("A"), 1),
            rec("X", None, 2),
            rec("Y", Some("X"), 3),
            rec("Z", Some("Y"), 4),
        ])
        .unwrap();
        let cascades = build_cascades(&c).unwrap();
        let sizes: Vec<_> = cascades.iter().map(Cascade::size).collect();
        assert_eq!(sizes, vec![2, 3]);
    }

    #[test]
    fn cycle_is_reported() {
        let c = Corpus::from_records(vec![
            rec("root", None, 0),
            rec("p", Some("q"), 1),
            rec("q", Some("p"), 2),
            rec("tail", Some("q"), 3),
        ])
        .unwrap();
        match build_cascades(&c) {
            Err(CorpusError::Cycle(id)) => assert!(id == "p" || id == "q"),
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn members_sorted_by_time_then_id_with_root_first() {
        let c = Corpus::from_records(vec![
            rec("r", None, 10),
            rec("b", Some("r"), 20),
            rec("a", Some("r"), 20),
            rec("early", Some("r"), 5),
        ])
        .unwrap();
        let cascades = build_cascades(&c).unwrap();
        assert_eq!(cascades[0].member_ids, vec!["r", "early", "a", "b"]);
    }

    fn sized(root: &str, ts: i64, n: usize) -> Cascade {
        Cascade {
            root_id: root.into(),
            root_timestamp: ts,
            member_ids: (0..n).map(|i| format!("{root}{i}")).collect(),
        }
    }

    #[test]
    fn top_k_selection() {
        let cs = vec![sized("a", 0, 5), sized("b", 1, 3), sized("c", 2, 9)];
        let top: Vec<_> = top_k_cascades(&cs, 2).iter().map(Cascade::size).collect();
        assert_eq!(top, vec![9, 5]);
        assert_eq!(top_k_cascades(&cs, 10).len(), 3);
    }

    #[test]
    fn top_k_ties() {
        let cs = vec![sized("b", 5, 4), sized("a", 5, 4), sized("z", 1, 4)];
        let ids: Vec<_> = top_k_cascades(&cs, 3).into_iter().map(|c| c.root_id).collect();
        assert_eq!(ids, vec!["z", "a", "b"]);
    }

    #[test]
    fn pseudo_document_concatenates_in_order() {
        let c = Corpus::from_records(vec![rec("a", None, 1), rec("b", Some("a"), 2)]).unwrap();
        let cascade = &build_cascades(&c).unwrap()[0];
        let doc = aggregate_pseudo_document(cascade, &c).unwrap();
        assert_eq!(doc.text, "a b");
        assert_eq!((doc.start_time, doc.end_time), (1, 2));
    }

    #[test]
    fn pseudo_document_singleton_and_ties() {
        let c = Corpus::from_records(vec![
            rec("r", None, 1),
            rec("y", Some("r"), 7),
            rec("x", Some("r"), 7),
        ])
        .unwrap();
        let cascade = &build_cascades(&c).unwrap()[0];
        assert_eq!(aggregate_pseudo_document(cascade, &c).unwrap().text, "r x y");

        let solo = Corpus::from_records(vec![rec("s", None, 1)]).unwrap();
        let cascade = &build_cascades(&solo).unwrap()[0];
        assert_eq!(aggregate_pseudo_document(cascade, &solo).unwrap().text, "s");
    }

    #[test]
    fn pseudo_document_missing_member() {
        let c = chain();
        let bogus = sized("nope", 0, 1);
        assert!(matches!(
            aggregate_pseudo_document(&bogus, &c),
            Err(CorpusError::UnknownId(_))
        ));
    }
}
