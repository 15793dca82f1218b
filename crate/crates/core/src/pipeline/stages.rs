use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::io::{self, opt_f64, parse_field, CsvTable};
use super::{report, AssignmentMode, Pipeline, PipelineError, Stage, StageOutput};
use crate::corpus::{
    aggregate_pseudo_document, build_cascades, load_corpus, top_k_cascades, Corpus, NodeRole, PseudoDocument,
    TweetRecord,
};
use crate::crqa::{align, crqa_pairwise, cross_recurrence, DatedSeries};
use crate::moral::{
    load_lexicon, moral_ratio, ratio_statistics, score_tweet, Foundation, FoundationScore, Lexicon, MoralScore,
    EMFD_EXPECTED_COUNTS, TOY_LEXICON_CSV,
};
use crate::textprep::{
    build_vocabulary, clean, doc_to_bow, load_stopwords, tokenize, BagOfWords, CleanConfig, TokenizedDoc,
    Vocabulary,
};
use crate::timeseries::{
    activity_series, daily_polarization, day_presence, interpolate_daily, parse_date, topic_aggregate,
    window_aggregate, ScoredTweet, POLES,
};
use crate::topics::{assign_topic, coherence, fit, perplexity, sweep_k, top_words_json, write_model, TopicAssignment};

pub const TWEETS: &str = "ingest/tweets.jsonl";
pub const INGEST_SUMMARY: &str = "ingest/summary.json";
pub const CASCADES: &str = "cascades/cascades.csv";
pub const MEMBERSHIP: &str = "cascades/membership.csv";
pub const PSEUDO_DOCS: &str = "cascades/pseudo_docs.jsonl";
pub const TWEET_TOKENS: &str = "prep/tweet_tokens.jsonl";
pub const DOC_TOKENS: &str = "prep/doc_tokens.jsonl";
pub const VOCABULARY: &str = "prep/vocabulary.csv";
pub const SCORES: &str = "score/scores.csv";
pub const MORAL_RATIO: &str = "score/moral_ratio.csv";
pub const RATIO_STATS: &str = "score/ratio_stats.json";
pub const MODEL: &str = "topics/model.bin";
pub const TOPICS_JSON: &str = "topics/topics.json";
pub const DOC_TOPICS: &str = "topics/doc_topics.csv";
pub const ASSIGNMENTS: &str = "topics/topic_assignments.csv";
pub const FIT: &str = "topics/fit.json";
pub const K_SWEEP: &str = "topics/k_sweep.csv";
pub const WINDOW_AGG: &str = "timeseries/window_aggregates.csv";
pub const TOPIC_AGG: &str = "timeseries/topic_aggregates.csv";
pub const POLARIZATION: &str = "timeseries/polarization.csv";
pub const PRESENCE: &str = "timeseries/day_presence.csv";
pub const ACTIVITY: &str = "timeseries/activity.csv";
pub const CRQA_PAIRS: &str = "crqa/crqa.csv";

/// Upstream artifacts each stage reads, with the stage that writes them.
fn inputs_of(stage: Stage) -> &'static [(Stage, &'static str)] {
    match stage {
        Stage::Ingest => &[],
        Stage::Cascades => &[(Stage::Ingest, TWEETS)],
        Stage::Prep => &[(Stage::Ingest, TWEETS), (Stage::Cascades, PSEUDO_DOCS)],
        Stage::Score => &[(Stage::Ingest, TWEETS), (Stage::Prep, TWEET_TOKENS)],
        Stage::Topics => &[
            (Stage::Prep, DOC_TOKENS),
            (Stage::Prep, TWEET_TOKENS),
            (Stage::Prep, VOCABULARY),
            (Stage::Cascades, MEMBERSHIP),
        ],
        Stage::Timeseries => &[
            (Stage::Ingest, TWEETS),
            (Stage::Score, SCORES),
            (Stage::Topics, ASSIGNMENTS),
            (Stage::Topics, TOPICS_JSON),
        ],
        Stage::Crqa => &[(Stage::Timeseries, POLARIZATION)],
        Stage::Report => &[
            (Stage::Prep, TWEET_TOKENS),
            (Stage::Topics, ASSIGNMENTS),
            (Stage::Topics, TOPICS_JSON),
            (Stage::Timeseries, WINDOW_AGG),
            (Stage::Timeseries, TOPIC_AGG),
            (Stage::Timeseries, POLARIZATION),
            (Stage::Timeseries, PRESENCE),
            (Stage::Crqa, CRQA_PAIRS),
        ],
    }
}

fn external_sha(path: Option<&Path>, bundled: Option<&str>) -> Result<String, PipelineError> {
    match (path, bundled) {
        (Some(p), _) => io::file_sha256(p),
        (None, Some(text)) => Ok(format!("bundled:{}", io::sha256_hex(text.as_bytes()))),
        (None, None) => Ok("none".into()),
    }
}

/// Stage parameters and input checksums that determine the outputs.
pub(super) fn signature(p: &Pipeline, stage: Stage) -> Result<(serde_json::Value, Vec<(String, String)>), PipelineError> {
    let c = p.config();
    let mut inputs = Vec::new();
    for &(producer, rel) in inputs_of(stage) {
        inputs.push((rel.to_string(), io::file_sha256(&p.upstream(producer, rel)?)?));
    }
    let params = match stage {
        Stage::Ingest => {
            let input = input_path(p)?;
            inputs.push(("input".into(), io::file_sha256(input)?));
            json!({})
        }
        Stage::Cascades => json!({"top_k": c.top_k}),
        Stage::Prep => {
            inputs.push(("stopwords".into(), external_sha(c.stopwords.as_deref(), None)?));
            json!({"clean": c.clean})
        }
        Stage::Score => {
            inputs.push(("lexicon".into(), external_sha(c.lexicon.as_deref(), Some(TOY_LEXICON_CSV))?));
            json!({"lexicon_check": c.lexicon_check, "score": c.score})
        }
        Stage::Topics => json!({"lda": c.effective_lda(), "topics": c.topics}),
        Stage::Timeseries => json!({"windows": c.windows}),
        Stage::Crqa => json!({"crqa": c.crqa}),
        Stage::Report => json!({"top_terms": c.top_terms, "windows": c.windows}),
    };
    Ok((params, inputs))
}

pub(super) fn run(p: &Pipeline, stage: Stage) -> Result<StageOutput, PipelineError> {
    match stage {
        Stage::Ingest => ingest(p),
        Stage::Cascades => cascades(p),
        Stage::Prep => prep(p),
        Stage::Score => score(p),
        Stage::Topics => topics(p),
        Stage::Timeseries => timeseries(p),
        Stage::Crqa => crqa(p),
        Stage::Report => report::run(p),
    }
}

fn input_path(p: &Pipeline) -> Result<&Path, PipelineError> {
    let input = p
        .config()
        .input
        .as_deref()
        .ok_or_else(|| PipelineError::Config("no input corpus given".into()))?;
    if !input.is_file() {
        return Err(PipelineError::Config(format!("input corpus {} does not exist", input.display())));
    }
    Ok(input)
}

fn ingest(p: &Pipeline) -> Result<StageOutput, PipelineError> {
    let loaded = load_corpus(input_path(p)?)?;
    let mut records = loaded.corpus.records().to_vec();
    records.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
    let authors: std::collections::BTreeSet<&str> = records.iter().map(|r| r.author_id.as_str()).collect();
    let summary = json!({
        "records": records.len(),
        "skipped_lines": loaded.skipped_lines,
        "orphans": loaded.corpus.orphans().len(),
        "authors": authors.len(),
    });
    Ok(StageOutput {
        records_in: records.len() + loaded.skipped_lines,
        records_out: records.len(),
        files: vec![(TWEETS.into(), io::jsonl_bytes(&records)), (INGEST_SUMMARY.into(), io::json_bytes(&summary))],
    })
}

pub(crate) fn read_corpus(p: &Pipeline) -> Result<Corpus, PipelineError> {
    let records: Vec<TweetRecord> = io::read_jsonl(&p.upstream(Stage::Ingest, TWEETS)?)?;
    Ok(Corpus::from_records(records)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct PseudoDocRow {
    #[serde(flatten)]
    pub doc: PseudoDocument,
    pub cascade_size: usize,
    /// Rank among the largest cascades, when within `top_k`.
    pub top_k_rank: Option<usize>,
}

fn cascades(p: &Pipeline) -> Result<StageOutput, PipelineError> {
    let corpus = read_corpus(p)?;
    let all = build_cascades(&corpus)?;
    let covered: usize = all.iter().map(|c| c.size()).sum();
    if covered != corpus.len() {
        return Err(PipelineError::Invariant(format!(
            "cascades cover {covered} tweets, corpus has {}",
            corpus.len()
        )));
    }
    let rank: HashMap<&str, usize> = top_k_cascades(&all, p.config().top_k)
        .iter()
        .enumerate()
        .map(|(i, c)| (corpus.get(&c.root_id).expect("root in corpus").id.as_str(), i))
        .collect();
    let mut table = CsvTable::new(&["root_id", "size", "root_timestamp", "top_k_rank"]);
    let mut membership = CsvTable::new(&["tweet_id", "cascade_root_id", "role"]);
    let mut docs = Vec::with_capacity(all.len());
    for c in &all {
        let r = rank.get(c.root_id.as_str()).copied();
        table.push(vec![
            c.root_id.clone(),
            c.size().to_string(),
            c.root_timestamp.to_string(),
            r.map(|x| x.to_string()).unwrap_or_default(),
        ]);
        for id in &c.member_ids {
            let role = match corpus.classify_node(id)? {
                NodeRole::Root => "root",
                NodeRole::Internal => "internal",
                NodeRole::Leaf => "leaf",
            };
            membership.push(vec![id.clone(), c.root_id.clone(), role.into()]);
        }
        docs.push(PseudoDocRow {
            doc: aggregate_pseudo_document(c, &corpus)?,
            cascade_size: c.size(),
            top_k_rank: r,
        });
    }
    Ok(StageOutput {
        records_in: corpus.len(),
        records_out: all.len(),
        files: vec![
            (CASCADES.into(), table.to_bytes()),
            (MEMBERSHIP.into(), membership.to_bytes()),
            (PSEUDO_DOCS.into(), io::jsonl_bytes(&docs)),
        ],
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct DocTokensRow {
    pub id: String,
    pub top_k_rank: Option<usize>,
    pub tokens: Vec<String>,
}

fn clean_config(p: &Pipeline) -> Result<CleanConfig, PipelineError> {
    let mut config = p.config().clean.clone();
    if let Some(path) = &p.config().stopwords {
        config.stopwords = load_stopwords(path)?;
    }
    Ok(config)
}

fn prep(p: &Pipeline) -> Result<StageOutput, PipelineError> {
    let config = clean_config(p)?;
    let corpus = read_corpus(p)?;
    let docs: Vec<PseudoDocRow> = io::read_jsonl(&p.upstream(Stage::Cascades, PSEUDO_DOCS)?)?;
    let tweet_tokens: Vec<TokenizedDoc> = corpus
        .records()
        .iter()
        .map(|r| TokenizedDoc { id: r.id.clone(), tokens: tokenize(&clean(&r.text, &config), &config) })
        .collect();
    let doc_tokens: Vec<DocTokensRow> = docs
        .iter()
        .map(|d| DocTokensRow {
            id: d.doc.cascade_root_id.clone(),
            top_k_rank: d.top_k_rank,
            tokens: tokenize(&clean(&d.doc.text, &config), &config),
        })
        .collect();
    let training: Vec<Vec<String>> =
        doc_tokens.iter().filter(|d| d.top_k_rank.is_some()).map(|d| d.tokens.clone()).collect();
    let vocab = build_vocabulary(&training, &config)?;
    let mut table = CsvTable::new(&["index", "word", "doc_freq"]);
    for (i, w) in vocab.words().iter().enumerate() {
        table.push(vec![i.to_string(), w.clone(), vocab.doc_freq(i).to_string()]);
    }
    Ok(StageOutput {
        records_in: corpus.len() + docs.len(),
        records_out: vocab.len(),
        files: vec![
            (TWEET_TOKENS.into(), io::jsonl_bytes(&tweet_tokens)),
            (DOC_TOKENS.into(), io::jsonl_bytes(&doc_tokens)),
            (VOCABULARY.into(), table.to_bytes()),
        ],
    })
}

fn lexicon(p: &Pipeline) -> Result<Lexicon, PipelineError> {
    let c = p.config();
    let expected = c.lexicon_check.then_some(&EMFD_EXPECTED_COUNTS);
    Ok(match &c.lexicon {
        Some(path) => load_lexicon(path, expected)?,
        None => {
            let lex = Lexicon::from_csv_reader(TOY_LEXICON_CSV.as_bytes())?;
            if let Some(e) = expected {
                lex.check_counts(e)?;
            }
            lex
        }
    })
}

pub(crate) fn score_headers() -> Vec<String> {
    let mut h = vec!["id".to_string(), "timestamp".to_string()];
    for f in Foundation::ALL {
        for suffix in ["loading", "polarity", "matched"] {
            h.push(format!("{}_{suffix}", f.key()));
        }
    }
    h
}

fn score(p: &Pipeline) -> Result<StageOutput, PipelineError> {
    let lex = lexicon(p)?;
    let corpus = read_corpus(p)?;
    let tokens: Vec<TokenizedDoc> = io::read_jsonl(&p.upstream(Stage::Prep, TWEET_TOKENS)?)?;
    let mut scores = CsvTable::with_headers(score_headers());
    let mut ratios_table = CsvTable::new(&["id", "moral_words", "nonmoral_words", "ratio"]);
    let mut ratios = Vec::with_capacity(tokens.len());
    for doc in &tokens {
        let rec = corpus
            .get(&doc.id)
            .ok_or_else(|| PipelineError::Invariant(format!("token row {:?} has no tweet", doc.id)))?;
        let s = score_tweet(&doc.tokens, &lex);
        let mut row = vec![doc.id.clone(), rec.timestamp.to_string()];
        for fs in &s.foundations {
            row.extend([fs.loading.to_string(), fs.polarity.key().to_string(), fs.matched.to_string()]);
        }
        scores.push(row);
        let r = moral_ratio(&doc.tokens, &lex);
        ratios_table.push(vec![
            doc.id.clone(),
            r.moral_word_count.to_string(),
            r.nonmoral_word_count.to_string(),
            r.ratio.to_string(),
        ]);
        ratios.push(r);
    }
    let stats = ratio_statistics(&ratios, p.config().score.ratio_bin_width, p.config().score.ratio_max)?;
    Ok(StageOutput {
        records_in: tokens.len(),
        records_out: tokens.len(),
        files: vec![
            (SCORES.into(), scores.to_bytes()),
            (MORAL_RATIO.into(), ratios_table.to_bytes()),
            (RATIO_STATS.into(), io::json_bytes(&stats)),
        ],
    })
}

pub(crate) fn read_scores(p: &Pipeline) -> Result<Vec<ScoredTweet>, PipelineError> {
    let path = p.upstream(Stage::Score, SCORES)?;
    let table = CsvTable::read(&path)?;
    if table.headers != score_headers() {
        return Err(PipelineError::parse(&path, "unexpected score columns"));
    }
    table
        .rows
        .iter()
        .map(|row| {
            let mut score = MoralScore::default();
            for (f, fs) in score.foundations.iter_mut().enumerate() {
                let base = 2 + 3 * f;
                *fs = FoundationScore {
                    loading: parse_field(&row[base], &path)?,
                    polarity: parse_field(&row[base + 1], &path)?,
                    matched: parse_field(&row[base + 2], &path)?,
                };
            }
            Ok(ScoredTweet { id: row[0].clone(), timestamp: parse_field(&row[1], &path)?, score })
        })
        .collect()
}

fn read_vocabulary(p: &Pipeline) -> Result<Vocabulary, PipelineError> {
    let path = p.upstream(Stage::Prep, VOCABULARY)?;
    let table = CsvTable::read(&path)?;
    let (w, df) = (table.column("word", &path)?, table.column("doc_freq", &path)?);
    let entries = table
        .rows
        .iter()
        .map(|r| Ok((r[w].clone(), parse_field(&r[df], &path)?)))
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(Vocabulary::from_entries(entries))
}

fn assignment_table(assignments: &[TopicAssignment], k: usize) -> CsvTable {
    let mut headers = vec!["doc_id".to_string(), "topic".to_string()];
    headers.extend((0..k).map(|i| format!("mixture_{i}")));
    let mut table = CsvTable::with_headers(headers);
    for a in assignments {
        let mut row = vec![a.doc_id.clone(), a.topic.to_string()];
        row.extend(a.mixture.iter().map(|m| m.to_string()));
        table.push(row);
    }
    table
}

fn topics(p: &Pipeline) -> Result<StageOutput, PipelineError> {
    let c = p.config();
    let lda = c.effective_lda();
    let vocab = read_vocabulary(p)?;
    let docs: Vec<DocTokensRow> = io::read_jsonl(&p.upstream(Stage::Prep, DOC_TOKENS)?)?;
    let bows: Vec<BagOfWords> = docs.iter().map(|d| doc_to_bow(&d.tokens, &vocab)).collect();
    let train: Vec<BagOfWords> = docs
        .iter()
        .zip(&bows)
        .filter(|(d, _)| d.top_k_rank.is_some())
        .map(|(_, b)| b.clone())
        .collect();
    let model = fit(&train, vocab.len(), &lda)?;

    let gamma = model.infer(&bows)?;
    // Every cascade, trained on or not, is inferred against the final topics.
    let doc_assign: Vec<TopicAssignment> =
        docs.iter().enumerate().map(|(i, d)| assign_topic(&d.id, &gamma.row(i).to_vec())).collect();

    let tweets: Vec<TokenizedDoc> = io::read_jsonl(&p.upstream(Stage::Prep, TWEET_TOKENS)?)?;
    let tweet_assign: Vec<TopicAssignment> = match c.topics.assignment {
        AssignmentMode::Cascade => {
            let path = p.upstream(Stage::Cascades, MEMBERSHIP)?;
            let table = CsvTable::read(&path)?;
            let (t, r) = (table.column("tweet_id", &path)?, table.column("cascade_root_id", &path)?);
            let root_of: HashMap<&str, &str> = table.rows.iter().map(|row| (row[t].as_str(), row[r].as_str())).collect();
            let by_root: HashMap<&str, &TopicAssignment> =
                doc_assign.iter().map(|a| (a.doc_id.as_str(), a)).collect();
            tweets
                .iter()
                .map(|tw| {
                    let a = root_of
                        .get(tw.id.as_str())
                        .and_then(|root| by_root.get(root))
                        .ok_or_else(|| PipelineError::Invariant(format!("tweet {:?} has no cascade", tw.id)))?;
                    Ok(TopicAssignment { doc_id: tw.id.clone(), ..(*a).clone() })
                })
                .collect::<Result<_, PipelineError>>()?
        }
        AssignmentMode::Tweet => {
            let tb: Vec<BagOfWords> = tweets.iter().map(|t| doc_to_bow(&t.tokens, &vocab)).collect();
            let g = model.infer(&tb)?;
            tweets.iter().enumerate().map(|(i, t)| assign_topic(&t.id, &g.row(i).to_vec())).collect()
        }
    };

    let top_n = c.topics.coherence_top_n.min(vocab.len());
    let coh = if top_n >= 2 { Some(coherence(&model, &train, top_n)?) } else { None };
    let fit_summary = json!({
        "training_docs": train.len(),
        "vocab_size": vocab.len(),
        "k": model.k(),
        "seed": lda.seed,
        "updates": model.state.t,
        "train_perplexity": perplexity(&model, &train)?,
        "coherence_top_n": top_n,
        "coherence": coh,
    });
    let mut model_bytes = Vec::new();
    write_model(&mut model_bytes, &lda, &model.state)?;
    let mut files = vec![
        (MODEL.into(), model_bytes),
        (TOPICS_JSON.into(), io::json_bytes(&top_words_json(&model, &vocab, c.topics.top_words))),
        (DOC_TOPICS.into(), assignment_table(&doc_assign, model.k()).to_bytes()),
        (ASSIGNMENTS.into(), assignment_table(&tweet_assign, model.k()).to_bytes()),
        (FIT.into(), io::json_bytes(&fit_summary)),
    ];
    if !c.topics.sweep_k.is_empty() {
        let sweep = sweep_k(&train, vocab.len(), &c.topics.sweep_k, &lda, c.topics.coherence_top_n, c.topics.sweep_threshold)?;
        let mut table = CsvTable::new(&["k", "perplexity", "mean_coherence", "recommended"]);
        for r in &sweep.rows {
            table.push(vec![
                r.k.to_string(),
                r.perplexity.to_string(),
                r.mean_coherence.to_string(),
                (r.k == sweep.recommended_k).to_string(),
            ]);
        }
        files.push((K_SWEEP.into(), table.to_bytes()));
    }
    Ok(StageOutput { records_in: docs.len() + tweets.len(), records_out: tweet_assign.len(), files })
}

pub(crate) fn read_assignments(p: &Pipeline) -> Result<Vec<TopicAssignment>, PipelineError> {
    let path = p.upstream(Stage::Topics, ASSIGNMENTS)?;
    let table = CsvTable::read(&path)?;
    table
        .rows
        .iter()
        .map(|row| {
            Ok(TopicAssignment {
                doc_id: row[0].clone(),
                topic: parse_field(&row[1], &path)?,
                mixture: row[2..].iter().map(|m| parse_field(m, &path)).collect::<Result<_, _>>()?,
            })
        })
        .collect()
}

pub(crate) fn read_num_topics(p: &Pipeline) -> Result<usize, PipelineError> {
    let path = p.upstream(Stage::Topics, TOPICS_JSON)?;
    let value: serde_json::Value = io::read_json(&path)?;
    value["k"]
        .as_u64()
        .map(|k| k as usize)
        .ok_or_else(|| PipelineError::parse(&path, "missing topic count"))
}

fn timeseries(p: &Pipeline) -> Result<StageOutput, PipelineError> {
    let scores = read_scores(p)?;
    let assignments = read_assignments(p)?;
    let k = read_num_topics(p)?;
    let windows = p.config().time_windows()?;

    let mut win = CsvTable::new(&["window", "foundation", "polarity", "mean", "n"]);
    for w in &windows {
        let agg = window_aggregate(&scores, w);
        for f in Foundation::ALL {
            for pole in POLES {
                let g = agg.get(f, pole);
                win.push(vec![w.label.clone(), f.key().into(), pole.key().into(), g.mean.to_string(), g.n.to_string()]);
            }
        }
    }
    let mut top = CsvTable::new(&["topic", "foundation", "polarity", "mean", "n"]);
    for t in 0..k {
        let agg = topic_aggregate(&scores, &assignments, t, k)?;
        for f in Foundation::ALL {
            for pole in POLES {
                let g = agg.get(f, pole);
                top.push(vec![t.to_string(), f.key().into(), pole.key().into(), g.mean.to_string(), g.n.to_string()]);
            }
        }
    }
    let points = daily_polarization(&scores);
    let mut pol = CsvTable::new(&["date", "foundation", "polarization", "n_virtue", "n_vice"]);
    for pt in &points {
        for f in Foundation::ALL {
            let d = pt.foundations[f.index()];
            pol.push(vec![
                pt.day.to_string(),
                f.key().into(),
                opt_f64(d.polarization),
                d.n_virtue.to_string(),
                d.n_vice.to_string(),
            ]);
        }
    }
    let presence = day_presence(&scores, &assignments, k)?;
    let mut pres = CsvTable::new(&["topic", "foundation", "pct_days_vice", "pct_days_virtue"]);
    for (t, row) in presence.rows.iter().enumerate() {
        for f in Foundation::ALL {
            let cell = row[f.index()];
            pres.push(vec![
                t.to_string(),
                f.key().into(),
                cell.pct_days_vice.to_string(),
                cell.pct_days_virtue.to_string(),
            ]);
        }
    }
    let corpus = read_corpus(p)?;
    let mut act = CsvTable::new(&["date", "activities", "unique_users"]);
    for a in activity_series(&corpus) {
        act.push(vec![a.day.to_string(), a.activities.to_string(), a.unique_users.to_string()]);
    }
    Ok(StageOutput {
        records_in: scores.len(),
        records_out: points.len(),
        files: vec![
            (WINDOW_AGG.into(), win.to_bytes()),
            (TOPIC_AGG.into(), top.to_bytes()),
            (POLARIZATION.into(), pol.to_bytes()),
            (PRESENCE.into(), pres.to_bytes()),
            (ACTIVITY.into(), act.to_bytes()),
        ],
    })
}

/// Per-foundation polarization series in table order, missing days absent.
pub(crate) fn read_polarization(p: &Pipeline) -> Result<Vec<(Foundation, DatedSeries)>, PipelineError> {
    let path = p.upstream(Stage::Timeseries, POLARIZATION)?;
    let table = CsvTable::read(&path)?;
    let mut series: BTreeMap<Foundation, DatedSeries> = BTreeMap::new();
    for row in &table.rows {
        let f: Foundation = parse_field(&row[1], &path)?;
        let entry = series.entry(f).or_default();
        if !row[2].is_empty() {
            let day = parse_date(&row[0]).map_err(|e| PipelineError::parse(&path, e))?;
            entry.insert(day, parse_field(&row[2], &path)?);
        }
    }
    Ok(Foundation::TABLE_ORDER
        .iter()
        .map(|f| (*f, series.remove(f).unwrap_or_default()))
        .collect())
}

fn crqa(p: &Pipeline) -> Result<StageOutput, PipelineError> {
    let c = &p.config().crqa;
    let series: Vec<(String, DatedSeries)> = read_polarization(p)?
        .into_iter()
        .map(|(f, s)| (f.key().to_string(), if c.interpolate { interpolate_daily(&s) } else { s }))
        .collect();
    let pairs = crqa_pairwise(&series, &c.params)?;
    let mut table = CsvTable::new(&[
        "series_a",
        "series_b",
        "recurrence_rate",
        "determinism",
        "entropy",
        "m",
        "tau",
        "epsilon",
        "norm",
        "l_min",
        "n_points",
    ]);
    for pm in &pairs {
        let m = pm.metrics;
        table.push(vec![
            pm.series_a.clone(),
            pm.series_b.clone(),
            m.recurrence_rate.to_string(),
            m.determinism.to_string(),
            m.entropy.to_string(),
            c.params.embed_dim.to_string(),
            c.params.delay.to_string(),
            m.epsilon.to_string(),
            c.params.norm.key().into(),
            c.params.l_min.to_string(),
            m.n_points.to_string(),
        ]);
    }
    let mut files = vec![(CRQA_PAIRS.to_string(), table.to_bytes())];
    if c.dump_matrices {
        let lookup: HashMap<&str, &DatedSeries> = series.iter().map(|(n, s)| (n.as_str(), s)).collect();
        for pm in &pairs {
            let (x, y) = align(lookup[pm.series_a.as_str()], lookup[pm.series_b.as_str()]);
            let (r, _) = cross_recurrence(&x, &y, &c.params)?;
            files.push((format!("crqa/recurrence/{}__{}.rle", pm.series_a, pm.series_b), r.to_rle().into_bytes()));
        }
    }
    Ok(StageOutput { records_in: series.len(), records_out: pairs.len(), files })
}
