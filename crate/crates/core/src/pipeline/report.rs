//! Plot-ready summary tables built from the analysis artifacts.

use std::collections::{BTreeMap, HashMap};

use serde_json::json;

use super::io::{self, parse_field, CsvTable};
use super::stages::{
    read_assignments, read_num_topics, CRQA_PAIRS, POLARIZATION, PRESENCE, TOPIC_AGG, TWEET_TOKENS, WINDOW_AGG,
};
use super::{Pipeline, PipelineError, Stage, StageOutput};
use crate::moral::{Foundation, Polarity};
use crate::textprep::TokenizedDoc;

/// The `limit` most frequent n-grams (space-joined) of order `n` within
/// each document, by count descending then term.
pub fn top_ngrams<'a>(docs: impl IntoIterator<Item = &'a [String]>, n: usize, limit: usize) -> Vec<(String, usize)> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for doc in docs {
        for gram in doc.windows(n) {
            *counts.entry(gram.join(" ")).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(limit);
    ranked
}

type GroupTable = BTreeMap<(String, Foundation, Polarity), (String, usize)>;

fn read_groups(p: &Pipeline, rel: &str) -> Result<GroupTable, PipelineError> {
    let path = p.upstream(Stage::Timeseries, rel)?;
    let table = CsvTable::read(&path)?;
    let mut out = BTreeMap::new();
    for row in &table.rows {
        out.insert(
            (row[0].clone(), parse_field(&row[1], &path)?, parse_field(&row[2], &path)?),
            (row[3].clone(), parse_field(&row[4], &path)?),
        );
    }
    Ok(out)
}

/// Five rows (one per foundation) with vice and virtue means side by side;
/// `empty` marks a group without any polarized tweet.
fn radar_table(groups: &GroupTable, key: &str) -> CsvTable {
    let mut t = CsvTable::new(&[
        "foundation",
        "vice",
        "virtue",
        "vice_mean",
        "vice_n",
        "virtue_mean",
        "virtue_n",
        "empty",
    ]);
    let cell = |f: Foundation, pole: Polarity| {
        groups.get(&(key.to_string(), f, pole)).cloned().unwrap_or_else(|| ("0".into(), 0))
    };
    let total: usize = Foundation::ALL
        .iter()
        .flat_map(|&f| [cell(f, Polarity::Vice).1, cell(f, Polarity::Virtue).1])
        .sum();
    for f in Foundation::TABLE_ORDER {
        let (vm, vn) = cell(f, Polarity::Vice);
        let (um, un) = cell(f, Polarity::Virtue);
        t.push(vec![
            f.key().into(),
            f.vice_name().into(),
            f.virtue_name().into(),
            vm,
            vn.to_string(),
            um,
            un.to_string(),
            (total == 0).to_string(),
        ]);
    }
    t
}

fn ngram_table(grams: &[(String, usize)]) -> CsvTable {
    let mut t = CsvTable::new(&["rank", "term", "count"]);
    for (i, (g, c)) in grams.iter().enumerate() {
        t.push(vec![(i + 1).to_string(), g.clone(), c.to_string()]);
    }
    t
}

pub(super) fn run(p: &Pipeline) -> Result<StageOutput, PipelineError> {
    let c = p.config();
    let k = read_num_topics(p)?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();

    let windows = read_groups(p, WINDOW_AGG)?;
    for w in &c.windows {
        files.push((format!("report/window_{}.csv", w.label), radar_table(&windows, &w.label).to_bytes()));
    }
    let topics = read_groups(p, TOPIC_AGG)?;
    for t in 0..k {
        files.push((format!("report/topic_{t}.csv"), radar_table(&topics, &t.to_string()).to_bytes()));
    }

    let tokens: Vec<TokenizedDoc> = io::read_jsonl(&p.upstream(Stage::Prep, TWEET_TOKENS)?)?;
    let topic_of: HashMap<String, usize> = read_assignments(p)?.into_iter().map(|a| (a.doc_id, a.topic)).collect();
    for (n, name) in [(1, "unigrams"), (2, "bigrams")] {
        let all = top_ngrams(tokens.iter().map(|d| d.tokens.as_slice()), n, c.top_terms);
        files.push((format!("report/{name}_overall.csv"), ngram_table(&all).to_bytes()));
        for t in 0..k {
            let docs = tokens.iter().filter(|d| topic_of.get(&d.id) == Some(&t)).map(|d| d.tokens.as_slice());
            let grams = top_ngrams(docs, n, c.top_terms);
            files.push((format!("report/{name}_topic_{t}.csv"), ngram_table(&grams).to_bytes()));
        }
    }

    let pres_path = p.upstream(Stage::Timeseries, PRESENCE)?;
    let pres = CsvTable::read(&pres_path)?;
    let mut by_key: BTreeMap<(usize, Foundation), (String, String)> = BTreeMap::new();
    for row in &pres.rows {
        by_key.insert((parse_field(&row[0], &pres_path)?, parse_field(&row[1], &pres_path)?), (row[2].clone(), row[3].clone()));
    }
    let mut presence = CsvTable::new(&["topic", "foundation", "pct_days_vice", "pct_days_virtue"]);
    for t in 0..k {
        for f in Foundation::TABLE_ORDER {
            let (vice, virtue) = by_key.get(&(t, f)).cloned().unwrap_or_else(|| ("0".into(), "0".into()));
            presence.push(vec![t.to_string(), f.key().into(), vice, virtue]);
        }
    }
    files.push(("report/presence.csv".into(), presence.to_bytes()));

    let pol_path = p.upstream(Stage::Timeseries, POLARIZATION)?;
    let pol = CsvTable::read(&pol_path)?;
    let mut days: BTreeMap<String, HashMap<Foundation, String>> = BTreeMap::new();
    for row in &pol.rows {
        days.entry(row[0].clone()).or_default().insert(parse_field(&row[1], &pol_path)?, row[2].clone());
    }
    let mut headers = vec!["date".to_string()];
    headers.extend(Foundation::TABLE_ORDER.iter().map(|f| f.key().to_string()));
    let mut wide = CsvTable::with_headers(headers.clone());
    for (day, values) in &days {
        let mut row = vec![day.clone()];
        row.extend(Foundation::TABLE_ORDER.iter().map(|f| values.get(f).cloned().unwrap_or_default()));
        wide.push(row);
    }
    files.push(("report/polarization.csv".into(), wide.to_bytes()));

    let crqa_path = p.upstream(Stage::Crqa, CRQA_PAIRS)?;
    let crqa = CsvTable::read(&crqa_path)?;
    let entropy_col = crqa.column("entropy", &crqa_path)?;
    let mut entropy: HashMap<(Foundation, Foundation), String> = HashMap::new();
    for row in &crqa.rows {
        entropy.insert((parse_field(&row[0], &crqa_path)?, parse_field(&row[1], &crqa_path)?), row[entropy_col].clone());
    }
    headers[0] = "series".into();
    let mut matrix = CsvTable::with_headers(headers);
    let mut filled = 0;
    for (i, a) in Foundation::TABLE_ORDER.iter().enumerate() {
        let mut row = vec![a.key().to_string()];
        for (j, b) in Foundation::TABLE_ORDER.iter().enumerate() {
            let v = if j > i { entropy.get(&(*a, *b)).cloned() } else { None };
            filled += v.is_some() as usize;
            row.push(v.unwrap_or_default());
        }
        matrix.push(row);
    }
    files.push(("report/crqa_table.csv".into(), matrix.to_bytes()));

    let summary = json!({
        "window_tables": c.windows.len(),
        "topic_tables": k,
        "crqa_pairs": filled,
        "tweets": tokens.len(),
        "files": files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
    });
    files.push(("report/summary.json".into(), io::json_bytes(&summary)));
    Ok(StageOutput { records_in: tokens.len(), records_out: files.len(), files })
}
