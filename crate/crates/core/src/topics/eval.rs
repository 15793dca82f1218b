use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::svi::{e_step_with, expected_log_theta, theta_terms};
use super::{fit, GlobalState, LdaConfig, TopicError, TopicModel};
use crate::textprep::BagOfWords;

/// Per-document bound with phi optimal for the converged gamma:
/// `sum_w c_w log sum_k exp(E[log theta_k] + E[log beta_kw])` plus the
/// theta prior terms.
pub fn document_bound(doc: &BagOfWords, state: &GlobalState, config: &LdaConfig) -> Result<f64, TopicError> {
    bound_with(doc, &state.expected_log_beta(), config)
}

fn bound_with(doc: &BagOfWords, elog_beta: &Array2<f64>, config: &LdaConfig) -> Result<f64, TopicError> {
    if doc.is_empty() {
        return Err(TopicError::EmptyDocument);
    }
    if let Some(w) = doc.max_index() {
        if w >= elog_beta.ncols() {
            return Err(TopicError::WordOutOfRange {
                word: w,
                vocab_size: elog_beta.ncols(),
            });
        }
    }
    let alpha = config.alpha();
    let local = e_step_with(doc, elog_beta, alpha, config);
    let elog_theta = expected_log_theta(&local.gamma);
    let k = elog_beta.nrows();
    let mut bound = 0.0;
    for &(w, count) in &doc.entries {
        let mut max = f64::NEG_INFINITY;
        for t in 0..k {
            max = max.max(elog_theta[t] + elog_beta[[t, w]]);
        }
        let s: f64 = (0..k).map(|t| (elog_theta[t] + elog_beta[[t, w]] - max).exp()).sum();
        bound += count as f64 * (max + s.ln());
    }
    Ok(bound + theta_terms(&local.gamma, &elog_theta, alpha))
}

/// `exp(-sum_d bound_d / sum_d N_d)` over the non-empty held-out documents.
pub fn perplexity(model: &TopicModel, held_out: &[BagOfWords]) -> Result<f64, TopicError> {
    perplexity_of(&model.state, &model.config, held_out)
}

pub(crate) fn perplexity_of(
    state: &GlobalState,
    config: &LdaConfig,
    held_out: &[BagOfWords],
) -> Result<f64, TopicError> {
    use rayon::prelude::*;
    let elog_beta = state.expected_log_beta();
    let docs: Vec<&BagOfWords> = held_out.iter().filter(|d| !d.is_empty()).collect();
    if docs.is_empty() {
        return Err(TopicError::EmptyCorpus);
    }
    let bounds: Vec<f64> = docs
        .par_iter()
        .map(|d| bound_with(d, &elog_beta, config))
        .collect::<Result<_, _>>()?;
    let words: u64 = docs.iter().map(|d| d.total()).sum();
    Ok((-bounds.iter().sum::<f64>() / words as f64).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub per_topic: Vec<f64>,
    pub mean: f64,
}

/// UMass coherence of each topic's `top_n` words against document
/// co-occurrence in `docs`. For words ranked `w_1..w_n`, sums
/// `log((D(w_i, w_j) + 1) / D(w_j))` over `j < i`. A word that never occurs
/// contributes a denominator of 1.
pub fn coherence(model: &TopicModel, docs: &[BagOfWords], top_n: usize) -> Result<CoherenceReport, TopicError> {
    let v = model.vocab_size();
    if top_n < 2 || top_n > v {
        return Err(TopicError::BadTopN { top_n, vocab_size: v });
    }
    let sets: Vec<BTreeSet<usize>> = docs
        .iter()
        .map(|d| d.entries.iter().map(|&(w, _)| w).collect())
        .collect();
    let df = |w: usize| sets.iter().filter(|s| s.contains(&w)).count();
    let co_df = |a: usize, b: usize| sets.iter().filter(|s| s.contains(&a) && s.contains(&b)).count();

    let per_topic: Vec<f64> = (0..model.k())
        .map(|k| {
            let top: Vec<usize> = model.top_words(k, top_n).into_iter().map(|(w, _)| w).collect();
            let mut score = 0.0;
            for i in 1..top.len() {
                for j in 0..i {
                    let denom = df(top[j]).max(1) as f64;
                    score += ((co_df(top[i], top[j]) as f64 + 1.0) / denom).ln();
                }
            }
            score
        })
        .collect();
    let mean = per_topic.iter().sum::<f64>() / per_topic.len() as f64;
    Ok(CoherenceReport { per_topic, mean })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicAssignment {
    pub doc_id: String,
    pub topic: usize,
    pub mixture: Vec<f64>,
}

/// Normalizes gamma and picks the heaviest topic, lowest index on ties.
pub fn assign_topic(doc_id: &str, gamma: &[f64]) -> TopicAssignment {
    let total: f64 = gamma.iter().sum();
    let mixture: Vec<f64> = gamma.iter().map(|g| g / total).collect();
    let mut topic = 0;
    for (i, &m) in mixture.iter().enumerate() {
        if m > mixture[topic] {
            topic = i;
        }
    }
    TopicAssignment {
        doc_id: doc_id.to_string(),
        topic,
        mixture,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub perplexity: f64,
    pub mean_coherence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub recommended_k: usize,
}

/// Smallest K after which the relative gain in mean coherence drops below
/// `threshold`. Rows must be sorted by K.
pub fn recommend_k(rows: &[SweepRow], threshold: f64) -> usize {
    for pair in rows.windows(2) {
        let (cur, next) = (&pair[0], &pair[1]);
        let gain = (next.mean_coherence - cur.mean_coherence) / cur.mean_coherence.abs().max(f64::MIN_POSITIVE);
        if gain < threshold {
            return cur.k;
        }
    }
    rows.last().map(|r| r.k).unwrap_or(0)
}

/// Fits one model per candidate K (same seed and settings otherwise) and
/// scores each on `docs`. Priors left at their defaults follow `1/K`.
pub fn sweep_k(
    docs: &[BagOfWords],
    vocab_size: usize,
    k_values: &[usize],
    template: &LdaConfig,
    top_n: usize,
    threshold: f64,
) -> Result<SweepResult, TopicError> {
    let mut ks: Vec<usize> = k_values.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(TopicError::InvalidConfig("no candidate K values".into()));
    }
    let mut rows = Vec::with_capacity(ks.len());
    for k in ks {
        let config = LdaConfig { k, ..template.clone() };
        let model = fit(docs, vocab_size, &config)?;
        rows.push(SweepRow {
            k,
            perplexity: perplexity(&model, docs)?,
            mean_coherence: coherence(&model, docs, top_n.min(vocab_size))?.mean,
        });
    }
    let recommended_k = recommend_k(&rows, threshold);
    Ok(SweepResult { rows, recommended_k })
}
