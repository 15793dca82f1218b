//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use moralscope::corpus::TweetRecord;
use moralscope::moral::{Foundation, FoundationScore, Lexicon, MoralScore, Polarity};
use moralscope::textprep::BagOfWords;
use moralscope::timeseries::{day_of, ScoredTweet, TimeWindow};
use moralscope::topics::TopicModel;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

/// Digamma by upward recurrence to x >= 10 and the asymptotic series.
pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    acc + x.ln() - 0.5 * inv - series
}

pub struct VbDoc {
    pub gamma: Vec<f64>,
    /// `phi[n][k]` for the n-th distinct word.
    pub phi: Vec<Vec<f64>>,
}

/// Mean-field e-step for one document against fixed topics, run until the
/// mean absolute change of gamma drops below `tol`.
pub fn vb_e_step(doc: &BagOfWords, lambda: &[Vec<f64>], alpha: f64, tol: f64, max_iters: usize) -> VbDoc {
    let k = lambda.len();
    let elog_beta: Vec<Vec<f64>> = lambda
        .iter()
        .map(|row| {
            let s = digamma(row.iter().sum());
            row.iter().map(|&l| digamma(l) - s).collect()
        })
        .collect();
    let total: f64 = doc.entries.iter().map(|&(_, c)| c as f64).sum();
    let mut gamma = vec![alpha + total / k as f64; k];
    let mut phi = vec![vec![0.0; k]; doc.entries.len()];
    for _ in 0..max_iters {
        let gs = digamma(gamma.iter().sum());
        let elog_theta: Vec<f64> = gamma.iter().map(|&g| digamma(g) - gs).collect();
        let mut next = vec![alpha; k];
        for (n, &(w, c)) in doc.entries.iter().enumerate() {
            let logits: Vec<f64> = (0..k).map(|t| elog_theta[t] + elog_beta[t][w]).collect();
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = exps.iter().sum();
            for t in 0..k {
                phi[n][t] = exps[t] / z;
                next[t] += c as f64 * phi[n][t];
            }
        }
        let change: f64 = next.iter().zip(&gamma).map(|(a, b)| (a - b).abs()).sum::<f64>() / k as f64;
        gamma = next;
        if change < tol {
            break;
        }
    }
    VbDoc { gamma, phi }
}

/// One full batch variational step: e-step on every document, then
/// `lambda = eta + sum_d sum_n c_dn phi_dn`.
pub fn batch_vb_step(docs: &[BagOfWords], lambda: &[Vec<f64>], alpha: f64, eta: f64, tol: f64, max_iters: usize) -> Vec<Vec<f64>> {
    let k = lambda.len();
    let v = lambda[0].len();
    let mut out = vec![vec![eta; v]; k];
    for doc in docs {
        let local = vb_e_step(doc, lambda, alpha, tol, max_iters);
        for (n, &(w, c)) in doc.entries.iter().enumerate() {
            for t in 0..k {
                out[t][w] += c as f64 * local.phi[n][t];
            }
        }
    }
    out
}

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = x;
        while self.parent[c] != r {
            let next = self.parent[c];
            self.parent[c] = r;
            c = next;
        }
        r
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }

    /// Components as sorted member lists, sorted by smallest member.
    pub fn components(&mut self) -> Vec<Vec<usize>> {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..self.parent.len() {
            let r = self.find(i);
            groups.entry(r).or_default().push(i);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort();
        out
    }
}

pub struct Planted {
    pub docs: Vec<BagOfWords>,
    /// Word indices of each planted topic.
    pub supports: Vec<Vec<usize>>,
}

/// Documents over `k` topics with disjoint word supports of size
/// `vocab / k`. Within a support, word `r` (0-based rank) has probability
/// proportional to `(r+1)^-skew`; proportions come from a symmetric
/// Dirichlet(`concentration`). The defaults are 0.3 and a skew of 0.5.
pub fn planted_corpus(seed: u64, n_docs: usize, vocab: usize, k: usize, doc_len: usize) -> Planted {
    planted_corpus_with(seed, n_docs, vocab, k, doc_len, 0.3, 0.5)
}

pub fn planted_corpus_with(
    seed: u64,
    n_docs: usize,
    vocab: usize,
    k: usize,
    doc_len: usize,
    concentration: f64,
    skew: f64,
) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = vocab / k;
    let supports: Vec<Vec<usize>> = (0..k).map(|t| (t * width..(t + 1) * width).collect()).collect();
    let g = Gamma::new(concentration, 1.0).unwrap();
    let zipf_norm: f64 = (1..=width).map(|i| (i as f64).powf(-skew)).sum();
    let docs = (0..n_docs)
        .map(|_| {
            let raw: Vec<f64> = (0..k).map(|_| g.sample(&mut rng) + 1e-12).collect();
            let s: f64 = raw.iter().sum();
            let theta: Vec<f64> = raw.iter().map(|x| x / s).collect();
            let mut counts = vec![0u32; vocab];
            for _ in 0..doc_len {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut topic = k - 1;
                for (t, p) in theta.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        topic = t;
                        break;
                    }
                }
                let r: f64 = rng.random::<f64>() * zipf_norm;
                let mut acc = 0.0;
                let mut rank = width - 1;
                for i in 0..width {
                    acc += ((i + 1) as f64).powf(-skew);
                    if r < acc {
                        rank = i;
                        break;
                    }
                }
                counts[supports[topic][rank]] += 1;
            }
            BagOfWords::from_counts(counts.into_iter().enumerate())
        })
        .collect();
    Planted { docs, supports }
}

/// Greedy one-to-one matching of learned top-`n` word sets to the planted
/// supports by overlap; true when every planted topic is matched with its
/// full support.
pub fn recovers_all(model: &TopicModel, supports: &[Vec<usize>], n: usize) -> bool {
    let learned: Vec<BTreeSet<usize>> =
        (0..model.k()).map(|t| model.top_words(t, n).into_iter().map(|(w, _)| w).collect()).collect();
    let planted: Vec<BTreeSet<usize>> = supports.iter().map(|s| s.iter().copied().collect()).collect();
    let mut pairs = Vec::new();
    for (i, l) in learned.iter().enumerate() {
        for (j, p) in planted.iter().enumerate() {
            pairs.push((l.intersection(p).count(), i, j));
        }
    }
    pairs.sort_by(|a, b| b.cmp(a));
    let (mut used_l, mut used_p) = (BTreeSet::new(), BTreeSet::new());
    let mut matched = 0;
    for (overlap, i, j) in pairs {
        if used_l.contains(&i) || used_p.contains(&j) {
            continue;
        }
        used_l.insert(i);
        used_p.insert(j);
        if overlap == planted[j].len().min(n) {
            matched += 1;
        }
    }
    matched == planted.len()
}

/// Token-by-token scorer: for each foundation, average the association of
/// every matching token and take the sign of the association-weighted
/// sentiment.
pub fn naive_score(tokens: &[String], lexicon: &Lexicon) -> MoralScore {
    let mut score = MoralScore::default();
    for f in Foundation::ALL {
        let fi = f.index();
        let mut probs = Vec::new();
        let mut sents = Vec::new();
        for t in tokens {
            if let Some(e) = lexicon.lookup(t) {
                if e.prob[fi] > 0.0 {
                    probs.push(e.prob[fi]);
                    sents.push(e.sentiment[fi]);
                }
            }
        }
        if probs.is_empty() {
            continue;
        }
        let psum: f64 = probs.iter().sum();
        let wsum: f64 = probs.iter().zip(&sents).map(|(p, s)| p * s).sum();
        let polarity = if wsum > 0.0 {
            Polarity::Virtue
        } else if wsum < 0.0 {
            Polarity::Vice
        } else {
            Polarity::None
        };
        score.foundations[fi] = FoundationScore {
            loading: if polarity == Polarity::None { 0.0 } else { psum / probs.len() as f64 },
            polarity,
            matched: probs.len(),
        };
    }
    score
}

/// `(sum, n)` of loadings per `[foundation][vice, virtue]` over a filter.
pub fn naive_groups(scores: &[ScoredTweet], keep: impl Fn(&ScoredTweet) -> bool) -> [[(f64, usize); 2]; 5] {
    let mut out = [[(0.0, 0usize); 2]; 5];
    for s in scores.iter().filter(|s| keep(s)) {
        for f in 0..5 {
            let fs = s.score.foundations[f];
            let pole = match fs.polarity {
                Polarity::Vice => 0,
                Polarity::Virtue => 1,
                Polarity::None => continue,
            };
            out[f][pole].0 += fs.loading;
            out[f][pole].1 += 1;
        }
    }
    out
}

pub fn naive_mean(cell: (f64, usize)) -> f64 {
    if cell.1 == 0 {
        0.0
    } else {
        cell.0 / cell.1 as f64
    }
}

/// Random scored tweets spread over the given windows.
pub fn random_scores(seed: u64, n: usize, windows: &[TimeWindow]) -> Vec<ScoredTweet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = windows.first().unwrap().start;
    let end = windows.last().unwrap().end;
    (0..n)
        .map(|i| {
            let mut score = MoralScore::default();
            for fs in score.foundations.iter_mut() {
                let r: f64 = rng.random();
                *fs = if r < 0.3 {
                    FoundationScore { loading: 0.0, polarity: Polarity::None, matched: 0 }
                } else {
                    let polarity = if r < 0.65 { Polarity::Vice } else { Polarity::Virtue };
                    FoundationScore { loading: rng.random_range(0.01..1.0), polarity, matched: 1 }
                };
            }
            ScoredTweet { id: format!("s{i:04}"), timestamp: rng.random_range(start..end), score }
        })
        .collect()
}

pub fn day_key(s: &ScoredTweet) -> chrono::NaiveDate {
    day_of(s.timestamp)
}

/// A random forest of `n` tweets: each node replies to an earlier node, to a
/// missing id (orphan) or to nothing. Ids are shuffled so that id order says
/// nothing about structure, and timestamps are random.
pub fn random_forest(rng: &mut impl Rng, n: usize) -> Vec<TweetRecord> {
    let mut ids: Vec<String> = (0..n).map(|i| format!("n{i:04}")).collect();
    ids.shuffle(rng);
    (0..n)
        .map(|i| {
            let r: f64 = rng.random();
            let parent_id = if i == 0 || r < 0.15 {
                None
            } else if r < 0.22 {
                Some(format!("gone{i}"))
            } else {
                Some(ids[rng.random_range(0..i)].clone())
            };
            TweetRecord {
                id: ids[i].clone(),
                parent_id,
                author_id: format!("u{}", rng.random_range(0..20)),
                timestamp: rng.random_range(1_500_000_000..1_500_100_000),
                text: String::new(),
                lang: None,
            }
        })
        .collect()
}

/// Connected components of the reply graph, each as a sorted id list,
/// computed by union-find over edges whose parent is in the corpus.
pub fn brute_components(records: &[TweetRecord]) -> BTreeSet<Vec<String>> {
    let pos: BTreeMap<&str, usize> = records.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    let mut uf = UnionFind::new(records.len());
    for (i, r) in records.iter().enumerate() {
        if let Some(&p) = r.parent_id.as_deref().and_then(|p| pos.get(p)) {
            uf.union(i, p);
        }
    }
    uf.components()
        .into_iter()
        .map(|c| {
            let mut ids: Vec<String> = c.into_iter().map(|i| records[i].id.clone()).collect();
            ids.sort();
            ids
        })
        .collect()
}

/// A pipeline config over the committed fixture, writing to `dir/out`.
pub fn fixture_config(dir: &std::path::Path, seed: u64) -> moralscope::pipeline::PipelineConfig {
    let input = dir.join("fixture.jsonl");
    if !input.exists() {
        std::fs::write(&input, moralscope::fixture::FIXTURE_JSONL).unwrap();
    }
    moralscope::pipeline::PipelineConfig {
        input: Some(input),
        out_dir: dir.join("out"),
        seed,
        ..Default::default()
    }
}

/// SHA-256 of every file under `root` keyed by relative path, skipping the
/// run manifest (it records timings).
pub fn tree_checksums(root: &std::path::Path) -> BTreeMap<String, String> {
    fn walk(base: &std::path::Path, dir: &std::path::Path, out: &mut BTreeMap<String, String>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).unwrap().to_string_lossy().replace('\\', "/");
                if rel != moralscope::pipeline::MANIFEST_FILE {
                    out.insert(rel, moralscope::pipeline::sha256_hex(&std::fs::read(&path).unwrap()));
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn read_csv(path: &std::path::Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect();
    (headers, rows)
}
