use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use statrs::function::gamma::{digamma, ln_gamma};

use super::{LdaConfig, TopicError};
use crate::textprep::BagOfWords;

/// Topic-word variational parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    /// K x V, strictly positive.
    pub lambda: Array2<f64>,
    /// Number of global updates applied so far.
    pub t: u64,
}

impl GlobalState {
    pub fn k(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn vocab_size(&self) -> usize {
        self.lambda.ncols()
    }

    /// Seeded Gamma(100, 0.01) draw, so entries have mean 1.
    pub fn random(k: usize, vocab_size: usize, rng: &mut ChaCha8Rng) -> Self {
        let gamma = Gamma::new(100.0, 0.01).expect("valid gamma parameters");
        let lambda = Array2::from_shape_fn((k, vocab_size), |_| gamma.sample(rng));
        Self { lambda, t: 0 }
    }

    /// `E[log beta_kv] = psi(lambda_kv) - psi(sum_v lambda_kv)`.
    pub(crate) fn expected_log_beta(&self) -> Array2<f64> {
        let mut out = self.lambda.mapv(digamma);
        for (mut row, lam) in out.outer_iter_mut().zip(self.lambda.outer_iter()) {
            let norm = digamma(lam.sum());
            row.mapv_inplace(|x| x - norm);
        }
        out
    }

    /// Row-normalized lambda, i.e. the posterior mean of each topic.
    pub fn expected_beta(&self) -> Array2<f64> {
        let mut beta = self.lambda.clone();
        for mut row in beta.outer_iter_mut() {
            let s = row.sum();
            row.mapv_inplace(|x| x / s);
        }
        beta
    }
}

/// Per-document variational parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalState {
    /// Length K, every entry >= alpha.
    pub gamma: Array1<f64>,
    /// One row per distinct word of the document (in `BagOfWords` order),
    /// each a distribution over K.
    pub phi: Array2<f64>,
    pub iterations: usize,
}

fn check_doc(doc: &BagOfWords, vocab_size: usize) -> Result<(), TopicError> {
    if doc.is_empty() {
        return Err(TopicError::EmptyDocument);
    }
    match doc.max_index() {
        Some(w) if w >= vocab_size => Err(TopicError::WordOutOfRange { word: w, vocab_size }),
        _ => Ok(()),
    }
}

pub(crate) fn expected_log_theta(gamma: &Array1<f64>) -> Array1<f64> {
    let norm = digamma(gamma.sum());
    gamma.mapv(|g| digamma(g) - norm)
}

/// Coordinate ascent on (gamma, phi) for one document with the topics held
/// fixed. Gamma starts at `alpha + N/K`.
pub(crate) fn e_step_with(
    doc: &BagOfWords,
    elog_beta: &Array2<f64>,
    alpha: f64,
    config: &LdaConfig,
) -> LocalState {
    let k = elog_beta.nrows();
    let n_words = doc.entries.len();
    let total = doc.total() as f64;
    let mut gamma = Array1::from_elem(k, alpha + total / k as f64);
    let mut phi = Array2::<f64>::zeros((n_words, k));
    let mut iterations = 0;
    let mut logits = vec![0.0; k];

    for _ in 0..config.e_step_max_iters {
        iterations += 1;
        let elog_theta = expected_log_theta(&gamma);
        let mut next = Array1::from_elem(k, alpha);
        for (i, &(w, count)) in doc.entries.iter().enumerate() {
            let mut max = f64::NEG_INFINITY;
            for t in 0..k {
                logits[t] = elog_theta[t] + elog_beta[[t, w]];
                max = max.max(logits[t]);
            }
            let mut norm = 0.0;
            for l in logits.iter_mut() {
                *l = (*l - max).exp();
                norm += *l;
            }
            for t in 0..k {
                let p = logits[t] / norm;
                phi[[i, t]] = p;
                next[t] += p * count as f64;
            }
        }
        let change = (&next - &gamma).mapv(f64::abs).mean().unwrap_or(0.0);
        gamma = next;
        if change < config.e_step_tol {
            break;
        }
    }
    LocalState {
        gamma,
        phi,
        iterations,
    }
}

pub fn e_step(
    doc: &BagOfWords,
    state: &GlobalState,
    config: &LdaConfig,
) -> Result<LocalState, TopicError> {
    check_doc(doc, state.vocab_size())?;
    Ok(e_step_with(doc, &state.expected_log_beta(), config.alpha(), config))
}

/// Document-level evidence lower bound at the given local parameters.
pub fn local_elbo(
    doc: &BagOfWords,
    local: &LocalState,
    state: &GlobalState,
    alpha: f64,
) -> f64 {
    local_elbo_with(doc, local, &state.expected_log_beta(), alpha)
}

pub(crate) fn local_elbo_with(
    doc: &BagOfWords,
    local: &LocalState,
    elog_beta: &Array2<f64>,
    alpha: f64,
) -> f64 {
    let k = local.gamma.len();
    let elog_theta = expected_log_theta(&local.gamma);
    let mut bound = 0.0;
    for (i, &(w, count)) in doc.entries.iter().enumerate() {
        let mut term = 0.0;
        for t in 0..k {
            let p = local.phi[[i, t]];
            if p > 0.0 {
                term += p * (elog_theta[t] + elog_beta[[t, w]] - p.ln());
            }
        }
        bound += count as f64 * term;
    }
    bound + theta_terms(&local.gamma, &elog_theta, alpha)
}

/// `E[log p(theta|alpha)] - E[log q(theta|gamma)]`.
pub(crate) fn theta_terms(gamma: &Array1<f64>, elog_theta: &Array1<f64>, alpha: f64) -> f64 {
    let k = gamma.len() as f64;
    let mut s = ln_gamma(k * alpha) - k * ln_gamma(alpha) - ln_gamma(gamma.sum());
    for (g, e) in gamma.iter().zip(elog_theta.iter()) {
        s += (alpha - g) * e + ln_gamma(*g);
    }
    s
}

/// Sufficient statistics `sum_n phi_dn^k * count_n`, accumulated into `sstats`.
fn accumulate_sstats(sstats: &mut Array2<f64>, doc: &BagOfWords, phi: &Array2<f64>) {
    for (i, &(w, count)) in doc.entries.iter().enumerate() {
        for t in 0..sstats.nrows() {
            sstats[[t, w]] += phi[[i, t]] * count as f64;
        }
    }
}

/// Intermediate topics for a single sampled document:
/// `eta + D * sum_n phi_dn^k w_dn`.
pub fn lambda_hat(
    doc: &BagOfWords,
    phi: &Array2<f64>,
    num_docs: usize,
    eta: f64,
    vocab_size: usize,
) -> Array2<f64> {
    let mut sstats = Array2::zeros((phi.ncols(), vocab_size));
    accumulate_sstats(&mut sstats, doc, phi);
    sstats.mapv(|s| eta + num_docs as f64 * s)
}

/// `lambda <- (1 - rho) lambda + rho lambda_hat`.
pub fn global_update(
    state: &GlobalState,
    lambda_hat: &Array2<f64>,
    rho_t: f64,
) -> Result<GlobalState, TopicError> {
    if !(rho_t > 0.0 && rho_t <= 1.0) {
        return Err(TopicError::InvalidStepSize(rho_t));
    }
    if state.lambda.dim() != lambda_hat.dim() {
        return Err(TopicError::ShapeMismatch {
            expected: state.lambda.dim(),
            actual: lambda_hat.dim(),
        });
    }
    let lambda = if rho_t == 1.0 {
        lambda_hat.clone()
    } else {
        &state.lambda * (1.0 - rho_t) + lambda_hat * rho_t
    };
    Ok(GlobalState {
        lambda,
        t: state.t + 1,
    })
}

/// Step size `(tau0 + t)^-kappa`, capped at 1.
pub fn rho(t: u64, config: &LdaConfig) -> f64 {
    (config.tau0 + t as f64).powf(-config.kappa).min(1.0)
}

/// Fitted model: final topics plus per-document topic proportions.
#[derive(Debug, Clone)]
pub struct TopicModel {
    pub config: LdaConfig,
    pub state: GlobalState,
    /// D x K; rows of empty documents hold the prior `alpha`.
    pub gamma: Array2<f64>,
}

impl TopicModel {
    pub fn k(&self) -> usize {
        self.state.k()
    }

    pub fn vocab_size(&self) -> usize {
        self.state.vocab_size()
    }

    /// Indices of the `n` heaviest words of topic `k` with their expected
    /// probabilities; ties go to the lower index.
    pub fn top_words(&self, k: usize, n: usize) -> Vec<(usize, f64)> {
        let row = self.state.lambda.row(k);
        let total = row.sum();
        let mut ranked: Vec<(usize, f64)> = row.iter().map(|&x| x / total).enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(n);
        ranked
    }

    /// Infers topic proportions for unseen documents against the final topics.
    pub fn infer(&self, docs: &[BagOfWords]) -> Result<Array2<f64>, TopicError> {
        infer_gamma(docs, &self.state, &self.config)
    }
}

fn infer_gamma(
    docs: &[BagOfWords],
    state: &GlobalState,
    config: &LdaConfig,
) -> Result<Array2<f64>, TopicError> {
    let elog_beta = state.expected_log_beta();
    let alpha = config.alpha();
    let rows: Vec<Array1<f64>> = docs
        .par_iter()
        .map(|doc| {
            if doc.is_empty() {
                return Ok(Array1::from_elem(state.k(), alpha));
            }
            check_doc(doc, state.vocab_size())?;
            Ok(e_step_with(doc, &elog_beta, alpha, config).gamma)
        })
        .collect::<Result<_, TopicError>>()?;
    let mut gamma = Array2::zeros((docs.len(), state.k()));
    for (mut dst, src) in gamma.outer_iter_mut().zip(rows) {
        dst.assign(&src);
    }
    Ok(gamma)
}

/// Mini-batch SVI driver. Randomness (initial topics, document order) comes
/// from one ChaCha8 stream seeded with `config.seed`.
pub struct SviTrainer {
    config: LdaConfig,
    num_docs: usize,
    state: GlobalState,
    rng: ChaCha8Rng,
}

impl SviTrainer {
    pub fn new(config: LdaConfig, vocab_size: usize, num_docs: usize) -> Result<Self, TopicError> {
        config.validate()?;
        if num_docs == 0 {
            return Err(TopicError::EmptyCorpus);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let state = GlobalState::random(config.k, vocab_size, &mut rng);
        Ok(Self {
            config,
            num_docs,
            state,
            rng,
        })
    }

    pub fn config(&self) -> &LdaConfig {
        &self.config
    }

    pub fn state(&self) -> &GlobalState {
        &self.state
    }

    /// One global step from a mini-batch; returns the step size used.
    /// Intermediate topics are `eta + (D/|B|) * sum over the batch`.
    pub fn update_batch(&mut self, batch: &[&BagOfWords]) -> Result<f64, TopicError> {
        let v = self.state.vocab_size();
        for doc in batch {
            check_doc(doc, v)?;
        }
        let elog_beta = self.state.expected_log_beta();
        let alpha = self.config.alpha();
        let locals: Vec<LocalState> = batch
            .par_iter()
            .map(|doc| e_step_with(doc, &elog_beta, alpha, &self.config))
            .collect();
        // Fixed reduction order keeps results identical to a sequential run.
        let mut sstats = Array2::zeros(self.state.lambda.dim());
        for (doc, local) in batch.iter().zip(&locals) {
            accumulate_sstats(&mut sstats, doc, &local.phi);
        }
        let scale = self.num_docs as f64 / batch.len() as f64;
        let eta = self.config.eta();
        let lambda_hat = sstats.mapv(|s| eta + scale * s);
        let step = rho(self.state.t, &self.config);
        self.state = global_update(&self.state, &lambda_hat, step)?;
        Ok(step)
    }

    /// One pass over `docs` in a freshly shuffled order. Empty documents are
    /// skipped.
    pub fn run_epoch(&mut self, docs: &[BagOfWords]) -> Result<(), TopicError> {
        let mut order: Vec<usize> = (0..docs.len()).filter(|&i| !docs[i].is_empty()).collect();
        order.shuffle(&mut self.rng);
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<&BagOfWords> = chunk.iter().map(|&i| &docs[i]).collect();
            self.update_batch(&batch)?;
        }
        Ok(())
    }

    pub fn finish(self, docs: &[BagOfWords]) -> Result<TopicModel, TopicError> {
        let gamma = infer_gamma(docs, &self.state, &self.config)?;
        Ok(TopicModel {
            config: self.config,
            state: self.state,
            gamma,
        })
    }
}

pub fn fit(
    docs: &[BagOfWords],
    vocab_size: usize,
    config: &LdaConfig,
) -> Result<TopicModel, TopicError> {
    let num_docs = docs.iter().filter(|d| !d.is_empty()).count();
    let mut trainer = SviTrainer::new(config.clone(), vocab_size, num_docs)?;
    for _ in 0..config.max_epochs {
        trainer.run_epoch(docs)?;
    }
    trainer.finish(docs)
}
