//! LDA fitted by stochastic variational inference, with perplexity, UMass
//! coherence, K sweeps and model persistence.

mod eval;
mod persist;
mod svi;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{
    assign_topic, coherence, document_bound, perplexity, recommend_k, sweep_k, CoherenceReport,
    SweepResult, SweepRow, TopicAssignment,
};
pub use persist::{read_model, top_words_json, write_model, MODEL_MAGIC};
pub use svi::{
    e_step, fit, global_update, lambda_hat, local_elbo, rho, GlobalState, LocalState,
    SviTrainer, TopicModel,
};

#[derive(Debug, Error)]
pub enum TopicError {
    #[error("document has no tokens")]
    EmptyDocument,
    #[error("corpus has no non-empty documents")]
    EmptyCorpus,
    #[error("invalid LDA config: {0}")]
    InvalidConfig(String),
    #[error("step size {0} outside (0, 1]")]
    InvalidStepSize(f64),
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("word index {word} outside vocabulary of size {vocab_size}")]
    WordOutOfRange { word: usize, vocab_size: usize },
    #[error("top_n {top_n} must be in [2, {vocab_size}]")]
    BadTopN { top_n: usize, vocab_size: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    /// Number of topics.
    pub k: usize,
    /// Dirichlet prior on topic proportions; `None` means `1/k`.
    pub alpha: Option<f64>,
    /// Dirichlet prior on topics; `None` means `1/k`.
    pub eta: Option<f64>,
    /// Forgetting rate.
    pub kappa: f64,
    /// Delay; down-weights early updates.
    pub tau0: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub e_step_tol: f64,
    pub e_step_max_iters: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            k: 5,
            alpha: None,
            eta: None,
            kappa: 0.7,
            tau0: 1.0,
            batch_size: 64,
            max_epochs: 20,
            e_step_tol: 1e-3,
            e_step_max_iters: 100,
            seed: 0,
        }
    }
}

impl LdaConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(1.0 / self.k as f64)
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(1.0 / self.k as f64)
    }

    pub fn validate(&self) -> Result<(), TopicError> {
        let bad = |m: &str| Err(TopicError::InvalidConfig(m.to_string()));
        if self.k < 1 {
            return bad("k must be at least 1");
        }
        if !(self.alpha() > 0.0 && self.alpha().is_finite()) {
            return bad("alpha must be positive");
        }
        if !(self.eta() > 0.0 && self.eta().is_finite()) {
            return bad("eta must be positive");
        }
        if !(self.kappa > 0.5 && self.kappa <= 1.0) {
            return bad("kappa must lie in (0.5, 1]");
        }
        if !(self.tau0 >= 0.0 && self.tau0.is_finite()) {
            return bad("tau0 must be non-negative");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if self.max_epochs < 1 {
            return bad("max_epochs must be at least 1");
        }
        if !(self.e_step_tol > 0.0) {
            return bad("e_step_tol must be positive");
        }
        if self.e_step_max_iters < 1 {
            return bad("e_step_max_iters must be at least 1");
        }
        Ok(())
    }
}
