//! Binary model layout (all little-endian):
//!
//! | offset | size    | field                 |
//! |--------|---------|-----------------------|
//! | 0      | 4       | magic `LDA1`          |
//! | 4      | 4       | K (u32)               |
//! | 8      | 4       | V (u32)               |
//! | 12     | 8       | seed (u64)            |
//! | 20     | 8       | update count t (u64)  |
//! | 28     | 8       | alpha (f64)           |
//! | 36     | 8       | eta (f64)             |
//! | 44     | 8       | kappa (f64)           |
//! | 52     | 8       | tau0 (f64)            |
//! | 60     | 4       | batch_size (u32)      |
//! | 64     | 4       | max_epochs (u32)      |
//! | 68     | 8       | e_step_tol (f64)      |
//! | 76     | 4       | e_step_max_iters (u32)|
//! | 80     | 8·K·V   | lambda, row-major f64 |

use std::io::{Read, Write};

use ndarray::Array2;
use serde_json::json;

use super::{GlobalState, LdaConfig, TopicError, TopicModel};
use crate::textprep::Vocabulary;

pub const MODEL_MAGIC: &[u8; 4] = b"LDA1";
const HEADER_LEN: usize = 80;

fn to_u32(x: usize, what: &str) -> Result<u32, TopicError> {
    u32::try_from(x).map_err(|_| TopicError::Format(format!("{what} {x} does not fit in u32")))
}

pub fn write_model<W: Write>(mut out: W, config: &LdaConfig, state: &GlobalState) -> Result<(), TopicError> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * state.lambda.len());
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&to_u32(state.k(), "K")?.to_le_bytes());
    buf.extend_from_slice(&to_u32(state.vocab_size(), "V")?.to_le_bytes());
    buf.extend_from_slice(&config.seed.to_le_bytes());
    buf.extend_from_slice(&state.t.to_le_bytes());
    for x in [config.alpha(), config.eta(), config.kappa, config.tau0] {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    buf.extend_from_slice(&to_u32(config.batch_size, "batch_size")?.to_le_bytes());
    buf.extend_from_slice(&to_u32(config.max_epochs, "max_epochs")?.to_le_bytes());
    buf.extend_from_slice(&config.e_step_tol.to_le_bytes());
    buf.extend_from_slice(&to_u32(config.e_step_max_iters, "e_step_max_iters")?.to_le_bytes());
    debug_assert_eq!(buf.len(), HEADER_LEN);
    for x in state.lambda.iter() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_model<R: Read>(mut input: R) -> Result<(LdaConfig, GlobalState), TopicError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(TopicError::Format("truncated header".into()));
    }
    if &bytes[..4] != MODEL_MAGIC {
        return Err(TopicError::Format("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (k, v) = (u32_at(4), u32_at(8));
    let expected = HEADER_LEN + 8 * k * v;
    if bytes.len() != expected {
        return Err(TopicError::Format(format!(
            "expected {expected} bytes for {k}x{v} topics, found {}",
            bytes.len()
        )));
    }
    let config = LdaConfig {
        k,
        seed: u64_at(12),
        alpha: Some(f64_at(28)),
        eta: Some(f64_at(36)),
        kappa: f64_at(44),
        tau0: f64_at(52),
        batch_size: u32_at(60),
        max_epochs: u32_at(64),
        e_step_tol: f64_at(68),
        e_step_max_iters: u32_at(76),
    };
    let values: Vec<f64> = (0..k * v).map(|i| f64_at(HEADER_LEN + 8 * i)).collect();
    let lambda = Array2::from_shape_vec((k, v), values).expect("length checked above");
    Ok((config, GlobalState { lambda, t: u64_at(20) }))
}

/// JSON sidecar listing the top `n` words of every topic.
pub fn top_words_json(model: &TopicModel, vocab: &Vocabulary, n: usize) -> serde_json::Value {
    let topics: Vec<serde_json::Value> = (0..model.k())
        .map(|k| {
            let words: Vec<serde_json::Value> = model
                .top_words(k, n)
                .into_iter()
                .map(|(w, p)| json!({"word": vocab.word(w), "weight": p}))
                .collect();
            json!({"topic": k, "words": words})
        })
        .collect();
    json!({"k": model.k(), "vocab_size": model.vocab_size(), "topics": topics})
}
