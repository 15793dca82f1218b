//! Batch analytics for moral rhetoric in tweet cascades.
//!
//! The pipeline reconstructs reply/retweet cascades ([`corpus`]), cleans and
//! vectorizes text ([`textprep`]), scores moral-foundation loadings with an
//! EMFD-format lexicon ([`moral`]), fits LDA topics by stochastic
//! variational inference ([`topics`]), aggregates loadings over time windows,
//! topics and days ([`timeseries`]), and measures the co-variation of the
//! daily polarization series with cross-recurrence quantification
//! ([`crqa`]). [`pipeline`] wires the stages together with cached,
//! checksummed artifacts.

pub mod corpus;
pub mod crqa;
pub mod fixture;
pub mod moral;
pub mod pipeline;
pub mod textprep;
pub mod timeseries;
pub mod topics;
