//! Evaluation engine for fine-grained video captioning and retrieval.
//!
//! * [`corpus`]: annotated corpus and prediction files, validation, stats
//! * [`embed_store`]: `CAREEMB1` embedding files and cosine similarity
//! * [`retrieval`]: Recall@K, retrieval bias between spatial and temporal
//!   splits, unified score
//! * [`judge`]: LLM judge gateway (element extraction, entailment)
//! * [`capst`]: caption precision/recall/F1 over objects and events
//! * [`adapt`]: toy contrastive text encoder and vocabulary projection
//! * [`report`]: evaluation reports in JSON and Markdown
//! * [`cli`]: the `careval` command line

pub mod adapt;
pub mod capst;
pub mod cli;
pub mod corpus;
pub mod embed_store;
pub mod judge;
pub mod report;
pub mod retrieval;
