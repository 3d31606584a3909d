//! Diachronic corpus analytics over year-partitioned dialogue corpora:
//! ingestion and cleaning, tokenization with stop-word filtering and
//! stemming, lexical statistics (frequency, entropy, Zipf and Heaps fits),
//! rule-based sentiment, TF-IDF keyword tracking, and LDA topic modeling
//! with coherence-based model selection.

pub mod chart;
pub mod cli;
pub mod config;
pub mod ingest;
pub mod keywords;
pub mod lexstats;
pub mod normalize;
pub mod report;
pub mod sentiment;
pub mod topics;
