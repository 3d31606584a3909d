//! Lexical statistics: frequency tables with deterministic ranking,
//! lexical diversity, Shannon entropy, and log-log least-squares fits of
//! the rank-frequency (Zipf) and vocabulary-growth (Heaps) power laws.

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use crate::ingest::Corpus;
use crate::normalize::{filter_stopwords, tokenize, StopList, TokenStream};

#[derive(Debug, Error)]
pub enum LexStatsError {
    #[error("empty input stream")]
    EmptyInput,
    #[error("empty frequency table")]
    EmptyTable,
    #[error("fewer than 2 points survive the frequency cutoff")]
    DegenerateFit,
    #[error("stream of {tokens} tokens is shorter than two strides of {stride}")]
    TooShort { tokens: usize, stride: usize },
}

/// Multiset counts over a token stream with a total and a deterministic
/// ranking: descending count, ties broken lexicographically ascending.
#[derive(Debug, Clone, Default)]
pub struct FrequencyTable {
    counts: HashMap<String, u64>,
    total: u64,
    ranking: Vec<String>,
}

impl FrequencyTable {
    pub fn from_tokens<'a, I: IntoIterator<Item = &'a str>>(tokens: I) -> Self {
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut total = 0u64;
        for t in tokens {
            *counts.entry(t.to_string()).or_insert(0) += 1;
            total += 1;
        }
        Self::from_parts(counts, total)
    }

    pub fn from_counts(counts: HashMap<String, u64>) -> Self {
        let total = counts.values().sum();
        Self::from_parts(counts, total)
    }

    fn from_parts(counts: HashMap<String, u64>, total: u64) -> Self {
        let mut ranking: Vec<String> = counts.keys().cloned().collect();
        ranking.sort_unstable_by(|a, b| counts[b].cmp(&counts[a]).then_with(|| a.cmp(b)));
        FrequencyTable {
            counts,
            total,
            ranking,
        }
    }

    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Tokens in rank order (rank 1 first).
    pub fn ranking(&self) -> &[String] {
        &self.ranking
    }

    /// `(token, count)` for ranks 1..=min(k, vocab).
    pub fn top_k(&self, k: usize) -> Vec<(&str, u64)> {
        self.ranking
            .iter()
            .take(k)
            .map(|t| (t.as_str(), self.counts[t]))
            .collect()
    }

    /// Maximum-likelihood probability f(w)/N; 0 for absent words.
    pub fn probability(&self, token: &str) -> Result<f64, LexStatsError> {
        if self.total == 0 {
            return Err(LexStatsError::EmptyTable);
        }
        Ok(self.count(token) as f64 / self.total as f64)
    }
}

/// |unique| / |tokens|.
pub fn lexical_diversity(ts: &TokenStream) -> Result<f64, LexStatsError> {
    if ts.is_empty() {
        return Err(LexStatsError::EmptyInput);
    }
    let unique: HashSet<&str> = ts.tokens.iter().map(String::as_str).collect();
    Ok(unique.len() as f64 / ts.len() as f64)
}

/// Shannon entropy of the unigram distribution, in bits.
pub fn entropy(ft: &FrequencyTable) -> Result<f64, LexStatsError> {
    if ft.total() == 0 {
        return Err(LexStatsError::EmptyTable);
    }
    let n = ft.total() as f64;
    let mut h = 0.0;
    // ranking order, not map order, so the float sum is reproducible
    for token in &ft.ranking {
        let c = ft.count(token);
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    Ok(h)
}

/// The rank-1 stop-filtered token of each year's lines; years whose lines
/// contain only stop words are omitted.
pub fn top_word_per_year(corpus: &Corpus, stop: &StopList) -> BTreeMap<i32, String> {
    let mut out = BTreeMap::new();
    for year in corpus.years() {
        let mut tokens = Vec::new();
        for line in corpus.lines_for_year(year) {
            tokens.extend(filter_stopwords(&tokenize(&line.text), stop).tokens);
        }
        let ft = FrequencyTable::from_tokens(tokens.iter().map(String::as_str));
        if let Some(top) = ft.ranking().first() {
            out.insert(year, top.clone());
        }
    }
    out
}

/// Log-log least-squares fit of the rank-frequency law f(r) ∝ r^(−α).
#[derive(Debug, Clone)]
pub struct ZipfFit {
    pub alpha: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// (log₂ rank, log₂ frequency) pairs the line was fitted through,
    /// in rank order.
    pub points: Vec<(f64, f64)>,
}

/// Log-log least-squares fit of vocabulary growth V(n) = K·n^β.
#[derive(Debug, Clone)]
pub struct HeapsFit {
    pub k_param: f64,
    pub beta: f64,
    pub r_squared: f64,
    /// (tokens seen, unique tokens seen) at each sampled prefix length.
    pub curve: Vec<(u64, u64)>,
}

/// Ordinary least squares of y on x; returns (slope, intercept, r²).
/// A vertical spread of zero (constant y) is a perfect fit, r² = 1.
fn ols(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let mx = sx / n;
    let my = sy / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| {
            let e = p.1 - (slope * p.0 + intercept);
            e * e
        })
        .sum();
    let r2 = if ss_tot <= f64::EPSILON * n {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    (slope, intercept, r2)
}

/// Fits log₂ f against log₂ r over all ranks whose count is at least
/// `min_freq`; the cutoff suppresses the low-frequency tail curvature.
pub fn zipf_fit(ft: &FrequencyTable, min_freq: u64) -> Result<ZipfFit, LexStatsError> {
    let points: Vec<(f64, f64)> = ft
        .ranking()
        .iter()
        .enumerate()
        .map(|(i, t)| (i as u64 + 1, ft.count(t)))
        .take_while(|&(_, f)| f >= min_freq)
        .map(|(r, f)| ((r as f64).log2(), (f as f64).log2()))
        .collect();
    if points.len() < 2 {
        return Err(LexStatsError::DegenerateFit);
    }
    let (slope, intercept, r_squared) = ols(&points);
    Ok(ZipfFit {
        alpha: (-slope).max(0.0),
        intercept,
        r_squared,
        points,
    })
}

/// Samples the vocabulary-growth curve every `stride` tokens and fits
/// log₂ V against log₂ n.
pub fn heaps_fit(ts: &TokenStream, stride: usize) -> Result<HeapsFit, LexStatsError> {
    assert!(stride > 0, "stride must be positive");
    if ts.len() < 2 * stride {
        return Err(LexStatsError::TooShort {
            tokens: ts.len(),
            stride,
        });
    }
    let mut seen: HashSet<&str> = HashSet::new();
    let mut curve = Vec::with_capacity(ts.len() / stride);
    for (i, tok) in ts.tokens.iter().enumerate() {
        seen.insert(tok);
        if (i + 1) % stride == 0 {
            curve.push(((i + 1) as u64, seen.len() as u64));
        }
    }
    let points: Vec<(f64, f64)> = curve
        .iter()
        .map(|&(n, v)| ((n as f64).log2(), (v as f64).log2()))
        .collect();
    let (slope, intercept, r_squared) = ols(&points);
    Ok(HeapsFit {
        k_param: intercept.exp2(),
        beta: slope,
        r_squared,
        curve,
    })
}
