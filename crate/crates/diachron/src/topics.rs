//! LDA topic modeling by collapsed Gibbs sampling, with an intrinsic
//! (document co-occurrence) coherence score and a sweep over topic counts
//! that picks the smallest K on the score plateau.
//!
//! A single fit is strictly sequential and bit-deterministic for a given
//! seed; the sweep runs one independent fit per K in parallel, each with
//! its own derived seed.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::normalize::TokenStream;

#[derive(Debug, Error)]
pub enum TopicsError {
    #[error("no tokens survive the document-frequency bounds")]
    EmptyVocabulary,
    #[error("document {0} has no in-vocabulary tokens")]
    EmptyDocument(usize),
    #[error("no topic counts to sweep")]
    EmptySweep,
}

/// Token ↔ id bijection with per-token document frequencies.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    id_of: HashMap<String, usize>,
    token_of: Vec<String>,
    doc_freq: Vec<u64>,
}

impl Vocabulary {
    pub fn id(&self, token: &str) -> Option<usize> {
        self.id_of.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.token_of[id]
    }

    pub fn doc_freq(&self, id: usize) -> u64 {
        self.doc_freq[id]
    }

    pub fn len(&self) -> usize {
        self.token_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_of.is_empty()
    }
}

/// Keeps tokens whose document frequency is at least `min_df` and at most
/// `max_df_fraction` of the document count; ids follow sorted token order.
pub fn build_vocabulary(
    docs: &[TokenStream],
    min_df: u64,
    max_df_fraction: f64,
) -> Result<Vocabulary, TopicsError> {
    let mut df: HashMap<&str, u64> = HashMap::new();
    for doc in docs {
        let unique: HashSet<&str> = doc.tokens.iter().map(String::as_str).collect();
        for t in unique {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let max_df = max_df_fraction * docs.len() as f64;
    let mut kept: Vec<(&str, u64)> = df
        .into_iter()
        .filter(|&(_, d)| d >= min_df && d as f64 <= max_df)
        .collect();
    if kept.is_empty() {
        return Err(TopicsError::EmptyVocabulary);
    }
    kept.sort_unstable_by(|a, b| a.0.cmp(b.0));
    let token_of: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
    let doc_freq: Vec<u64> = kept.iter().map(|&(_, d)| d).collect();
    let id_of = token_of
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(Vocabulary {
        id_of,
        token_of,
        doc_freq,
    })
}

#[derive(Debug, Clone)]
pub struct LdaConfig {
    pub num_topics: usize,
    /// Symmetric document-topic prior; `None` means 50/K.
    pub alpha: Option<f64>,
    /// Topic-word smoothing.
    pub beta_h: f64,
    /// Gibbs sweeps.
    pub iterations: usize,
    pub seed: u64,
    /// Vocabulary pruning bounds (used by callers that build the
    /// vocabulary from the same config).
    pub min_df: u64,
    pub max_df_fraction: f64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            num_topics: 20,
            alpha: None,
            beta_h: 0.01,
            iterations: 1000,
            seed: 42,
            min_df: 5,
            max_df_fraction: 0.5,
        }
    }
}

impl LdaConfig {
    pub fn effective_alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.num_topics as f64)
    }
}

#[derive(Debug, Clone)]
pub struct TopicModel {
    /// K × V topic-word distributions (posterior means, rows sum to 1).
    pub phi: Vec<Vec<f64>>,
    /// D × K document-topic distributions (posterior means, rows sum to 1).
    pub theta: Vec<Vec<f64>>,
    /// Final topic assignment of every in-vocabulary token position.
    pub assignments: Vec<Vec<usize>>,
    /// Joint log p(w,z) after each sweep.
    pub log_likelihood_trace: Vec<f64>,
}

/// Running Σ lgamma(count + offset) over a family of counts, updated in
/// O(1) per count change via lgamma(x+1+c) = lgamma(x+c) + ln(x+c).
struct LgammaSum {
    offset: f64,
    sum: f64,
}

impl LgammaSum {
    fn new(offset: f64, counts: impl Iterator<Item = u64>) -> Self {
        let sum = counts.map(|c| ln_gamma(c as f64 + offset)).sum();
        LgammaSum { offset, sum }
    }

    #[inline]
    fn increment(&mut self, old_count: u64) {
        self.sum += (old_count as f64 + self.offset).ln();
    }

    #[inline]
    fn decrement(&mut self, old_count: u64) {
        self.sum -= (old_count as f64 - 1.0 + self.offset).ln();
    }
}

/// Collapsed Gibbs sampling. Tokens outside the vocabulary are ignored; a
/// document with no in-vocabulary tokens is an error. Identical
/// (docs, vocab, cfg) always produce a bit-identical model.
pub fn fit_lda(
    docs: &[TokenStream],
    vocab: &Vocabulary,
    cfg: &LdaConfig,
) -> Result<TopicModel, TopicsError> {
    let k = cfg.num_topics;
    assert!(k >= 1, "need at least one topic");
    let v = vocab.len();
    let alpha = cfg.effective_alpha();
    let beta = cfg.beta_h;
    let v_beta = v as f64 * beta;
    let k_alpha = k as f64 * alpha;

    let ids: Vec<Vec<usize>> = docs
        .iter()
        .enumerate()
        .map(|(i, doc)| {
            let mapped: Vec<usize> =
                doc.tokens.iter().filter_map(|t| vocab.id(t)).collect();
            if mapped.is_empty() {
                Err(TopicsError::EmptyDocument(i))
            } else {
                Ok(mapped)
            }
        })
        .collect::<Result<_, _>>()?;
    let d = ids.len();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut n_dk = vec![vec![0u64; k]; d];
    let mut n_kw = vec![vec![0u64; v]; k];
    let mut n_k = vec![0u64; k];
    let mut z: Vec<Vec<usize>> = ids
        .iter()
        .map(|doc| doc.iter().map(|_| rng.gen_range(0..k)).collect())
        .collect();
    for (di, (doc, zs)) in ids.iter().zip(&z).enumerate() {
        for (&w, &t) in doc.iter().zip(zs) {
            n_dk[di][t] += 1;
            n_kw[t][w] += 1;
            n_k[t] += 1;
        }
    }

    let mut s_kw = LgammaSum::new(beta, n_kw.iter().flatten().copied());
    let mut s_k = LgammaSum::new(v_beta, n_k.iter().copied());
    let mut s_dk = LgammaSum::new(alpha, n_dk.iter().flatten().copied());
    let ll_const = k as f64 * ln_gamma(v_beta) - (k * v) as f64 * ln_gamma(beta)
        + d as f64 * ln_gamma(k_alpha)
        - (d * k) as f64 * ln_gamma(alpha)
        - ids
            .iter()
            .map(|doc| ln_gamma(doc.len() as f64 + k_alpha))
            .sum::<f64>();

    let mut weights = vec![0.0f64; k];
    let mut trace = Vec::with_capacity(cfg.iterations);
    for _sweep in 0..cfg.iterations {
        for (di, doc) in ids.iter().enumerate() {
            for (pos, &w) in doc.iter().enumerate() {
                let old = z[di][pos];
                s_kw.decrement(n_kw[old][w]);
                s_k.decrement(n_k[old]);
                s_dk.decrement(n_dk[di][old]);
                n_kw[old][w] -= 1;
                n_k[old] -= 1;
                n_dk[di][old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let wt = (n_dk[di][t] as f64 + alpha) * (n_kw[t][w] as f64 + beta)
                        / (n_k[t] as f64 + v_beta);
                    weights[t] = wt;
                    total += wt;
                }
                let mut u = rng.gen::<f64>() * total;
                let mut new = k - 1;
                for (t, &wt) in weights.iter().enumerate() {
                    u -= wt;
                    if u <= 0.0 {
                        new = t;
                        break;
                    }
                }

                s_kw.increment(n_kw[new][w]);
                s_k.increment(n_k[new]);
                s_dk.increment(n_dk[di][new]);
                n_kw[new][w] += 1;
                n_k[new] += 1;
                n_dk[di][new] += 1;
                z[di][pos] = new;
            }
        }
        trace.push(ll_const + s_kw.sum - s_k.sum + s_dk.sum);
    }

    let phi = (0..k)
        .map(|t| {
            let denom = n_k[t] as f64 + v_beta;
            (0..v).map(|w| (n_kw[t][w] as f64 + beta) / denom).collect()
        })
        .collect();
    let theta = (0..d)
        .map(|di| {
            let denom = ids[di].len() as f64 + k_alpha;
            (0..k)
                .map(|t| (n_dk[di][t] as f64 + alpha) / denom)
                .collect()
        })
        .collect();
    Ok(TopicModel {
        phi,
        theta,
        assignments: z,
        log_likelihood_trace: trace,
    })
}

/// The `top_n` highest-probability word ids of each topic, ties broken by
/// ascending id.
pub fn top_topic_words(model: &TopicModel, top_n: usize) -> Vec<Vec<usize>> {
    model
        .phi
        .iter()
        .map(|row| {
            let mut ids: Vec<usize> = (0..row.len()).collect();
            ids.sort_unstable_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            ids.truncate(top_n);
            ids
        })
        .collect()
}

/// Intrinsic coherence from document co-occurrence: for each topic's
/// ranked top words w_1..w_n, sum ln((D(w_i,w_j)+1)/D(w_j)) over i<j,
/// where D counts documents; pairs whose denominator word never occurs
/// are skipped. Returns the mean over topics.
pub fn umass_coherence(
    model: &TopicModel,
    docs: &[TokenStream],
    vocab: &Vocabulary,
    top_n: usize,
) -> f64 {
    assert!(top_n >= 2, "coherence needs at least one word pair");
    let tops = top_topic_words(model, top_n);
    let needed: HashSet<usize> = tops.iter().flatten().copied().collect();
    let mut single: HashMap<usize, u64> = HashMap::new();
    let mut pair: HashMap<(usize, usize), u64> = HashMap::new();
    for doc in docs {
        let mut present: Vec<usize> = doc
            .tokens
            .iter()
            .filter_map(|t| vocab.id(t))
            .filter(|id| needed.contains(id))
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        present.sort_unstable();
        for (a, &wa) in present.iter().enumerate() {
            *single.entry(wa).or_insert(0) += 1;
            for &wb in &present[a + 1..] {
                *pair.entry((wa, wb)).or_insert(0) += 1;
            }
        }
    }
    let co = |a: usize, b: usize| -> u64 {
        let key = if a < b { (a, b) } else { (b, a) };
        pair.get(&key).copied().unwrap_or(0)
    };
    let mut total = 0.0;
    for top in &tops {
        let mut score = 0.0;
        for i in 0..top.len() {
            for j in i + 1..top.len() {
                let d_j = single.get(&top[j]).copied().unwrap_or(0);
                if d_j == 0 {
                    continue;
                }
                score += ((co(top[i], top[j]) as f64 + 1.0) / d_j as f64).ln();
            }
        }
        total += score;
    }
    total / model.phi.len() as f64
}

/// The plateau rule: the smallest K whose score is within `epsilon` of
/// the maximum. `epsilon = None` means 2% of the maximum's magnitude.
pub fn select_plateau(scores: &[(usize, f64)], epsilon: Option<f64>) -> Option<usize> {
    let max = scores.iter().map(|&(_, s)| s).fold(f64::NEG_INFINITY, f64::max);
    if scores.is_empty() || !max.is_finite() {
        return None;
    }
    let eps = epsilon.unwrap_or(0.02 * max.abs());
    scores
        .iter()
        .filter(|&&(_, s)| s >= max - eps)
        .map(|&(k, _)| k)
        .min()
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// (K, coherence score) in ascending K order.
    pub scores: Vec<(usize, f64)>,
    /// K chosen by the plateau rule.
    pub selected: usize,
}

/// Fits one model per topic count (in parallel, each with seed ⊕ K),
/// scores each, and applies the plateau rule.
pub fn coherence_sweep(
    docs: &[TokenStream],
    vocab: &Vocabulary,
    cfg_base: &LdaConfig,
    k_values: &[usize],
    top_n: usize,
    plateau_epsilon: Option<f64>,
) -> Result<SweepResult, TopicsError> {
    if k_values.is_empty() {
        return Err(TopicsError::EmptySweep);
    }
    let mut scores: Vec<(usize, f64)> = k_values
        .par_iter()
        .map(|&k| {
            let cfg = LdaConfig {
                num_topics: k,
                seed: cfg_base.seed ^ k as u64,
                ..cfg_base.clone()
            };
            let model = fit_lda(docs, vocab, &cfg)?;
            Ok((k, umass_coherence(&model, docs, vocab, top_n)))
        })
        .collect::<Result<_, TopicsError>>()?;
    scores.sort_unstable_by_key(|&(k, _)| k);
    let selected = select_plateau(&scores, plateau_epsilon).expect("nonempty scores");
    Ok(SweepResult { scores, selected })
}
