//! TF-IDF document vectors against a reference corpus, cosine similarity
//! matrices, keyword-list construction with exclusions, and per-year
//! keyword-hit tracking.
//!
//! Keyword matching operates on stop-filtered, unstemmed tokens: the
//! tracked lists contain surface forms like "asking" and "hijackers".

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{clean_line, Corpus};
use crate::normalize::{filter_stopwords, tokenize, StopList, TokenStream};

#[derive(Debug, Error)]
pub enum KeywordsError {
    #[error("need at least 2 documents, got {0}")]
    TooFewDocuments(usize),
    #[error("document `{0}` has no tokens")]
    EmptyDocument(String),
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("token list line {0}: malformed row")]
    ParseError(usize),
    #[error("reading token list: {0}")]
    Io(#[from] std::io::Error),
}

/// A set of named documents sharing one vocabulary.
#[derive(Debug, Clone)]
pub struct DocumentSet {
    pub docs: Vec<(String, TokenStream)>,
    pub vocabulary: Vec<String>,
}

impl DocumentSet {
    pub fn new(docs: Vec<(String, TokenStream)>) -> Result<Self, KeywordsError> {
        let mut seen = HashSet::new();
        for (id, _) in &docs {
            if !seen.insert(id.clone()) {
                return Err(KeywordsError::DuplicateDocId(id.clone()));
            }
        }
        let mut vocabulary: Vec<String> = docs
            .iter()
            .flat_map(|(_, ts)| ts.tokens.iter().cloned())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        vocabulary.sort_unstable();
        Ok(DocumentSet { docs, vocabulary })
    }

    /// Builds one document from raw text: each physical line is cleaned
    /// the same way script lines are, then tokenized and stop-filtered.
    pub fn clean_text_document(raw: &str, stop: &StopList) -> TokenStream {
        let mut tokens = Vec::new();
        for line in raw.lines() {
            if let Some(cleaned) = clean_line(line) {
                tokens.extend(filter_stopwords(&tokenize(&cleaned), stop).tokens);
            }
        }
        TokenStream::new(tokens)
    }
}

/// L2-normalized tf-idf weights for one document.
#[derive(Debug, Clone, Serialize)]
pub struct TfIdfVector {
    pub doc_id: String,
    pub weights: HashMap<String, f64>,
}

impl TfIdfVector {
    pub fn weight(&self, token: &str) -> f64 {
        self.weights.get(token).copied().unwrap_or(0.0)
    }
}

/// tf(t,d) = raw count; idf(t) = ln((1+N)/(1+df(t))) + 1; each vector is
/// then L2-normalized. The smoothed idf keeps terms shared by all
/// documents from vanishing, which matters with N=2.
pub fn tfidf_vectors(ds: &DocumentSet) -> Result<Vec<TfIdfVector>, KeywordsError> {
    if ds.docs.len() < 2 {
        return Err(KeywordsError::TooFewDocuments(ds.docs.len()));
    }
    for (id, ts) in &ds.docs {
        if ts.is_empty() {
            return Err(KeywordsError::EmptyDocument(id.clone()));
        }
    }
    let n = ds.docs.len() as f64;
    let mut df: HashMap<&str, u64> = HashMap::new();
    let mut tfs: Vec<HashMap<&str, u64>> = Vec::with_capacity(ds.docs.len());
    for (_, ts) in &ds.docs {
        let mut tf: HashMap<&str, u64> = HashMap::new();
        for t in &ts.tokens {
            *tf.entry(t.as_str()).or_insert(0) += 1;
        }
        for &t in tf.keys() {
            *df.entry(t).or_insert(0) += 1;
        }
        tfs.push(tf);
    }
    let idf: HashMap<&str, f64> = df
        .iter()
        .map(|(&t, &d)| (t, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
        .collect();
    Ok(ds
        .docs
        .iter()
        .zip(&tfs)
        .map(|((id, _), tf)| {
            // accumulate the norm in sorted token order so the float sum
            // (and thus every normalized weight) is reproducible
            let mut terms: Vec<(&str, u64)> = tf.iter().map(|(&t, &c)| (t, c)).collect();
            terms.sort_unstable_by(|a, b| a.0.cmp(b.0));
            let mut weights: HashMap<String, f64> = HashMap::with_capacity(terms.len());
            let mut sum_sq = 0.0;
            for &(t, c) in &terms {
                let w = c as f64 * idf[t];
                sum_sq += w * w;
                weights.insert(t.to_string(), w);
            }
            let norm = sum_sq.sqrt();
            if norm > 0.0 {
                for w in weights.values_mut() {
                    *w /= norm;
                }
            }
            TfIdfVector {
                doc_id: id.clone(),
                weights,
            }
        })
        .collect())
}

/// Pairwise cosine similarity of unit vectors: symmetric, unit diagonal,
/// entries in [0,1] since weights are nonnegative.
pub fn similarity_matrix(vectors: &[TfIdfVector]) -> Vec<Vec<f64>> {
    let k = vectors.len();
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        m[i][i] = 1.0;
        for j in i + 1..k {
            let (small, large) = if vectors[i].weights.len() <= vectors[j].weights.len() {
                (&vectors[i], &vectors[j])
            } else {
                (&vectors[j], &vectors[i])
            };
            // sorted term order keeps the dot product reproducible
            let mut keys: Vec<&str> = small.weights.keys().map(String::as_str).collect();
            keys.sort_unstable();
            let dot: f64 = keys
                .iter()
                .map(|t| small.weights[*t] * large.weight(t))
                .sum();
            let sim = dot.clamp(0.0, 1.0);
            m[i][j] = sim;
            m[j][i] = sim;
        }
    }
    m
}

/// The k highest-weight tokens of a vector, ties broken lexicographically;
/// zero-weight terms never appear.
pub fn extract_top_terms(v: &TfIdfVector, k: usize) -> Vec<(String, f64)> {
    let mut terms: Vec<(String, f64)> = v
        .weights
        .iter()
        .filter(|(_, &w)| w > 0.0)
        .map(|(t, &w)| (t.clone(), w))
        .collect();
    terms.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    terms.truncate(k);
    terms
}

/// Where a keyword came from: which input list and its rank there.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct KeywordEntry {
    pub token: String,
    /// Index of the source list (first list the token appeared in).
    pub list_index: usize,
    /// 1-based rank within that list.
    pub rank: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct KeywordSet {
    pub entries: Vec<KeywordEntry>,
    pub exclusions_applied: Vec<String>,
    #[serde(skip)]
    members: HashSet<String>,
}

impl KeywordSet {
    pub fn contains(&self, token: &str) -> bool {
        self.members.contains(token)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.token.as_str())
    }
}

/// De-duplicating union of ranked lists (first occurrence wins, so order
/// follows descending source weight), with every token named in the
/// exclusion set removed and recorded in union order.
pub fn build_keyword_set(lists: &[Vec<String>], exclusions: &HashSet<String>) -> KeywordSet {
    let mut entries = Vec::new();
    let mut exclusions_applied = Vec::new();
    let mut seen = HashSet::new();
    let mut members = HashSet::new();
    for (list_index, list) in lists.iter().enumerate() {
        for (i, token) in list.iter().enumerate() {
            if !seen.insert(token.clone()) {
                continue;
            }
            if exclusions.contains(token) {
                exclusions_applied.push(token.clone());
            } else {
                members.insert(token.clone());
                entries.push(KeywordEntry {
                    token: token.clone(),
                    list_index,
                    rank: i + 1,
                });
            }
        }
    }
    KeywordSet {
        entries,
        exclusions_applied,
        members,
    }
}

/// Reads a one-token-per-line file; `#` starts a comment. Rows with
/// embedded whitespace are malformed.
pub fn load_token_list<R: Read>(reader: R) -> Result<Vec<String>, KeywordsError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let token = line.split('#').next().unwrap_or("").trim();
        if token.is_empty() {
            continue;
        }
        if token.contains(char::is_whitespace) {
            return Err(KeywordsError::ParseError(i + 1));
        }
        out.push(token.to_string());
    }
    Ok(out)
}

/// The two ranked 50-token lists shipped with the crate.
pub fn bundled_token_lists() -> Vec<Vec<String>> {
    let a = load_token_list(&include_bytes!("../data/keywords_address_top50.txt")[..])
        .expect("bundled address list must parse");
    let b = load_token_list(&include_bytes!("../data/keywords_report_top50.txt")[..])
        .expect("bundled report list must parse");
    vec![a, b]
}

/// The exclusion tokens shipped with the crate.
pub fn bundled_exclusions() -> HashSet<String> {
    load_token_list(&include_bytes!("../data/keyword_exclusions.txt")[..])
        .expect("bundled exclusion list must parse")
        .into_iter()
        .collect()
}

/// The keyword set shipped with the crate: the union of two bundled
/// ranked 50-token lists minus the bundled exclusion file.
pub fn bundled_keyword_set() -> KeywordSet {
    build_keyword_set(&bundled_token_lists(), &bundled_exclusions())
}

#[derive(Debug, Clone, Serialize)]
pub struct LineHits {
    pub line_id: u64,
    pub year: i32,
    pub hits: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct YearRate {
    pub year: i32,
    pub mean_hits_per_line: f64,
    pub total_hits: u64,
    pub line_count: u64,
}

#[derive(Debug, Clone)]
pub struct KeywordRateSeries {
    pub years: Vec<YearRate>,
    pub lines: Vec<LineHits>,
}

/// Counts keyword occurrences per line (with multiplicity — a line
/// repeating one keyword three times scores 3) over stop-filtered,
/// unstemmed tokens, and averages per year over all of that year's lines.
pub fn keyword_rate_series(
    corpus: &Corpus,
    ks: &KeywordSet,
    stop: &StopList,
) -> KeywordRateSeries {
    let lines: Vec<LineHits> = corpus
        .lines
        .iter()
        .map(|l| {
            let hits = filter_stopwords(&tokenize(&l.text), stop)
                .tokens
                .iter()
                .filter(|t| ks.contains(t))
                .count() as u64;
            LineHits {
                line_id: l.line_id,
                year: l.air_year,
                hits,
            }
        })
        .collect();
    let mut years = Vec::new();
    for (&year, idxs) in &corpus.by_year {
        let total_hits: u64 = idxs.iter().map(|&i| lines[i].hits).sum();
        years.push(YearRate {
            year,
            mean_hits_per_line: total_hits as f64 / idxs.len() as f64,
            total_hits,
            line_count: idxs.len() as u64,
        });
    }
    KeywordRateSeries { years, lines }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(tokens: &[&str]) -> TokenStream {
        TokenStream::new(tokens.iter().map(|t| t.to_string()).collect())
    }

    fn two_docs() -> DocumentSet {
        DocumentSet::new(vec![
            ("A".into(), ts(&["a", "b"])),
            ("B".into(), ts(&["b"])),
        ])
        .unwrap()
    }

    #[test]
    fn hand_checked_weights() {
        let v = tfidf_vectors(&two_docs()).unwrap();
        // idf(a)=ln(3/2)+1, idf(b)=ln(3/3)+1=1; A=(1.4055,1) normalized
        assert!((v[0].weight("a") - 0.8148).abs() < 1e-4);
        assert!((v[0].weight("b") - 0.5797).abs() < 1e-4);
        assert_eq!(v[1].weight("a"), 0.0);
        assert!((v[1].weight("b") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_docs_get_unit_weight() {
        let ds = DocumentSet::new(vec![
            ("1".into(), ts(&["x"])),
            ("2".into(), ts(&["x"])),
        ])
        .unwrap();
        let v = tfidf_vectors(&ds).unwrap();
        assert!((v[0].weight("x") - 1.0).abs() < 1e-12);
        assert!((v[1].weight("x") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn preconditions_enforced() {
        let one = DocumentSet::new(vec![("A".into(), ts(&["a"]))]).unwrap();
        assert!(matches!(
            tfidf_vectors(&one),
            Err(KeywordsError::TooFewDocuments(1))
        ));
        let empty = DocumentSet::new(vec![
            ("A".into(), ts(&["a"])),
            ("B".into(), ts(&[])),
        ])
        .unwrap();
        match tfidf_vectors(&empty) {
            Err(KeywordsError::EmptyDocument(id)) => assert_eq!(id, "B"),
            other => panic!("expected EmptyDocument, got {other:?}"),
        }
        assert!(matches!(
            DocumentSet::new(vec![("A".into(), ts(&["a"])), ("A".into(), ts(&["b"]))]),
            Err(KeywordsError::DuplicateDocId(_))
        ));
    }

    #[test]
    fn similarity_identical_and_disjoint() {
        let same = tfidf_vectors(
            &DocumentSet::new(vec![
                ("1".into(), ts(&["x", "y"])),
                ("2".into(), ts(&["x", "y"])),
            ])
            .unwrap(),
        )
        .unwrap();
        let m = similarity_matrix(&same);
        assert!((m[0][1] - 1.0).abs() < 1e-12);
        assert_eq!(m[0][0], 1.0);

        let disjoint = tfidf_vectors(
            &DocumentSet::new(vec![
                ("1".into(), ts(&["x"])),
                ("2".into(), ts(&["y"])),
            ])
            .unwrap(),
        )
        .unwrap();
        let m = similarity_matrix(&disjoint);
        assert_eq!(m[0][1], 0.0);
        assert_eq!(m[1][0], 0.0);
    }

    #[test]
    fn top_terms_order_and_clamp() {
        let v = TfIdfVector {
            doc_id: "d".into(),
            weights: [
                ("a".to_string(), 0.9),
                ("b".to_string(), 0.3),
                ("c".to_string(), 0.3),
                ("z".to_string(), 0.0),
            ]
            .into_iter()
            .collect(),
        };
        assert_eq!(extract_top_terms(&v, 1), vec![("a".to_string(), 0.9)]);
        let all = extract_top_terms(&v, 10);
        assert_eq!(
            all.iter().map(|(t, _)| t.as_str()).collect::<Vec<_>>(),
            vec!["a", "b", "c"],
            "ties break lexicographically and zero weights drop"
        );
    }

    #[test]
    fn union_and_exclusions() {
        let lists = vec![
            vec!["a".to_string(), "b".to_string()],
            vec!["b".to_string(), "c".to_string()],
        ];
        let ks = build_keyword_set(&lists, &HashSet::new());
        assert_eq!(
            ks.tokens().collect::<Vec<_>>(),
            vec!["a", "b", "c"],
            "first-seen union order"
        );
        assert_eq!(ks.entries[1], KeywordEntry { token: "b".into(), list_index: 0, rank: 2 });

        let excl: HashSet<String> = ["b".to_string()].into_iter().collect();
        let ks = build_keyword_set(&lists, &excl);
        assert_eq!(ks.tokens().collect::<Vec<_>>(), vec!["a", "c"]);
        assert_eq!(ks.exclusions_applied, vec!["b"]);
        assert!(!ks.contains("b"));
    }

    #[test]
    fn bundled_set_has_sixty_two_tokens() {
        let ks = bundled_keyword_set();
        assert_eq!(ks.len(), 62);
        assert_eq!(ks.exclusions_applied.len(), 35);
        for probe in ["terrorist", "hijackers", "attacks"] {
            assert!(ks.contains(probe), "expected {probe:?} in bundled set");
        }
        assert!(!ks.contains("tonight"), "excluded token leaked through");
    }

    #[test]
    fn token_list_parsing() {
        let list = load_token_list("# c\nalpha\n\nbeta # ok\n".as_bytes()).unwrap();
        assert_eq!(list, vec!["alpha", "beta"]);
        assert!(matches!(
            load_token_list("two words\n".as_bytes()),
            Err(KeywordsError::ParseError(1))
        ));
    }

    fn toy_corpus(lines_by_year: &[(i32, &[&str])]) -> Corpus {
        use crate::ingest::{build_corpus, Episode, RawScriptLine};
        let mut episodes = Vec::new();
        let mut lines = Vec::new();
        let mut id = 0;
        for (ep, &(year, texts)) in lines_by_year.iter().enumerate() {
            episodes.push(Episode {
                episode_id: ep as u64,
                air_year: year,
                title: String::new(),
            });
            for &t in texts {
                lines.push(RawScriptLine {
                    line_id: id,
                    episode_id: ep as u64,
                    speaking: true,
                    raw_text: format!("S: {t}"),
                });
                id += 1;
            }
        }
        build_corpus(&lines, &episodes).unwrap().corpus
    }

    #[test]
    fn hits_count_with_multiplicity() {
        let corpus = toy_corpus(&[(1994, &["fight fight fight", "calm words only"])]);
        let ks = build_keyword_set(&[vec!["fight".to_string()]], &HashSet::new());
        let series = keyword_rate_series(&corpus, &ks, &StopList::empty());
        assert_eq!(series.lines[0].hits, 3);
        assert_eq!(series.lines[1].hits, 0);
        assert_eq!(series.years[0].total_hits, 3);
        assert_eq!(series.years[0].mean_hits_per_line, 1.5);
    }

    #[test]
    fn yearly_mean_is_hits_over_lines() {
        let corpus = toy_corpus(&[(2001, &["war peace", "war"])]);
        let ks = build_keyword_set(&[vec!["war".to_string()]], &HashSet::new());
        let series = keyword_rate_series(&corpus, &ks, &StopList::empty());
        assert_eq!(series.years[0].mean_hits_per_line, 1.0);
        assert_eq!(series.years[0].line_count, 2);
    }

    proptest! {
        // vectors are unit length; similarities live in [0,1] symmetric
        #[test]
        fn vectors_unit_and_similarity_bounded(
            docs in proptest::collection::vec(
                proptest::collection::vec("[a-f]", 1..12), 2..6)
        ) {
            let ds = DocumentSet::new(
                docs.iter().enumerate()
                    .map(|(i, toks)| (format!("d{i}"), TokenStream::new(toks.clone())))
                    .collect(),
            ).unwrap();
            let vs = tfidf_vectors(&ds).unwrap();
            for v in &vs {
                let norm: f64 = v.weights.values().map(|w| w * w).sum::<f64>().sqrt();
                prop_assert!((norm - 1.0).abs() < 1e-9);
            }
            let m = similarity_matrix(&vs);
            for i in 0..m.len() {
                prop_assert_eq!(m[i][i], 1.0);
                for j in 0..m.len() {
                    prop_assert!((0.0..=1.0).contains(&m[i][j]));
                    prop_assert_eq!(m[i][j], m[j][i]);
                }
            }
        }

        // doubling every document leaves the similarity matrix unchanged
        #[test]
        fn doubling_documents_preserves_similarity(
            docs in proptest::collection::vec(
                proptest::collection::vec("[a-e]", 1..10), 2..5)
        ) {
            let build = |reps: usize| {
                let ds = DocumentSet::new(
                    docs.iter().enumerate()
                        .map(|(i, toks)| {
                            let mut t = Vec::new();
                            for _ in 0..reps { t.extend(toks.iter().cloned()); }
                            (format!("d{i}"), TokenStream::new(t))
                        })
                        .collect(),
                ).unwrap();
                similarity_matrix(&tfidf_vectors(&ds).unwrap())
            };
            let (m1, m2) = (build(1), build(2));
            for i in 0..m1.len() {
                for j in 0..m1.len() {
                    prop_assert!((m1[i][j] - m2[i][j]).abs() < 1e-9);
                }
            }
        }

        // total hits decompose over lines and are permutation-invariant
        #[test]
        fn rate_series_totals_consistent(
            hits_words in proptest::collection::vec(
                proptest::collection::vec(prop::sample::select(vec!["war", "x", "y"]), 0..6), 1..10)
        ) {
            let texts: Vec<String> = hits_words.iter().map(|ws| ws.join(" ")).collect();
            let nonempty: Vec<&str> = texts.iter().map(String::as_str).filter(|t| !t.is_empty()).collect();
            prop_assume!(!nonempty.is_empty());
            let corpus = toy_corpus(&[(2001, &nonempty)]);
            let ks = build_keyword_set(&[vec!["war".to_string()]], &HashSet::new());
            let series = keyword_rate_series(&corpus, &ks, &StopList::empty());
            let sum: u64 = series.lines.iter().map(|l| l.hits).sum();
            prop_assert_eq!(series.years[0].total_hits, sum);
            prop_assert_eq!(
                series.years[0].mean_hits_per_line,
                sum as f64 / series.years[0].line_count as f64
            );
        }
    }
}
