//! Rule-based valence sentiment: a token lexicon with negator and booster
//! handling, a normalized per-line compound score, and per-year means.
//!
//! Scoring consumes the cleaned but *unfiltered* token stream — negators
//! like "not" are stop words and must still be visible here.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ingest::Corpus;
use crate::normalize::{tokenize, TokenStream};

/// Normalization constant in compound = S/sqrt(S^2 + NORM).
const NORM: f64 = 15.0;
/// Damping factor applied to a valence within 3 tokens of a negator.
const NEGATION_FACTOR: f64 = -0.74;
/// How many preceding tokens a negator reaches.
const NEGATION_WINDOW: usize = 3;

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("lexicon line {0}: malformed row")]
    ParseError(usize),
    #[error("reading lexicon: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct ValenceLexicon {
    valences: HashMap<String, f64>,
    negators: HashSet<String>,
    boosters: HashMap<String, f64>,
}

impl ValenceLexicon {
    /// Parses the lexicon format: `token<TAB>valence` rows, with later
    /// sections headed `[negators]` (one token per line) and `[boosters]`
    /// (`token<TAB>increment`). `#` starts a comment. Duplicate tokens
    /// take the last entry. Valences must lie in [-4, 4], booster
    /// increments in [-1, 1].
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, SentimentError> {
        enum Section {
            Valences,
            Negators,
            Boosters,
        }
        let mut lex = ValenceLexicon::default();
        let mut section = Section::Valences;
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "[negators]" => {
                    section = Section::Negators;
                    continue;
                }
                "[boosters]" => {
                    section = Section::Boosters;
                    continue;
                }
                _ => {}
            }
            match section {
                Section::Negators => {
                    if line.contains(char::is_whitespace) {
                        return Err(SentimentError::ParseError(lineno));
                    }
                    lex.negators.insert(line.to_string());
                }
                Section::Valences | Section::Boosters => {
                    let (token, value) = line
                        .split_once('\t')
                        .ok_or(SentimentError::ParseError(lineno))?;
                    let value: f64 = value
                        .trim()
                        .parse()
                        .map_err(|_| SentimentError::ParseError(lineno))?;
                    let token = token.trim().to_string();
                    if let Section::Boosters = section {
                        if !(-1.0..=1.0).contains(&value) {
                            return Err(SentimentError::ParseError(lineno));
                        }
                        lex.boosters.insert(token, value);
                    } else {
                        if !(-4.0..=4.0).contains(&value) {
                            return Err(SentimentError::ParseError(lineno));
                        }
                        lex.valences.insert(token, value);
                    }
                }
            }
        }
        Ok(lex)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, SentimentError> {
        Self::from_reader(File::open(path)?)
    }

    /// The lexicon shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_reader(&include_bytes!("../data/sentiment_lexicon.txt")[..])
            .expect("bundled lexicon must parse")
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valences.get(token).copied()
    }

    pub fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(token)
    }

    pub fn booster(&self, token: &str) -> Option<f64> {
        self.boosters.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.valences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valences.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SentimentScore {
    pub compound: f64,
    pub pos: f64,
    pub neu: f64,
    pub neg: f64,
}

/// Scores one line. Each token with a lexicon valence contributes an
/// adjusted valence: a booster immediately before it shifts the magnitude,
/// and a negator within the 3 preceding tokens flips and damps it. Tokens
/// that are themselves negators contribute nothing even if they also carry
/// a valence. The compound score is the normalized sum S/sqrt(S^2+15);
/// pos/neu/neg are proportions over all tokens of the line.
pub fn score_line(ts: &TokenStream, lex: &ValenceLexicon) -> SentimentScore {
    let n = ts.len();
    if n == 0 {
        return SentimentScore {
            compound: 0.0,
            pos: 0.0,
            neu: 1.0,
            neg: 0.0,
        };
    }
    let mut sum = 0.0;
    let mut pos = 0usize;
    let mut neg = 0usize;
    for (i, tok) in ts.tokens.iter().enumerate() {
        if lex.is_negator(tok) {
            continue;
        }
        let Some(mut v) = lex.valence(tok) else {
            continue;
        };
        if v != 0.0 {
            if let Some(b) = i.checked_sub(1).and_then(|p| lex.booster(&ts.tokens[p])) {
                v += v.signum() * b;
            }
        }
        let negated = ts.tokens[..i]
            .iter()
            .rev()
            .take(NEGATION_WINDOW)
            .any(|t| lex.is_negator(t));
        if negated {
            v *= NEGATION_FACTOR;
        }
        sum += v;
        if v > 0.0 {
            pos += 1;
        } else if v < 0.0 {
            neg += 1;
        }
    }
    let compound = (sum / (sum * sum + NORM).sqrt()).clamp(-1.0, 1.0);
    SentimentScore {
        compound,
        pos: pos as f64 / n as f64,
        neu: (n - pos - neg) as f64 / n as f64,
        neg: neg as f64 / n as f64,
    }
}

/// One line at the extreme of the compound range.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremeLine {
    pub line_id: u64,
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct YearSentiment {
    pub year: i32,
    pub mean_compound: f64,
    pub line_count: u64,
}

#[derive(Debug, Clone)]
pub struct SentimentReport {
    pub years: Vec<YearSentiment>,
    pub min: Option<ExtremeLine>,
    pub max: Option<ExtremeLine>,
}

/// Mean compound per year (ascending) plus the global extreme lines.
/// Ties on score keep the earliest line in corpus order.
pub fn yearly_sentiment(corpus: &Corpus, lex: &ValenceLexicon) -> SentimentReport {
    let compounds: Vec<f64> = corpus
        .lines
        .par_iter()
        .map(|l| score_line(&tokenize(&l.text), lex).compound)
        .collect();
    let mut years = Vec::new();
    for (&year, idxs) in &corpus.by_year {
        let sum: f64 = idxs.iter().map(|&i| compounds[i]).sum();
        years.push(YearSentiment {
            year,
            mean_compound: sum / idxs.len() as f64,
            line_count: idxs.len() as u64,
        });
    }
    let extreme = |pick_min: bool| -> Option<ExtremeLine> {
        let mut best: Option<(f64, usize)> = None;
        for (i, &c) in compounds.iter().enumerate() {
            let replace = match best {
                None => true,
                Some((b, _)) => {
                    if pick_min {
                        c < b
                    } else {
                        c > b
                    }
                }
            };
            if replace {
                best = Some((c, i));
            }
        }
        best.map(|(score, i)| ExtremeLine {
            line_id: corpus.lines[i].line_id,
            text: corpus.lines[i].text.clone(),
            score,
        })
    };
    SentimentReport {
        years,
        min: extreme(true),
        max: extreme(false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_lexicon() -> ValenceLexicon {
        ValenceLexicon::from_reader(
            "good\t1.9\nbad\t-2.5\nhate\t-2.7\n[negators]\nnot\nnever\n[boosters]\nvery\t0.293\n"
                .as_bytes(),
        )
        .unwrap()
    }

    fn line(tokens: &[&str]) -> TokenStream {
        TokenStream::new(tokens.iter().map(|t| t.to_string()).collect())
    }

    #[test]
    fn parses_sections_and_duplicates() {
        let lex = ValenceLexicon::from_reader(
            "good\t1.0\ngood\t1.9 # last wins\n[negators]\nnot\n[boosters]\nvery\t0.293\n"
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(lex.valence("good"), Some(1.9));
        assert!(lex.is_negator("not"));
        assert_eq!(lex.booster("very"), Some(0.293));
    }

    #[test]
    fn empty_file_scores_all_neutral() {
        let lex = ValenceLexicon::from_reader("".as_bytes()).unwrap();
        assert!(lex.is_empty());
        let s = score_line(&line(&["anything", "at", "all"]), &lex);
        assert_eq!(s.compound, 0.0);
        assert_eq!(s.neu, 1.0);
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(matches!(
            ValenceLexicon::from_reader("bad\tnotanumber\n".as_bytes()),
            Err(SentimentError::ParseError(1))
        ));
        assert!(matches!(
            ValenceLexicon::from_reader("ok\t1.0\nhuge\t9.5\n".as_bytes()),
            Err(SentimentError::ParseError(2))
        ));
    }

    #[test]
    fn compound_of_single_positive_token() {
        let s = score_line(&line(&["good"]), &toy_lexicon());
        // 1.9 / sqrt(1.9^2 + 15)
        assert!((s.compound - 0.4404).abs() < 1e-4);
        assert_eq!(s.pos, 1.0);
    }

    #[test]
    fn negation_flips_and_damps() {
        let s = score_line(&line(&["not", "good"]), &toy_lexicon());
        // -0.74 * 1.9 = -1.406 -> -1.406/sqrt(1.406^2+15)
        assert!((s.compound - -0.3412).abs() < 1e-4);
        assert_eq!(s.neg, 0.5);
        assert_eq!(s.neu, 0.5);
    }

    #[test]
    fn negation_reaches_three_tokens() {
        let lex = toy_lexicon();
        assert!(score_line(&line(&["not", "x", "x", "good"]), &lex).compound < 0.0);
        assert!(score_line(&line(&["not", "x", "x", "x", "good"]), &lex).compound > 0.0);
    }

    #[test]
    fn booster_raises_magnitude() {
        let lex = toy_lexicon();
        let plain = score_line(&line(&["good"]), &lex).compound;
        let boosted = score_line(&line(&["very", "good"]), &lex).compound;
        assert!(boosted > plain);
        let expected = 2.193 / (2.193f64 * 2.193 + 15.0).sqrt();
        assert!((boosted - expected).abs() < 1e-12);
    }

    #[test]
    fn booster_deepens_negatives_too() {
        let lex = toy_lexicon();
        let plain = score_line(&line(&["bad"]), &lex).compound;
        let boosted = score_line(&line(&["very", "bad"]), &lex).compound;
        assert!(boosted < plain);
    }

    #[test]
    fn negator_status_wins_over_valence() {
        let lex = ValenceLexicon::from_reader("no\t-1.2\n[negators]\nno\n".as_bytes()).unwrap();
        let s = score_line(&line(&["no"]), &lex);
        assert_eq!(s.compound, 0.0);
        assert_eq!(s.neu, 1.0);
    }

    #[test]
    fn empty_line_is_neutral() {
        let s = score_line(&TokenStream::default(), &toy_lexicon());
        assert_eq!(s.compound, 0.0);
        assert_eq!(s.neu, 1.0);
    }

    #[test]
    fn compound_saturates_on_long_positive_line() {
        let lex = toy_lexicon();
        let ts = TokenStream::new(vec!["good".into(); 10_000]);
        let s = score_line(&ts, &lex);
        assert!(s.compound > 0.999);
        assert!(s.compound < 1.0);
    }

    #[test]
    fn yearly_means_are_per_line_compounds() {
        use crate::ingest::{build_corpus, Episode, RawScriptLine};
        let episodes = vec![
            Episode { episode_id: 1, air_year: 1990, title: String::new() },
            Episode { episode_id: 2, air_year: 1991, title: String::new() },
        ];
        let lines = vec![
            RawScriptLine { line_id: 0, episode_id: 1, speaking: true, raw_text: "A: good".into() },
            RawScriptLine { line_id: 1, episode_id: 2, speaking: true, raw_text: "B: bad".into() },
        ];
        let corpus = build_corpus(&lines, &episodes).unwrap().corpus;
        let lex = toy_lexicon();
        let report = yearly_sentiment(&corpus, &lex);
        let good = score_line(&line(&["good"]), &lex).compound;
        let bad = score_line(&line(&["bad"]), &lex).compound;
        assert_eq!(report.years.len(), 2);
        assert_eq!(report.years[0].year, 1990);
        assert_eq!(report.years[0].mean_compound, good);
        assert_eq!(report.years[0].line_count, 1);
        assert_eq!(report.years[1].mean_compound, bad);
        assert_eq!(report.max.as_ref().unwrap().line_id, 0);
        assert_eq!(report.min.as_ref().unwrap().line_id, 1);
        assert_eq!(report.min.as_ref().unwrap().text, "bad");
    }

    #[test]
    fn bundled_lexicon_loads_and_has_breadth() {
        let lex = ValenceLexicon::bundled();
        assert!(lex.len() > 300, "bundled lexicon shrank to {}", lex.len());
        assert!(lex.valence("good").is_some());
        assert!(lex.valence("bad").unwrap() < 0.0);
        assert!(lex.is_negator("not"));
        assert!(lex.is_negator("dont"));
        assert!(lex.booster("very").is_some());
    }

    proptest! {
        // proportions always partition the line
        #[test]
        fn proportions_sum_to_one(tokens in proptest::collection::vec(
            prop::sample::select(vec!["good", "bad", "not", "very", "x", "hate"]), 1..30)
        ) {
            let ts = TokenStream::new(tokens.iter().map(|t| t.to_string()).collect());
            let s = score_line(&ts, &toy_lexicon());
            prop_assert!((s.pos + s.neu + s.neg - 1.0).abs() < 1e-9);
            prop_assert!(s.compound > -1.0 && s.compound < 1.0);
        }

        // appending a positive token never lowers the score, a negative
        // one never raises it (away from negator/booster adjacency)
        #[test]
        fn appending_valence_moves_compound_monotonically(
            tokens in proptest::collection::vec(prop::sample::select(vec!["good", "bad", "x"]), 0..20)
        ) {
            let lex = toy_lexicon();
            let base: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
            let s0 = score_line(&TokenStream::new(base.clone()), &lex).compound;
            let mut plus = base.clone();
            plus.push("good".into());
            let mut minus = base;
            minus.push("bad".into());
            prop_assert!(score_line(&TokenStream::new(plus), &lex).compound >= s0);
            prop_assert!(score_line(&TokenStream::new(minus), &lex).compound <= s0);
        }

        // prefixing a negator strictly flips the sign of a one-token line
        #[test]
        fn negator_prefix_flips_sign(tok in prop::sample::select(vec!["good", "bad", "hate"])) {
            let lex = toy_lexicon();
            let plain = score_line(&line(&[tok]), &lex).compound;
            let negated = score_line(&line(&["not", tok]), &lex).compound;
            prop_assert!(plain * negated < 0.0);
        }
    }
}
