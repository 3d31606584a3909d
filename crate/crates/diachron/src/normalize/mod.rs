//! Tokenization, stop-word filtering and stemming shared by the analysis
//! modules.

mod porter;

pub use porter::stem;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use thiserror::Error;

use crate::ingest::Corpus;

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("failed to read stop-word list: {0}")]
    Io(#[from] std::io::Error),
}

/// An ordered sequence of whitespace-free tokens, optionally tagged with
/// the line id each token came from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream {
    pub tokens: Vec<String>,
    pub provenance: Option<Vec<u64>>,
}

impl TokenStream {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenStream {
            tokens,
            provenance: None,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Flattens a whole corpus into one stream, tagging each token with
    /// the line it came from.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut tokens = Vec::new();
        let mut provenance = Vec::new();
        for line in &corpus.lines {
            for token in line.text.split(' ').filter(|t| !t.is_empty()) {
                tokens.push(token.to_string());
                provenance.push(line.line_id);
            }
        }
        TokenStream {
            tokens,
            provenance: Some(provenance),
        }
    }
}

/// Splits cleaned text on spaces, preserving order and duplicates.
pub fn tokenize(text: &str) -> TokenStream {
    TokenStream::new(
        text.split(' ')
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect(),
    )
}

/// A set of words to drop before statistical analysis.
#[derive(Debug, Clone, Default)]
pub struct StopList {
    words: HashSet<String>,
}

impl StopList {
    pub fn empty() -> Self {
        StopList::default()
    }

    pub fn from_words<I: IntoIterator<Item = S>, S: Into<String>>(words: I) -> Self {
        let mut list = StopList::default();
        for w in words {
            list.insert(&w.into());
        }
        list
    }

    /// Reads one word per line; `#` starts a comment. Entries are
    /// lowercased and stripped of apostrophes so that surface forms like
    /// "don't" match the cleaned token "dont".
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, NormalizeError> {
        let mut list = StopList::default();
        for line in BufReader::new(reader).lines() {
            let line = line?;
            let entry = line.split('#').next().unwrap_or("").trim();
            if !entry.is_empty() {
                list.insert(entry);
            }
        }
        Ok(list)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, NormalizeError> {
        Self::from_reader(File::open(path)?)
    }

    /// The 179-entry English list bundled with the crate.
    pub fn bundled() -> Self {
        Self::from_reader(include_bytes!("../../data/stopwords.txt").as_slice())
            .expect("bundled stop list is well-formed")
    }

    fn insert(&mut self, entry: &str) {
        let normalized: String = entry
            .to_lowercase()
            .chars()
            .filter(|c| *c != '\'' && *c != '\u{2019}')
            .collect();
        if !normalized.is_empty() {
            self.words.insert(normalized);
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Drops stop words, preserving order and provenance.
pub fn filter_stopwords(ts: &TokenStream, sl: &StopList) -> TokenStream {
    match &ts.provenance {
        None => TokenStream::new(
            ts.tokens
                .iter()
                .filter(|t| !sl.contains(t))
                .cloned()
                .collect(),
        ),
        Some(prov) => {
            let mut tokens = Vec::new();
            let mut provenance = Vec::new();
            for (token, line_id) in ts.tokens.iter().zip(prov) {
                if !sl.contains(token) {
                    tokens.push(token.clone());
                    provenance.push(*line_id);
                }
            }
            TokenStream {
                tokens,
                provenance: Some(provenance),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenize_splits_on_spaces() {
        assert_eq!(tokenize("annoyed grunt").tokens, vec!["annoyed", "grunt"]);
        assert!(tokenize("").tokens.is_empty());
        assert_eq!(
            tokenize("fight fight fight").tokens,
            vec!["fight", "fight", "fight"]
        );
    }

    #[test]
    fn stopword_filtering() {
        let sl = StopList::from_words(["the"]);
        let ts = TokenStream::new(vec!["the".into(), "donut".into()]);
        assert_eq!(filter_stopwords(&ts, &sl).tokens, vec!["donut"]);
        assert!(filter_stopwords(&TokenStream::default(), &sl).is_empty());
    }

    #[test]
    fn bundled_list_keeps_contractions_like_im() {
        let sl = StopList::bundled();
        assert!(!sl.contains("im"));
        // "here" is a stop word; "im" (cleaned "I'm") must survive
        let ts = TokenStream::new(vec!["im".into(), "here".into(), "hungry".into()]);
        assert_eq!(filter_stopwords(&ts, &sl).tokens, vec!["im", "hungry"]);
    }

    #[test]
    fn bundled_list_normalizes_apostrophe_forms() {
        let sl = StopList::bundled();
        for w in ["the", "dont", "youre", "shouldve", "wasnt", "its", "not"] {
            assert!(sl.contains(w), "expected stop word {w:?}");
        }
    }

    #[test]
    fn stop_list_comments_and_blanks() {
        let text = "# leading comment\nfoo\n\nbar # trailing\n";
        let sl = StopList::from_reader(text.as_bytes()).unwrap();
        assert!(sl.contains("foo"));
        assert!(sl.contains("bar"));
        assert_eq!(sl.len(), 2);
    }

    #[test]
    fn stem_well_known_examples() {
        assert_eq!(stem("running"), "run");
        assert_eq!(stem("caresses"), "caress");
        assert_eq!(stem("run"), "run");
    }

    proptest! {
        #[test]
        fn filter_is_idempotent_and_nonincreasing(tokens in proptest::collection::vec("[a-z]{1,8}", 0..40)) {
            let sl = StopList::from_words(["the", "a", "of", "zz"]);
            let ts = TokenStream::new(tokens);
            let once = filter_stopwords(&ts, &sl);
            let twice = filter_stopwords(&once, &sl);
            prop_assert!(once.len() <= ts.len());
            prop_assert_eq!(&once, &twice);
        }

        #[test]
        fn tokenize_join_roundtrip(tokens in proptest::collection::vec("[a-z0-9]{1,10}", 0..30)) {
            let joined = tokens.join(" ");
            prop_assert_eq!(tokenize(&joined).tokens, tokens);
        }
    }
}
