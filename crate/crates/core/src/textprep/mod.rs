//! Text normalization: lowercase, strip punctuation and digits, drop
//! stopwords, Porter-stem.

mod porter;
mod stopwords;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::{decompose_canonical, is_combining_mark};

use crate::error::{Error, Result};

pub use porter::stem;

/// Ordered stems of one text. Every token matches `^[a-z]+$` and none is a
/// stopword.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenList(pub Vec<String>);

impl TokenList {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    pub fn english() -> Self {
        StopWords(stopwords::ENGLISH.iter().map(|s| s.to_string()).collect())
    }

    pub fn empty() -> Self {
        StopWords(HashSet::new())
    }

    /// Each entry is normalized the same way post text is, so "don't" in a
    /// list matches the token "dont".
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopWords(
            words
                .into_iter()
                .flat_map(|w| {
                    normalize(w.as_ref())
                        .split_whitespace()
                        .map(str::to_string)
                        .collect::<Vec<_>>()
                })
                .collect(),
        )
    }

    /// One word per line, UTF-8.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_words(text.lines()))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for StopWords {
    fn default() -> Self {
        StopWords::english()
    }
}

/// ASCII transliteration of a lowercase letter, when it decomposes into one
/// ASCII letter plus combining marks.
fn transliterate(c: char) -> Option<char> {
    let mut base = None;
    let mut ok = true;
    decompose_canonical(c, |d| {
        if base.is_none() {
            base = Some(d);
        } else if !is_combining_mark(d) {
            ok = false;
        }
    });
    base.filter(|b| ok && b.is_ascii_lowercase())
}

/// Lowercases, removes apostrophes and letters without an ASCII mapping,
/// and turns every other non-letter into a space.
fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars().flat_map(char::to_lowercase) {
        match c {
            'a'..='z' => out.push(c),
            '\'' | '\u{2019}' | '\u{02bc}' => {}
            c if c.is_alphabetic() => {
                if let Some(t) = transliterate(c) {
                    out.push(t);
                }
            }
            // a lone combining mark after an ASCII letter carries no letter
            c if is_combining_mark(c) => {}
            _ => out.push(' '),
        }
    }
    out
}

/// Porter stemming repeated until the word stops changing. A single pass
/// is not idempotent ("agreed" -> "agre" -> "agr").
fn stem_fixpoint(word: &str) -> String {
    let mut cur = stem(word);
    loop {
        let next = stem(&cur);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// Normalizes `text` into stems. Stopwords are matched before stemming, and
/// a stem that is itself a stopword is dropped as well.
pub fn clean(text: &str, stopwords: &StopWords) -> TokenList {
    TokenList(
        normalize(text)
            .split_whitespace()
            .filter(|w| !stopwords.contains(w))
            .map(stem_fixpoint)
            .filter(|s| !s.is_empty() && !stopwords.contains(s))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(t: &TokenList) -> Vec<&str> {
        t.tokens().iter().map(String::as_str).collect()
    }

    #[test]
    fn running_dogs() {
        let out = clean("Running, 123 dogs!", &StopWords::empty());
        assert_eq!(toks(&out), ["run", "dog"]);
    }

    #[test]
    fn stopwords_after_lowercasing() {
        let sw = StopWords::from_words(["the"]);
        assert!(clean("the THE The", &sw).is_empty());
    }

    #[test]
    fn empty_and_blank() {
        assert!(clean("", &StopWords::english()).is_empty());
        assert!(clean("  \t\n ", &StopWords::english()).is_empty());
    }

    #[test]
    fn digits_and_punctuation_split_words() {
        let out = clean("cats&dogs 4ever...", &StopWords::empty());
        assert_eq!(toks(&out), ["cat", "dog", "ever"]);
    }

    #[test]
    fn apostrophes_join() {
        let out = clean("Don't panic", &StopWords::english());
        assert_eq!(toks(&out), ["panic"]);
    }

    #[test]
    fn accents_transliterated_others_dropped() {
        let out = clean("Café naïve straße", &StopWords::empty());
        assert_eq!(toks(&out), ["cafe", "naiv", "strae"]);
    }

    #[test]
    fn stopword_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sw.txt");
        std::fs::write(&p, "Foo\nbar\n\n").unwrap();
        let sw = StopWords::from_file(&p).unwrap();
        assert_eq!(sw.len(), 2);
        assert_eq!(toks(&clean("foo bar baz", &sw)), ["baz"]);
    }

    #[test]
    fn bundled_list_is_normalized() {
        for w in stopwords::ENGLISH {
            assert!(w.bytes().all(|c| c.is_ascii_lowercase()), "{w}");
        }
    }

    proptest! {
        #[test]
        fn tokens_are_lowercase_ascii(text in "\\PC{0,80}") {
            let out = clean(&text, &StopWords::english());
            for t in out.tokens() {
                prop_assert!(!t.is_empty() && t.bytes().all(|c| c.is_ascii_lowercase()), "{t:?}");
                prop_assert!(!StopWords::english().contains(t));
            }
        }

        #[test]
        fn idempotent_on_alphabetic_input(text in "[a-zA-Z ]{0,120}") {
            let sw = StopWords::english();
            let once = clean(&text, &sw);
            prop_assert_eq!(clean(&once.join(), &sw), once);
        }

        #[test]
        fn deterministic(text in "\\PC{0,60}") {
            let sw = StopWords::english();
            prop_assert_eq!(clean(&text, &sw), clean(&text, &sw));
        }
    }
}
