//! Tokenization and corruption augmentations (token deletion, span cropping).
//!
//! Corruption removes tokens rather than masking them, and never removes the
//! whole sequence: downstream mean pooling is undefined over empty input, so
//! the first token is retained when everything else would go.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Placeholder token returned when tokenization strips a text to nothing.
pub const EMPTY_TOKEN: &str = "\u{2205}";

/// A non-empty sequence of whitespace-free tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    /// Wraps pre-split tokens. Empty input or tokens containing whitespace
    /// are rejected.
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::invalid("token sequence must be non-empty"));
        }
        if tokens
            .iter()
            .any(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::invalid(
                "tokens must be non-empty and whitespace-free",
            ));
        }
        Ok(TokenSequence { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Probabilities for the corruption operations, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConfig {
    /// Per-token deletion probability.
    pub p: f64,
    /// Span-start probability per index.
    pub p_s: f64,
    /// Maximum span size relative to the sequence length.
    pub p_span: f64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        CorruptionConfig {
            p: 0.05,
            p_s: 0.05,
            p_span: 0.05,
        }
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p", self.p), ("p_s", self.p_s), ("p_span", self.p_span)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must be in [0,1], got {v}")));
            }
        }
        Ok(())
    }
}

fn is_edge_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}'
                | '\u{2026}' | '\u{00AB}' | '\u{00BB}' | '\u{00BF}' | '\u{00A1}' | '\u{00B7}'
        )
}

/// Lowercases, splits on Unicode whitespace, and strips leading/trailing
/// punctuation from each token. A text with no surviving tokens yields the
/// single placeholder token [`EMPTY_TOKEN`].
pub fn tokenize(text: &str) -> TokenSequence {
    let tokens: Vec<String> = text
        .to_lowercase()
        .split_whitespace()
        .map(|t| t.trim_matches(is_edge_punct).to_string())
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        return TokenSequence {
            tokens: vec![EMPTY_TOKEN.to_string()],
        };
    }
    TokenSequence { tokens }
}

/// Removes each token independently with probability `p`. If every token
/// would be removed, the first token is retained.
pub fn token_delete(seq: &TokenSequence, p: f64, rng: &mut impl Rng) -> TokenSequence {
    assert!((0.0..=1.0).contains(&p), "p must be in [0,1]");
    let kept: Vec<String> = seq
        .tokens
        .iter()
        .filter(|_| !rng.gen_bool(p))
        .cloned()
        .collect();
    if kept.is_empty() {
        return TokenSequence {
            tokens: vec![seq.tokens[0].clone()],
        };
    }
    TokenSequence { tokens: kept }
}

/// Deletes sampled spans of tokens. Each index starts a span with
/// probability `p_s`; span sizes are integers drawn uniformly from
/// `[0, floor(len * p_span)]`; overlapping spans merge. The first token is
/// retained if every token would be removed.
pub fn span_crop(
    seq: &TokenSequence,
    p_s: f64,
    p_span: f64,
    rng: &mut impl Rng,
) -> TokenSequence {
    assert!((0.0..=1.0).contains(&p_s), "p_s must be in [0,1]");
    assert!((0.0..=1.0).contains(&p_span), "p_span must be in [0,1]");
    let len = seq.tokens.len();
    let max_span = (len as f64 * p_span).floor() as usize;
    let mut removed = vec![false; len];
    for start in 0..len {
        if rng.gen_bool(p_s) {
            let size = rng.gen_range(0..=max_span);
            for flag in removed.iter_mut().skip(start).take(size) {
                *flag = true;
            }
        }
    }
    let kept: Vec<String> = seq
        .tokens
        .iter()
        .zip(&removed)
        .filter(|(_, &gone)| !gone)
        .map(|(t, _)| t.clone())
        .collect();
    if kept.is_empty() {
        return TokenSequence {
            tokens: vec![seq.tokens[0].clone()],
        };
    }
    TokenSequence { tokens: kept }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn seq(tokens: &[&str]) -> TokenSequence {
        TokenSequence::new(tokens.iter().map(|t| t.to_string()).collect()).unwrap()
    }

    #[test]
    fn tokenize_strips_punctuation_and_lowercases() {
        assert_eq!(tokenize("Hello,  World!").tokens(), &["hello", "world"]);
    }

    #[test]
    fn tokenize_preserves_duplicates_and_order() {
        assert_eq!(tokenize("a b a").tokens(), &["a", "b", "a"]);
    }

    #[test]
    fn tokenize_degenerate_input() {
        assert_eq!(tokenize("!!!").tokens(), &[EMPTY_TOKEN]);
        assert_eq!(tokenize("").tokens(), &[EMPTY_TOKEN]);
    }

    #[test]
    fn tokenize_idempotent_on_joined_output() {
        let first = tokenize("The RIVER, runs; fast!");
        let second = tokenize(&first.joined());
        assert_eq!(first, second);
    }

    #[test]
    fn token_delete_identity_at_zero() {
        let s = seq(&["a", "b", "c"]);
        let mut rng = StdRng::seed_from_u64(0);
        assert_eq!(token_delete(&s, 0.0, &mut rng), s);
    }

    #[test]
    fn token_delete_floor_of_one() {
        let s = seq(&["a", "b", "c"]);
        let mut rng = StdRng::seed_from_u64(0);
        assert_eq!(token_delete(&s, 1.0, &mut rng).tokens(), &["a"]);
    }

    #[test]
    fn token_delete_rate_monte_carlo() {
        // Binomial CI over 100 seeds on 10k-token sequences.
        let tokens: Vec<String> = (0..10_000).map(|i| format!("t{i}")).collect();
        let s = TokenSequence::new(tokens).unwrap();
        let mut deleted = 0usize;
        let mut total = 0usize;
        for seed in 0..100u64 {
            let mut rng = StdRng::seed_from_u64(seed);
            let out = token_delete(&s, 0.05, &mut rng);
            deleted += s.len() - out.len();
            total += s.len();
        }
        let rate = deleted as f64 / total as f64;
        assert!(
            (0.04..=0.06).contains(&rate),
            "deletion rate {rate} outside [0.04, 0.06]"
        );
    }

    #[test]
    fn span_crop_identity_cases() {
        let s = seq(&["a", "b", "c", "d"]);
        let mut rng = StdRng::seed_from_u64(1);
        assert_eq!(span_crop(&s, 0.0, 0.5, &mut rng), s);
        assert_eq!(span_crop(&s, 0.5, 0.0, &mut rng), s);
    }

    #[test]
    fn span_crop_expected_deletions_monte_carlo() {
        // |T|=100, p_s=p_span=0.05: naive expectation 100*0.05*(5/2)=12.5;
        // empirical mean (with span overlap) must land within +-1.5.
        let tokens: Vec<String> = (0..100).map(|i| format!("t{i}")).collect();
        let s = TokenSequence::new(tokens).unwrap();
        let trials = 10_000u64;
        let mut deleted = 0usize;
        for seed in 0..trials {
            let mut rng = StdRng::seed_from_u64(seed);
            let out = span_crop(&s, 0.05, 0.05, &mut rng);
            assert!(!out.is_empty());
            deleted += s.len() - out.len();
        }
        let mean = deleted as f64 / trials as f64;
        assert!(
            (11.0..=14.0).contains(&mean),
            "mean deleted {mean} outside 12.5 +- 1.5"
        );
    }

    fn is_subsequence(needle: &[String], haystack: &[String]) -> bool {
        let mut it = haystack.iter();
        needle.iter().all(|t| it.any(|h| h == t))
    }

    proptest! {
        #[test]
        fn corruption_invariants(
            tokens in proptest::collection::vec("[a-z]{1,6}", 1..60),
            p in 0.0f64..=1.0,
            p_s in 0.0f64..=1.0,
            p_span in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            let s = TokenSequence::new(tokens).unwrap();
            let mut rng = StdRng::seed_from_u64(seed);
            let td = token_delete(&s, p, &mut rng);
            let mut rng = StdRng::seed_from_u64(seed);
            let sc = span_crop(&s, p_s, p_span, &mut rng);
            for out in [&td, &sc] {
                prop_assert!(!out.is_empty());
                prop_assert!(is_subsequence(out.tokens(), s.tokens()));
            }
            // Determinism given the seed.
            let mut rng = StdRng::seed_from_u64(seed);
            prop_assert_eq!(token_delete(&s, p, &mut rng), td);
            let mut rng = StdRng::seed_from_u64(seed);
            prop_assert_eq!(span_crop(&s, p_s, p_span, &mut rng), sc);
        }
    }
}
