//! Seeded corpus generators for tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::sse::{Corpus, Document};

#[derive(Clone, Copy, Debug)]
pub struct CorpusShape {
    pub max_docs: usize,
    pub max_keywords: usize,
    /// Upper bound on plaintext length in bytes.
    pub max_len: usize,
}

impl Default for CorpusShape {
    fn default() -> Self {
        CorpusShape {
            max_docs: 50,
            max_keywords: 20,
            max_len: 300,
        }
    }
}

pub fn keyword(i: usize) -> String {
    format!("kw{i:02}")
}

/// A random corpus with 1..=max_docs documents over 1..=max_keywords
/// keywords. Each document holds a random subset of the dictionary (possibly
/// empty) and a plaintext of random length that mentions its keywords.
pub fn random_corpus<R: Rng>(rng: &mut R, shape: CorpusShape) -> Corpus {
    let m = rng.gen_range(1..=shape.max_keywords);
    let n = rng.gen_range(1..=shape.max_docs);
    let dictionary: Vec<String> = (0..m).map(keyword).collect();
    let docs = (1..=n as u64)
        .map(|id| {
            let k = rng.gen_range(0..=m.min(5));
            let kws: Vec<String> = dictionary.choose_multiple(rng, k).cloned().collect();
            let mut text = kws.join(" ").into_bytes();
            let len = rng.gen_range(0..=shape.max_len);
            while text.len() < len {
                text.push(rng.gen_range(b'a'..=b'z'));
            }
            Document::new(id, text, kws)
        })
        .collect();
    Corpus::new(docs).with_dictionary(dictionary)
}

/// A deterministic corpus with exactly `pairs` (keyword, document) pairs:
/// `keywords` keywords, each document holding `per_doc` consecutive ones.
/// Posting-list length grows linearly with `pairs`.
pub fn scaling_corpus(pairs: usize, keywords: usize, per_doc: usize) -> Corpus {
    assert!(per_doc >= 1 && per_doc <= keywords && pairs.is_multiple_of(per_doc));
    let docs = (0..pairs / per_doc)
        .map(|i| {
            let kws: Vec<String> = (0..per_doc).map(|j| keyword((i * per_doc + j) % keywords)).collect();
            Document::new(i as u64 + 1, format!("doc {i}: {}", kws.join(" ")), kws)
        })
        .collect();
    Corpus::new(docs).with_dictionary((0..keywords).map(keyword))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn scaling_corpus_has_requested_pairs() {
        let c = scaling_corpus(400, 16, 4);
        assert_eq!(c.pairs(), 400);
        assert_eq!(c.dictionary.len(), 16);
        assert_eq!(c.matching("kw03").len(), 25);
    }

    #[test]
    fn random_corpus_is_valid_and_seeded() {
        let a = random_corpus(&mut ChaCha20Rng::seed_from_u64(5), CorpusShape::default());
        let b = random_corpus(&mut ChaCha20Rng::seed_from_u64(5), CorpusShape::default());
        assert_eq!(a, b);
        a.validate().unwrap();
    }
}
