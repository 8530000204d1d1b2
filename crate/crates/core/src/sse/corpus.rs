use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::SseError;

/// Name of the optional keyword manifest inside a corpus directory.
pub const MANIFEST_FILE: &str = "keywords.tsv";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub doc_id: u64,
    pub plaintext: Vec<u8>,
    pub keywords: BTreeSet<String>,
}

impl Document {
    pub fn new<I, S>(doc_id: u64, plaintext: impl Into<Vec<u8>>, keywords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Document {
            doc_id,
            plaintext: plaintext.into(),
            keywords: keywords.into_iter().map(Into::into).collect(),
        }
    }

    /// A document whose keywords are the whitespace tokens of its text.
    pub fn from_text(doc_id: u64, text: &str) -> Self {
        Document::new(doc_id, text, tokenize(text))
    }
}

/// Lowercased whitespace tokens with surrounding punctuation stripped.
pub fn tokenize(text: &str) -> BTreeSet<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Documents plus the keyword dictionary they are indexed under.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub dictionary: BTreeSet<String>,
}

impl Corpus {
    /// Dictionary is the union of the documents' keywords.
    pub fn new(documents: Vec<Document>) -> Self {
        let dictionary = documents.iter().flat_map(|d| d.keywords.iter().cloned()).collect();
        Corpus { documents, dictionary }
    }

    /// Adds keywords that need not occur in any document.
    pub fn with_dictionary<I: IntoIterator<Item = String>>(mut self, extra: I) -> Self {
        self.dictionary.extend(extra);
        self
    }

    pub fn validate(&self) -> Result<(), SseError> {
        let mut seen = BTreeSet::new();
        for d in &self.documents {
            if !seen.insert(d.doc_id) {
                return Err(SseError::Param(format!("duplicate doc id {}", d.doc_id)));
            }
            if let Some(w) = d.keywords.iter().find(|w| !self.dictionary.contains(*w)) {
                return Err(SseError::Param(format!("keyword {w:?} of doc {} not in dictionary", d.doc_id)));
            }
        }
        Ok(())
    }

    /// Number of (keyword, document) pairs.
    pub fn pairs(&self) -> usize {
        self.documents.iter().map(|d| d.keywords.len()).sum()
    }

    /// Plaintext oracle: ids of documents containing `w`, ascending.
    pub fn matching(&self, w: &str) -> Vec<u64> {
        let mut ids: Vec<u64> = self
            .documents
            .iter()
            .filter(|d| d.keywords.contains(w))
            .map(|d| d.doc_id)
            .collect();
        ids.sort_unstable();
        ids
    }

    pub fn document(&self, doc_id: u64) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }
}

/// Loads every regular file in `dir` (sorted by name, ids from 1).
///
/// If `keywords.tsv` exists, each line is `doc TAB kw1,kw2,...` where `doc`
/// is a file name or a numeric id, and documents it lists take exactly those
/// keywords. Other documents are tokenized on whitespace.
pub fn load_corpus(dir: &Path) -> std::io::Result<Corpus> {
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != MANIFEST_FILE && !n.starts_with('.'))
        .collect();
    names.sort();

    let mut manifest: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let manifest_path = dir.join(MANIFEST_FILE);
    if manifest_path.exists() {
        for (n, line) in std::fs::read_to_string(&manifest_path)?.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (doc, kws) = line.split_once('\t').ok_or_else(|| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{MANIFEST_FILE}:{}: expected doc<TAB>keywords", n + 1),
                )
            })?;
            let kws = kws
                .split(',')
                .map(|k| k.trim().to_string())
                .filter(|k| !k.is_empty())
                .collect();
            manifest.insert(doc.trim().to_string(), kws);
        }
    }

    let mut documents = Vec::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        let doc_id = i as u64 + 1;
        let bytes = std::fs::read(dir.join(name))?;
        let keywords = manifest
            .get(name)
            .or_else(|| manifest.get(&doc_id.to_string()))
            .cloned()
            .unwrap_or_else(|| tokenize(&String::from_utf8_lossy(&bytes)));
        documents.push(Document {
            doc_id,
            plaintext: bytes,
            keywords,
        });
    }
    Ok(Corpus::new(documents))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_strips_punctuation_and_case() {
        let t: Vec<_> = tokenize("Hello, world! hello  w").into_iter().collect();
        assert_eq!(t, ["hello", "w", "world"]);
    }

    #[test]
    fn manifest_overrides_tokenizer() {
        let dir = std::env::temp_dir().join(format!("ssebc-corpus-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("a.txt"), "ab w").unwrap();
        std::fs::write(dir.join("b.txt"), "cd").unwrap();
        std::fs::write(dir.join(MANIFEST_FILE), "b.txt\tx, y\n").unwrap();
        let c = load_corpus(&dir).unwrap();
        std::fs::remove_dir_all(&dir).unwrap();
        assert_eq!(c.documents.len(), 2);
        assert_eq!(c.matching("w"), [1]);
        assert_eq!(c.matching("y"), [2]);
        assert!(c.matching("cd").is_empty());
        c.validate().unwrap();
    }

    #[test]
    fn duplicate_ids_rejected() {
        let c = Corpus::new(vec![Document::from_text(1, "a"), Document::from_text(1, "b")]);
        assert!(c.validate().is_err());
    }
}
