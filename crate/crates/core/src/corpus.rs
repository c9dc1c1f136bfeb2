//! Embedded corpora, the on-disk exchange format, and static word
//! representations.
//!
//! A corpus is a list of documents, each a sequence of `(word-id, vector)`
//! tokens produced by an external contextual embedder. The exchange format is
//! a directory holding a `key=value` manifest, a vocabulary file, and a
//! little-endian binary token stream:
//!
//! ```text
//! per document: u32 m | m x u32 word ids | m x dim f32 values (row-major)
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub type WordId = u32;

/// Default manifest file name inside a corpus directory.
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Lowercase and strip surrounding punctuation. The embedder applies the same
/// rule when building the vocabulary; here it is only used for class names.
pub fn normalize_word(word: &str) -> String {
    word.trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, WordId>,
}

impl Vocabulary {
    pub fn new(words: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as WordId).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate vocabulary entry '{w}' at line {i}"
                )));
            }
        }
        Ok(Self { words, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, id: WordId) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// One embedded document: word ids plus their contextualized vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    words: Vec<WordId>,
    vectors: Vec<f32>,
    dim: usize,
}

impl Document {
    pub fn new(words: Vec<WordId>, vectors: Vec<f32>, dim: usize) -> Result<Self> {
        if words.len() * dim != vectors.len() {
            return Err(Error::Validation(format!(
                "document has {} tokens but {} values for dim {dim}",
                words.len(),
                vectors.len()
            )));
        }
        Ok(Self {
            words,
            vectors,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[WordId] {
        &self.words
    }

    pub fn vector(&self, position: usize) -> &[f32] {
        &self.vectors[position * self.dim..(position + 1) * self.dim]
    }

    pub fn tokens(&self) -> impl Iterator<Item = (WordId, &[f32])> + '_ {
        self.words
            .iter()
            .copied()
            .zip(self.vectors.chunks_exact(self.dim.max(1)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedCorpus {
    dim: usize,
    vocab: Vocabulary,
    docs: Vec<Document>,
    gold_labels: Option<Vec<usize>>,
    class_names: Option<Vec<String>>,
}

impl EmbeddedCorpus {
    /// Builds a corpus and checks every structural invariant.
    pub fn new(
        dim: usize,
        vocab: Vocabulary,
        docs: Vec<Document>,
        gold_labels: Option<Vec<usize>>,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let corpus = Self {
            dim,
            vocab,
            docs,
            gold_labels,
            class_names,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Validation("dim must be positive".into()));
        }
        let v = self.vocab.len();
        for (i, doc) in self.docs.iter().enumerate() {
            if doc.is_empty() {
                return Err(Error::Validation(format!("document {i} is empty")));
            }
            if doc.dim != self.dim {
                return Err(Error::Validation(format!(
                    "document {i} has dim {} but corpus dim is {}",
                    doc.dim, self.dim
                )));
            }
            if let Some(w) = doc.words.iter().find(|&&w| w as usize >= v) {
                return Err(Error::Validation(format!(
                    "document {i} references word id {w} outside vocabulary of size {v}"
                )));
            }
            if doc.vectors.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!(
                    "document {i} contains a non-finite value"
                )));
            }
        }
        if let Some(labels) = &self.gold_labels {
            if labels.len() != self.docs.len() {
                return Err(Error::Validation(format!(
                    "{} gold labels for {} documents",
                    labels.len(),
                    self.docs.len()
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.docs.iter().map(Document::len).sum()
    }

    pub fn gold_labels(&self) -> Option<&[usize]> {
        self.gold_labels.as_deref()
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn set_class_names(&mut self, names: Option<Vec<String>>) {
        self.class_names = names;
    }

    /// Corpus restricted to `indices`, in that order, sharing the vocabulary.
    pub fn subset(&self, indices: &[usize]) -> EmbeddedCorpus {
        EmbeddedCorpus {
            dim: self.dim,
            vocab: self.vocab.clone(),
            docs: indices.iter().map(|&i| self.docs[i].clone()).collect(),
            gold_labels: self
                .gold_labels
                .as_ref()
                .map(|g| indices.iter().map(|&i| g[i]).collect()),
            class_names: self.class_names.clone(),
        }
    }
}

struct Manifest {
    dim: usize,
    num_docs: usize,
    vocab: PathBuf,
    tokens: PathBuf,
    labels: Option<PathBuf>,
    class_names: Option<PathBuf>,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = read_file(path)?;
    String::from_utf8(bytes)
        .map_err(|e| Error::format(path, e.utf8_error().valid_up_to() as u64, "invalid UTF-8"))
}

fn parse_manifest(path: &Path, text: &str) -> Result<Manifest> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut fields: HashMap<&str, (&str, u64)> = HashMap::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let line_offset = offset;
        offset += line.len() as u64;
        let trimmed = line.trim_end_matches(['\n', '\r']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(Error::format(path, line_offset, "expected key=value"));
        };
        let key = key.trim();
        match key {
            "version" | "dim" | "num_docs" | "vocab" | "tokens" | "labels" | "class_names" => {}
            other => {
                return Err(Error::format(
                    path,
                    line_offset,
                    format!("unknown manifest key '{other}'"),
                ))
            }
        }
        if fields.insert(key, (value.trim(), line_offset)).is_some() {
            return Err(Error::format(
                path,
                line_offset,
                format!("duplicate key '{key}'"),
            ));
        }
    }
    let end = offset;
    let required = |key: &str| -> Result<(&str, u64)> {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| Error::format(path, end, format!("missing required key '{key}'")))
    };
    let parse_num = |key: &str| -> Result<usize> {
        let (v, off) = required(key)?;
        v.parse::<usize>()
            .map_err(|_| Error::format(path, off, format!("'{key}' is not a non-negative integer")))
    };

    let version = parse_num("version")?;
    if version != 1 {
        let off = fields["version"].1;
        return Err(Error::format(
            path,
            off,
            format!("unsupported version {version}"),
        ));
    }
    let dim = parse_num("dim")?;
    if dim == 0 {
        return Err(Error::format(path, fields["dim"].1, "dim must be positive"));
    }
    let num_docs = parse_num("num_docs")?;
    let rel = |key: &str| fields.get(key).map(|(v, _)| base.join(v));
    Ok(Manifest {
        dim,
        num_docs,
        vocab: base.join(required("vocab")?.0),
        tokens: base.join(required("tokens")?.0),
        labels: rel("labels"),
        class_names: rel("class_names"),
    })
}

fn lines(text: &str) -> Vec<String> {
    text.lines().map(str::to_owned).collect()
}

/// Loads a corpus from a manifest file, or from a directory containing
/// `manifest.txt`.
pub fn load_embedded_corpus(path: impl AsRef<Path>) -> Result<EmbeddedCorpus> {
    let path = path.as_ref();
    let manifest_path = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let manifest = parse_manifest(&manifest_path, &read_text(&manifest_path)?)?;

    let vocab = Vocabulary::new(lines(&read_text(&manifest.vocab)?))?;
    let docs = read_tokens(&manifest.tokens, manifest.dim, manifest.num_docs)?;

    let gold_labels = match &manifest.labels {
        Some(p) => {
            let text = read_text(p)?;
            let mut labels = Vec::new();
            let mut offset = 0u64;
            for line in text.split_inclusive('\n') {
                let t = line.trim();
                if !t.is_empty() {
                    labels.push(
                        t.parse::<usize>()
                            .map_err(|_| Error::format(p, offset, "label is not an integer"))?,
                    );
                }
                offset += line.len() as u64;
            }
            Some(labels)
        }
        None => None,
    };
    let class_names = match &manifest.class_names {
        Some(p) => Some(lines(&read_text(p)?)),
        None => None,
    };
    EmbeddedCorpus::new(manifest.dim, vocab, docs, gold_labels, class_names)
}

fn read_tokens(path: &Path, dim: usize, num_docs: usize) -> Result<Vec<Document>> {
    let bytes = read_file(path)?;
    let mut pos = 0usize;
    let mut docs = Vec::with_capacity(num_docs);
    let read_u32 = |pos: usize| u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());

    for i in 0..num_docs {
        if pos + 4 > bytes.len() {
            return Err(Error::format(
                path,
                pos as u64,
                format!("truncated token stream: document {i} header missing"),
            ));
        }
        let m = read_u32(pos) as usize;
        pos += 4;
        let needed = m * 4 + m * dim * 4;
        if pos + needed > bytes.len() {
            return Err(Error::Validation(format!(
                "dimension mismatch in document {i}: {m} tokens of dim {dim} need {needed} bytes, \
                 {} remain",
                bytes.len() - pos
            )));
        }
        let words: Vec<WordId> = (0..m).map(|j| read_u32(pos + 4 * j)).collect();
        pos += m * 4;
        let vectors: Vec<f32> = bytes[pos..pos + m * dim * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        pos += m * dim * 4;
        if let Some(j) = vectors.iter().position(|x| !x.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value in document {i}, token {}",
                j / dim
            )));
        }
        docs.push(Document::new(words, vectors, dim)?);
    }
    if pos != bytes.len() {
        return Err(Error::Validation(format!(
            "dimension mismatch: {} trailing bytes after {num_docs} documents of dim {dim}",
            bytes.len() - pos
        )));
    }
    Ok(docs)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn join_lines<S: AsRef<str>>(items: &[S]) -> String {
    let mut out = String::new();
    for s in items {
        out.push_str(s.as_ref());
        out.push('\n');
    }
    out
}

/// Writes a corpus directory in the exchange format. Output is canonical, so
/// loading and writing again reproduces the same bytes.
pub fn write_embedded_corpus(corpus: &EmbeddedCorpus, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut manifest = format!(
        "version=1\ndim={}\nnum_docs={}\nvocab=vocab.txt\ntokens=tokens.bin\n",
        corpus.dim,
        corpus.docs.len()
    );
    write_file(
        &dir.join("vocab.txt"),
        join_lines(corpus.vocab.words()).as_bytes(),
    )?;

    let mut bytes =
        Vec::with_capacity(corpus.num_tokens() * (4 + 4 * corpus.dim) + 4 * corpus.len());
    for doc in &corpus.docs {
        bytes.extend_from_slice(&(doc.len() as u32).to_le_bytes());
        for w in &doc.words {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        for x in &doc.vectors {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    write_file(&dir.join("tokens.bin"), &bytes)?;

    if let Some(labels) = &corpus.gold_labels {
        manifest.push_str("labels=labels.txt\n");
        let lines: Vec<String> = labels.iter().map(usize::to_string).collect();
        write_file(&dir.join("labels.txt"), join_lines(&lines).as_bytes())?;
    }
    if let Some(names) = &corpus.class_names {
        manifest.push_str("class_names=class_names.txt\n");
        write_file(&dir.join("class_names.txt"), join_lines(names).as_bytes())?;
    }
    write_file(&dir.join(MANIFEST_FILE), manifest.as_bytes())
}

/// Per-word mean of contextualized vectors over all occurrences.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticRepTable {
    dim: usize,
    reps: Vec<f64>,
    norms: Vec<f64>,
    counts: Vec<u64>,
}

impl StaticRepTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Size of the id space (the vocabulary), not the number of present words.
    pub fn id_space(&self) -> usize {
        self.counts.len()
    }

    pub fn rep(&self, word: WordId) -> Option<&[f64]> {
        let w = word as usize;
        if w < self.counts.len() && self.counts[w] > 0 {
            Some(&self.reps[w * self.dim..(w + 1) * self.dim])
        } else {
            None
        }
    }

    pub(crate) fn norm(&self, word: WordId) -> f64 {
        self.norms[word as usize]
    }

    pub fn count(&self, word: WordId) -> u64 {
        self.counts.get(word as usize).copied().unwrap_or(0)
    }

    /// Ids with an entry, ascending.
    pub fn present_words(&self) -> impl Iterator<Item = WordId> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(w, _)| w as WordId)
    }

    pub fn len(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Builds a table directly from `(word, vector, count)` entries.
    pub fn from_entries(
        dim: usize,
        id_space: usize,
        entries: &[(WordId, Vec<f64>, u64)],
    ) -> Result<Self> {
        let mut reps = vec![0.0; id_space * dim];
        let mut counts = vec![0u64; id_space];
        for (w, v, c) in entries {
            let w = *w as usize;
            if w >= id_space || v.len() != dim || *c == 0 {
                return Err(Error::InvalidArgument(format!(
                    "bad static rep entry for word {w}"
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!(
                    "non-finite static rep for word {w}"
                )));
            }
            reps[w * dim..(w + 1) * dim].copy_from_slice(v);
            counts[w] = *c;
        }
        Ok(Self::finish(dim, reps, counts))
    }

    fn finish(dim: usize, reps: Vec<f64>, counts: Vec<u64>) -> Self {
        let norms = reps
            .chunks_exact(dim)
            .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        Self {
            dim,
            reps,
            norms,
            counts,
        }
    }

    /// A copy with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let reps = self.reps.iter().map(|x| x * factor).collect();
        Self::finish(self.dim, reps, self.counts.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StaticRepOptions {
    /// Drop words that occur exactly once.
    pub drop_singletons: bool,
}

pub fn compute_static_representations(corpus: &EmbeddedCorpus) -> StaticRepTable {
    compute_static_representations_with(corpus, StaticRepOptions::default())
}

pub fn compute_static_representations_with(
    corpus: &EmbeddedCorpus,
    options: StaticRepOptions,
) -> StaticRepTable {
    let dim = corpus.dim;
    let v = corpus.vocab.len();
    let mut sums = vec![0.0f64; v * dim];
    let mut counts = vec![0u64; v];
    // Sequential on purpose: the sums must not depend on the thread count.
    for doc in &corpus.docs {
        for (w, t) in doc.tokens() {
            let w = w as usize;
            counts[w] += 1;
            for (s, &x) in sums[w * dim..(w + 1) * dim].iter_mut().zip(t) {
                *s += f64::from(x);
            }
        }
    }
    for w in 0..v {
        if options.drop_singletons && counts[w] == 1 {
            counts[w] = 0;
            sums[w * dim..(w + 1) * dim].fill(0.0);
        } else if counts[w] > 0 {
            let inv = 1.0 / counts[w] as f64;
            sums[w * dim..(w + 1) * dim]
                .iter_mut()
                .for_each(|s| *s *= inv);
        }
    }
    StaticRepTable::finish(dim, sums, counts)
}
