//! Seeded synthetic corpora with known class structure.
//!
//! Each class owns an orthonormal anchor direction. Topical words sit near
//! their class anchor, noise words are random, and every vector shares a
//! common background offset (contextual embedders are strongly anisotropic,
//! which is what makes a plain token average a poor class signal). Each token
//! also carries a small shift toward its document's class, standing in for
//! context.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{Document, EmbeddedCorpus, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::hierarchy::ClassTree;

const BASE_NAMES: &[&str] = &[
    "sports",
    "politics",
    "science",
    "arts",
    "business",
    "health",
    "travel",
    "music",
    "food",
    "law",
    "religion",
    "weather",
    "fashion",
    "education",
    "military",
    "energy",
];

const TOPICAL_PER_CLASS: usize = 20;
const NOISE_WORDS: usize = 400;
const MIN_DOC_LEN: usize = 30;
const MAX_DOC_LEN: usize = 60;

const BACKGROUND_SCALE: f64 = 0.8;
const CONTEXT_SHIFT: f64 = 0.1;
const TOKEN_NOISE: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: EmbeddedCorpus,
    pub gold_labels: Vec<usize>,
    pub class_names: Vec<String>,
    /// Unit anchor direction per class.
    pub anchors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SyntheticHierarchy {
    pub corpus: EmbeddedCorpus,
    /// Leaf index per document, leaves in `leaf_names` order.
    pub gold_leaf_labels: Vec<usize>,
    pub gold_coarse_labels: Vec<usize>,
    pub tree: ClassTree,
    pub coarse_names: Vec<String>,
    pub leaf_names: Vec<String>,
}

fn class_name(i: usize) -> String {
    BASE_NAMES
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("topic{i}"))
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    let s = scale / (dim as f64).sqrt();
    (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * s)
        .collect()
}

/// `count` orthonormal directions by Gram-Schmidt on Gaussian draws.
fn orthonormal(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = gaussian(rng, dim, 1.0);
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    basis
}

fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    out.iter_mut().zip(x).for_each(|(o, v)| *o += a * v);
}

struct Builder {
    rng: ChaCha8Rng,
    dim: usize,
    background: Vec<f64>,
    words: Vec<String>,
    bases: Vec<Vec<f64>>,
}

impl Builder {
    fn new(seed: u64, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut background = gaussian(&mut rng, dim, 1.0);
        let n = background.iter().map(|x| x * x).sum::<f64>().sqrt();
        background.iter_mut().for_each(|x| *x /= n);
        Self {
            rng,
            dim,
            background,
            words: Vec::new(),
            bases: Vec::new(),
        }
    }

    /// Adds a word whose base vector is `center + noise + background`.
    fn word(&mut self, name: String, center: &[f64], noise: f64) -> WordId {
        let mut v = gaussian(&mut self.rng, self.dim, noise);
        axpy(&mut v, 1.0, center);
        axpy(&mut v, BACKGROUND_SCALE, &self.background);
        self.words.push(name);
        self.bases.push(v);
        (self.words.len() - 1) as WordId
    }

    fn noise_words(&mut self) -> Vec<WordId> {
        let zero = vec![0.0; self.dim];
        (0..NOISE_WORDS)
            .map(|j| self.word(format!("common{j}"), &zero, 0.9))
            .collect()
    }

    fn token(&mut self, word: WordId, context: &[f64], out: &mut Vec<f32>) {
        let mut v = gaussian(&mut self.rng, self.dim, TOKEN_NOISE);
        axpy(&mut v, 1.0, &self.bases[word as usize]);
        axpy(&mut v, CONTEXT_SHIFT, context);
        out.extend(v.iter().map(|&x| x as f32));
    }

    fn doc_len(&mut self) -> usize {
        self.rng.random_range(MIN_DOC_LEN..=MAX_DOC_LEN)
    }

    fn finish(
        self,
        docs: Vec<Document>,
        labels: Vec<usize>,
        names: Vec<String>,
    ) -> Result<EmbeddedCorpus> {
        EmbeddedCorpus::new(
            self.dim,
            Vocabulary::new(self.words)?,
            docs,
            Some(labels),
            Some(names),
        )
    }
}

/// Flat synthetic corpus with `k` balanced classes (document `i` has class
/// `i mod k`).
pub fn generate_synthetic_corpus(
    k: usize,
    n: usize,
    dim: usize,
    seed: u64,
) -> Result<SyntheticCorpus> {
    if k < 2 || n < k || dim < k {
        return Err(Error::InvalidArgument(format!(
            "synthetic corpus needs k >= 2, n >= k, dim >= k (got k={k}, n={n}, dim={dim})"
        )));
    }
    let mut b = Builder::new(seed, dim);
    let anchors = orthonormal(&mut b.rng, k, dim);
    let names: Vec<String> = (0..k).map(class_name).collect();

    let mut name_ids = Vec::with_capacity(k);
    let mut topical = Vec::with_capacity(k);
    for c in 0..k {
        name_ids.push(b.word(names[c].clone(), &anchors[c], 0.15));
        let ids: Vec<WordId> = (0..TOPICAL_PER_CLASS)
            .map(|j| b.word(format!("{}_w{j}", names[c]), &anchors[c], 0.5))
            .collect();
        topical.push(ids);
    }
    let noise = b.noise_words();

    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let mut docs = Vec::with_capacity(n);
    for &c in &labels {
        let len = b.doc_len();
        let mut words = Vec::with_capacity(len);
        let mut vectors = Vec::with_capacity(len * dim);
        for _ in 0..len {
            let u: f64 = b.rng.random();
            let w = if u < 0.02 {
                name_ids[c]
            } else if u < 0.22 {
                *topical[c].choose(&mut b.rng).unwrap()
            } else if u < 0.24 {
                let other = (c + b.rng.random_range(1..k)) % k;
                *topical[other].choose(&mut b.rng).unwrap()
            } else {
                *noise.choose(&mut b.rng).unwrap()
            };
            b.token(w, &anchors[c], &mut vectors);
            words.push(w);
        }
        docs.push(Document::new(words, vectors, dim)?);
    }
    let corpus = b.finish(docs, labels.clone(), names.clone())?;
    Ok(SyntheticCorpus {
        corpus,
        gold_labels: labels,
        class_names: names,
        anchors,
    })
}

/// Two-level synthetic corpus: `coarse` top-level classes, each split into
/// `fine_per` leaves. Leaf anchors share their parent's direction.
pub fn generate_hierarchical_corpus(
    coarse: usize,
    fine_per: usize,
    n: usize,
    dim: usize,
    seed: u64,
) -> Result<SyntheticHierarchy> {
    let leaves = coarse * fine_per;
    if coarse < 2 || fine_per < 2 || n < leaves || dim < coarse + leaves {
        return Err(Error::InvalidArgument(format!(
            "hierarchical corpus needs coarse >= 2, fine_per >= 2, n >= leaves, \
             dim >= coarse + leaves (got {coarse}, {fine_per}, {n}, {dim})"
        )));
    }
    let mut b = Builder::new(seed, dim);
    let dirs = orthonormal(&mut b.rng, coarse + leaves, dim);
    let coarse_names: Vec<String> = (0..coarse).map(class_name).collect();
    let leaf_names: Vec<String> = (0..leaves)
        .map(|l| {
            format!(
                "{}{}",
                coarse_names[l / fine_per],
                ["a", "b", "c", "d", "e"]
                    .get(l % fine_per)
                    .copied()
                    .unwrap_or("x")
            )
        })
        .collect();

    let leaf_anchor = |l: usize| -> Vec<f64> {
        let mut v = dirs[l / fine_per].clone();
        axpy(&mut v, 0.8, &dirs[coarse + l]);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    };

    let mut coarse_name_ids = Vec::new();
    let mut coarse_topical = Vec::new();
    for c in 0..coarse {
        coarse_name_ids.push(b.word(coarse_names[c].clone(), &dirs[c], 0.15));
        let ids: Vec<WordId> = (0..TOPICAL_PER_CLASS)
            .map(|j| b.word(format!("{}_w{j}", coarse_names[c]), &dirs[c], 0.5))
            .collect();
        coarse_topical.push(ids);
    }
    let mut leaf_name_ids = Vec::new();
    let mut leaf_topical = Vec::new();
    for (l, name) in leaf_names.iter().enumerate() {
        let a = leaf_anchor(l);
        leaf_name_ids.push(b.word(name.clone(), &a, 0.15));
        let ids: Vec<WordId> = (0..TOPICAL_PER_CLASS)
            .map(|j| b.word(format!("{name}_w{j}"), &a, 0.5))
            .collect();
        leaf_topical.push(ids);
    }
    let noise = b.noise_words();

    let labels: Vec<usize> = (0..n).map(|i| i % leaves).collect();
    let mut docs = Vec::with_capacity(n);
    for &l in &labels {
        let c = l / fine_per;
        let context = leaf_anchor(l);
        let len = b.doc_len();
        let mut words = Vec::with_capacity(len);
        let mut vectors = Vec::with_capacity(len * dim);
        for _ in 0..len {
            let u: f64 = b.rng.random();
            let w = if u < 0.02 {
                leaf_name_ids[l]
            } else if u < 0.04 {
                coarse_name_ids[c]
            } else if u < 0.22 {
                *coarse_topical[c].choose(&mut b.rng).unwrap()
            } else if u < 0.44 {
                *leaf_topical[l].choose(&mut b.rng).unwrap()
            } else {
                *noise.choose(&mut b.rng).unwrap()
            };
            b.token(w, &context, &mut vectors);
            words.push(w);
        }
        docs.push(Document::new(words, vectors, dim)?);
    }

    let mut edges = String::new();
    for c in 0..coarse {
        edges.push_str(&format!("ROOT\t{}\n", coarse_names[c]));
        for f in 0..fine_per {
            edges.push_str(&format!(
                "{}\t{}\n",
                coarse_names[c],
                leaf_names[c * fine_per + f]
            ));
        }
    }
    let tree = ClassTree::parse(&edges)?;
    let corpus = b.finish(docs, labels.clone(), leaf_names.clone())?;
    Ok(SyntheticHierarchy {
        corpus,
        gold_coarse_labels: labels.iter().map(|l| l / fine_per).collect(),
        gold_leaf_labels: labels,
        tree,
        coarse_names,
        leaf_names,
    })
}
