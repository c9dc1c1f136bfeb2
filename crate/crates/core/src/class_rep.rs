//! Class representations from iterative keyword expansion.
//!
//! A class starts from its name. Each step ranks candidate words by cosine
//! similarity to the current Zipf-weighted keyword average, tentatively adds
//! the best one, and keeps it only if the updated representation still has
//! exactly the keyword set as its nearest neighbours.

use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;

use crate::corpus::{normalize_word, StaticRepTable, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::vector::{cosine_with_norm, norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpansionConfig {
    /// Maximum keyword list length, the class name included.
    pub max_keywords: usize,
    /// Words seen fewer times than this never become keywords.
    pub min_count: u64,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            max_keywords: 100,
            min_count: 5,
        }
    }
}

/// A class as given by the user: an id and its (possibly multi-word) name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassName {
    pub class_id: usize,
    pub name: String,
    pub name_tokens: Vec<WordId>,
}

impl ClassName {
    /// Resolves name words against the vocabulary; unknown words are dropped.
    pub fn resolve(class_id: usize, name: &str, vocab: &Vocabulary) -> Self {
        let name_tokens = name
            .split_whitespace()
            .map(normalize_word)
            .filter_map(|w| vocab.id(&w))
            .collect();
        Self {
            class_id,
            name: name.to_string(),
            name_tokens,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Keyword {
    /// The class name itself; always first.
    ClassName,
    Word(WordId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    pub class_id: usize,
    pub name: String,
    pub name_tokens: Vec<WordId>,
    pub keywords: Vec<Keyword>,
    pub representation: Vec<f64>,
}

impl ClassModel {
    /// Keyword list as text: the class name followed by expanded words.
    pub fn keyword_strings(&self, vocab: &Vocabulary) -> Vec<String> {
        self.keywords
            .iter()
            .map(|k| match k {
                Keyword::ClassName => self.name.clone(),
                Keyword::Word(w) => vocab.word(*w).unwrap_or("<unknown>").to_string(),
            })
            .collect()
    }
}

/// Static representation of a class name; multi-word names average their
/// constituent words.
pub fn class_anchor(class: &ClassName, table: &StaticRepTable) -> Result<Vec<f64>> {
    let reps: Vec<&[f64]> = class
        .name_tokens
        .iter()
        .filter_map(|&w| table.rep(w))
        .collect();
    if reps.is_empty() {
        return Err(Error::MissingClassName(class.name.clone()));
    }
    Ok(crate::vector::mean_of(reps, table.dim()))
}

/// Weighted mean of `vectors` with weight `1/i` on the i-th (1-based) entry.
pub fn zipf_weighted_mean(vectors: &[&[f64]]) -> Result<Vec<f64>> {
    let Some(first) = vectors.first() else {
        return Err(Error::InvalidArgument("empty keyword list".into()));
    };
    let mut acc = vec![0.0; first.len()];
    let mut total = 0.0;
    for (i, v) in vectors.iter().enumerate() {
        let w = 1.0 / (i + 1) as f64;
        total += w;
        acc.iter_mut().zip(v.iter()).for_each(|(a, x)| *a += w * x);
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(acc)
}

pub fn class_representation(keywords: &[WordId], table: &StaticRepTable) -> Result<Vec<f64>> {
    let reps = keywords
        .iter()
        .map(|&w| {
            table.rep(w).ok_or_else(|| {
                Error::InvalidArgument(format!("keyword {w} has no static representation"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    zipf_weighted_mean(&reps)
}

/// All words in `table` by descending cosine to `rep`, ties by ascending id.
pub fn rank_words_by_similarity(rep: &[f64], table: &StaticRepTable) -> Result<Vec<WordId>> {
    let rep_norm = norm(rep);
    if rep_norm == 0.0 || !rep_norm.is_finite() {
        return Err(Error::InvalidArgument(
            "cannot rank against a zero vector".into(),
        ));
    }
    let mut scored: Vec<(WordId, f64)> = table
        .present_words()
        .map(|w| {
            let s = cosine_with_norm(table.rep(w).unwrap(), table.norm(w), rep, rep_norm)
                .unwrap_or(-1.0);
            (w, s)
        })
        .collect();
    scored.sort_by(|a, b| by_score_desc(a.1, b.1).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().map(|(w, _)| w).collect())
}

fn by_score_desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Candidate pool entry. Index 0 is always the class-name anchor.
struct Item<'a> {
    keyword: Keyword,
    vector: &'a [f64],
    norm: f64,
}

/// Expands a class's keyword list from its name.
pub fn expand_class_keywords(
    class: &ClassName,
    table: &StaticRepTable,
    config: &ExpansionConfig,
) -> Result<ClassModel> {
    let anchor = class_anchor(class, table)?;
    expand_from_anchor(class, &anchor, table, config)
}

/// Expansion with an explicitly supplied anchor vector.
pub fn expand_from_anchor(
    class: &ClassName,
    anchor: &[f64],
    table: &StaticRepTable,
    config: &ExpansionConfig,
) -> Result<ClassModel> {
    expand_observed(class, anchor, table, config, |_, _| {})
}

/// Expansion that reports every committed keyword list and its representation
/// to `on_commit`.
pub fn expand_observed<F>(
    class: &ClassName,
    anchor: &[f64],
    table: &StaticRepTable,
    config: &ExpansionConfig,
    mut on_commit: F,
) -> Result<ClassModel>
where
    F: FnMut(&[Keyword], &[f64]),
{
    if config.max_keywords == 0 {
        return Err(Error::InvalidArgument(
            "max keywords must be at least 1".into(),
        ));
    }
    let anchor_norm = norm(anchor);
    if anchor_norm == 0.0 || !anchor_norm.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "class '{}' has a zero or non-finite anchor",
            class.name
        )));
    }

    let name_set: HashSet<WordId> = class.name_tokens.iter().copied().collect();
    let mut items = vec![Item {
        keyword: Keyword::ClassName,
        vector: anchor,
        norm: anchor_norm,
    }];
    items.extend(
        table
            .present_words()
            .filter(|w| table.count(*w) >= config.min_count && !name_set.contains(w))
            .map(|w| Item {
                keyword: Keyword::Word(w),
                vector: table.rep(w).unwrap(),
                norm: table.norm(w),
            }),
    );

    let mut in_list = vec![false; items.len()];
    in_list[0] = true;
    let mut list: Vec<usize> = vec![0];
    let mut rep = anchor.to_vec();
    on_commit(&[Keyword::ClassName], &rep);
    let mut scores = score_items(&items, &rep)?;

    while list.len() < config.max_keywords {
        // Best item outside the list; the item order breaks ties.
        let candidate = (0..items.len())
            .filter(|&i| !in_list[i])
            .min_by(|&a, &b| by_score_desc(scores[a], scores[b]).then(a.cmp(&b)));
        let Some(candidate) = candidate else { break };

        list.push(candidate);
        let vectors: Vec<&[f64]> = list.iter().map(|&i| items[i].vector).collect();
        let next_rep = zipf_weighted_mean(&vectors)?;
        let next_scores = score_items(&items, &next_rep)?;
        in_list[candidate] = true;

        if !list_is_top_set(&next_scores, &in_list) {
            in_list[candidate] = false;
            list.pop();
            break;
        }
        rep = next_rep;
        scores = next_scores;
        let keywords: Vec<Keyword> = list.iter().map(|&i| items[i].keyword).collect();
        on_commit(&keywords, &rep);
    }

    Ok(ClassModel {
        class_id: class.class_id,
        name: class.name.clone(),
        name_tokens: class.name_tokens.clone(),
        keywords: list.iter().map(|&i| items[i].keyword).collect(),
        representation: rep,
    })
}

fn score_items(items: &[Item<'_>], rep: &[f64]) -> Result<Vec<f64>> {
    let rep_norm = norm(rep);
    if rep_norm == 0.0 || !rep_norm.is_finite() {
        return Err(Error::Numeric(
            "class representation collapsed to zero".into(),
        ));
    }
    Ok(items
        .iter()
        .map(|it| cosine_with_norm(it.vector, it.norm, rep, rep_norm).unwrap_or(-1.0))
        .collect())
}

/// True when the members are exactly the top-|members| items under
/// (score desc, index asc): the weakest member must precede the strongest
/// non-member.
fn list_is_top_set(scores: &[f64], member: &[bool]) -> bool {
    let order = |a: usize, b: usize| by_score_desc(scores[a], scores[b]).then(a.cmp(&b));
    let weakest_member = (0..scores.len())
        .filter(|&i| member[i])
        .max_by(|&a, &b| order(a, b));
    let strongest_outside = (0..scores.len())
        .filter(|&i| !member[i])
        .min_by(|&a, &b| order(a, b));
    match (weakest_member, strongest_outside) {
        (Some(m), Some(o)) => order(m, o) == Ordering::Less,
        _ => true,
    }
}

/// Expands every class independently.
pub fn build_class_models(
    classes: &[ClassName],
    table: &StaticRepTable,
    config: &ExpansionConfig,
) -> Result<Vec<ClassModel>> {
    classes
        .par_iter()
        .map(|c| expand_class_keywords(c, table, config))
        .collect()
}

/// One line per class: `name<TAB>kw1,kw2,...`.
pub fn format_keyword_lists(models: &[ClassModel], vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for m in models {
        out.push_str(&m.name);
        out.push('\t');
        out.push_str(&m.keyword_strings(vocab).join(","));
        out.push('\n');
    }
    out
}
