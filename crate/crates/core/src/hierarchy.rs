//! Hierarchical classification over a class tree.
//!
//! `classify_hier` classifies among the root's children, splits the corpus by
//! the predicted child, and recurses with a fresh pipeline inside each part.
//! `classify_end` runs one flat pipeline over the leaves.

use std::collections::HashMap;

use log::warn;
use rayon::prelude::*;

use crate::corpus::{compute_static_representations_with, EmbeddedCorpus, StaticRepTable};
use crate::error::{Error, Result};
use crate::pipeline::{classify, FlatOptions, PipelineConfig};

pub const ROOT: &str = "ROOT";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTree {
    names: Vec<String>,
    children: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
}

impl ClassTree {
    /// Parses `parent<TAB>child` lines; the root is named `ROOT`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut names = vec![ROOT.to_string()];
        let mut index: HashMap<String, usize> = HashMap::from([(ROOT.to_string(), 0)]);
        let mut children: Vec<Vec<usize>> = vec![Vec::new()];
        let mut parent: Vec<Option<usize>> = vec![None];

        let mut intern = |name: &str,
                          names: &mut Vec<String>,
                          children: &mut Vec<Vec<usize>>,
                          parent: &mut Vec<Option<usize>>| {
            *index.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                children.push(Vec::new());
                parent.push(None);
                names.len() - 1
            })
        };

        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let Some((p, c)) = line.split_once('\t') else {
                return Err(Error::Validation(format!(
                    "tree line {} is not parent<TAB>child",
                    lineno + 1
                )));
            };
            let (p, c) = (p.trim(), c.trim());
            if c == ROOT {
                return Err(Error::Validation(format!(
                    "line {}: ROOT cannot be a child",
                    lineno + 1
                )));
            }
            let pi = intern(p, &mut names, &mut children, &mut parent);
            let ci = intern(c, &mut names, &mut children, &mut parent);
            if parent[ci].is_some() {
                return Err(Error::Validation(format!(
                    "class '{c}' has more than one parent"
                )));
            }
            parent[ci] = Some(pi);
            children[pi].push(ci);
        }

        let tree = Self {
            names,
            children,
            parent,
        };
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        // Everything must hang off ROOT; a node not reachable from it sits on a cycle
        // or in a detached component.
        let mut seen = vec![false; self.names.len()];
        let mut stack = vec![0];
        while let Some(n) = stack.pop() {
            seen[n] = true;
            stack.extend(&self.children[n]);
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::Validation(format!(
                "class '{}' is not reachable from ROOT",
                self.names[orphan]
            )));
        }
        for (n, kids) in self.children.iter().enumerate() {
            if kids.len() == 1 {
                return Err(Error::Validation(format!(
                    "internal class '{}' has a single child",
                    self.names[n]
                )));
            }
        }
        if self.children[0].is_empty() {
            return Err(Error::Validation("tree has no classes".into()));
        }
        Ok(())
    }

    pub fn name(&self, node: usize) -> &str {
        &self.names[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.children[node].is_empty()
    }

    /// Leaf nodes in depth-first, file order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(n) = stack.pop() {
            if self.is_leaf(n) && n != 0 {
                out.push(n);
            }
            stack.extend(self.children[n].iter().rev());
        }
        out
    }

    pub fn leaf_names(&self) -> Vec<String> {
        self.leaves()
            .into_iter()
            .map(|n| self.names[n].clone())
            .collect()
    }

    pub fn is_ancestor(&self, ancestor: usize, mut node: usize) -> bool {
        while let Some(p) = self.parent[node] {
            if p == ancestor {
                return true;
            }
            node = p;
        }
        false
    }

    /// `parent<TAB>child` lines that parse back to the same tree.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![0];
        while let Some(n) = stack.pop() {
            for &c in &self.children[n] {
                out.push_str(&format!("{}\t{}\n", self.names[n], self.names[c]));
            }
            stack.extend(self.children[n].iter().rev());
        }
        out
    }

    pub fn depth(&self) -> usize {
        fn go(t: &ClassTree, n: usize) -> usize {
            t.children[n]
                .iter()
                .map(|&c| 1 + go(t, c))
                .max()
                .unwrap_or(0)
        }
        go(self, 0)
    }
}

/// Per-document leaf labels as indices into `tree.leaves()`, plus the node
/// chosen at every level (root child first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierLabels {
    pub leaf_labels: Vec<usize>,
    pub paths: Vec<Vec<usize>>,
}

fn lenient() -> FlatOptions {
    FlatOptions {
        lenient_training: true,
    }
}

/// One flat pipeline over all leaf names.
pub fn classify_end(
    corpus: &EmbeddedCorpus,
    tree: &ClassTree,
    config: &PipelineConfig,
) -> Result<HierLabels> {
    let leaves = tree.leaves();
    let names: Vec<String> = leaves.iter().map(|&n| tree.names[n].clone()).collect();
    let out = classify(corpus, &names, config, lenient(), None)?;
    Ok(HierLabels {
        paths: out
            .labels
            .iter()
            .map(|&l| path_to(tree, leaves[l]))
            .collect(),
        leaf_labels: out.labels,
    })
}

fn path_to(tree: &ClassTree, mut node: usize) -> Vec<usize> {
    let mut path = vec![node];
    while let Some(p) = tree.parent[node] {
        if p == 0 {
            break;
        }
        path.push(p);
        node = p;
    }
    path.reverse();
    path
}

/// Top-down classification, one fresh pipeline per internal node.
pub fn classify_hier(
    corpus: &EmbeddedCorpus,
    tree: &ClassTree,
    config: &PipelineConfig,
) -> Result<HierLabels> {
    let global = compute_static_representations_with(corpus, config.static_reps);
    let all: Vec<usize> = (0..corpus.len()).collect();
    let mut leaf_node = vec![usize::MAX; corpus.len()];
    let mut paths = vec![Vec::new(); corpus.len()];
    descend(
        corpus,
        tree,
        0,
        &all,
        config,
        &global,
        &mut leaf_node,
        &mut paths,
    )?;

    let leaf_index: HashMap<usize, usize> = tree
        .leaves()
        .into_iter()
        .enumerate()
        .map(|(i, n)| (n, i))
        .collect();
    Ok(HierLabels {
        leaf_labels: leaf_node.iter().map(|n| leaf_index[n]).collect(),
        paths,
    })
}

/// Document, its leaf, and the path below the current node.
type Placement = (usize, usize, Vec<usize>);

#[allow(clippy::too_many_arguments)]
fn descend(
    corpus: &EmbeddedCorpus,
    tree: &ClassTree,
    node: usize,
    docs: &[usize],
    config: &PipelineConfig,
    global: &StaticRepTable,
    leaf_node: &mut [usize],
    paths: &mut [Vec<usize>],
) -> Result<()> {
    if tree.is_leaf(node) {
        for &d in docs {
            leaf_node[d] = node;
        }
        return Ok(());
    }
    let kids = tree.children(node);
    let names: Vec<String> = kids.iter().map(|&c| tree.names[c].clone()).collect();
    let labels = if node == 0 && docs.len() == corpus.len() {
        classify(corpus, &names, config, lenient(), None)?.labels
    } else {
        if docs.len() < kids.len() {
            warn!(
                "partition under '{}' has {} documents for {} classes",
                tree.names[node],
                docs.len(),
                kids.len()
            );
        }
        let sub = corpus.subset(docs);
        classify(&sub, &names, config, lenient(), Some(global))?.labels
    };

    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); kids.len()];
    for (i, &d) in docs.iter().enumerate() {
        parts[labels[i]].push(d);
        paths[d].push(kids[labels[i]]);
    }

    // Sibling subtrees are independent.
    let results: Vec<Result<Vec<Placement>>> = kids
        .par_iter()
        .zip(parts.par_iter())
        .map(|(&child, part)| {
            if part.is_empty() {
                return Ok(Vec::new());
            }
            let mut local_leaf = vec![usize::MAX; corpus.len()];
            let mut local_paths = vec![Vec::new(); corpus.len()];
            descend(
                corpus,
                tree,
                child,
                part,
                config,
                global,
                &mut local_leaf,
                &mut local_paths,
            )?;
            Ok(part
                .iter()
                .map(|&d| (d, local_leaf[d], std::mem::take(&mut local_paths[d])))
                .collect())
        })
        .collect();
    for r in results {
        for (d, leaf, tail) in r? {
            leaf_node[d] = leaf;
            paths[d].extend(tail);
        }
    }
    Ok(())
}
