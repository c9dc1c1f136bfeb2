//! End-to-end flat classification, split into the stages the CLI exposes:
//! representation, alignment, selection and classifier training.

use log::warn;
use nalgebra::DMatrix;

use crate::alignment::{
    gmm_align, kmeans_align, prior_confidence, prior_labels, AlignmentResult, ClusterMethod,
    GmmConfig, GmmFit, Pca, PriorLabels,
};
use crate::class_rep::{class_anchor, expand_from_anchor, ClassModel, ClassName, ExpansionConfig};
use crate::classifier::{train_classifier, ClassifierConfig, LinearClassifier};
use crate::corpus::{
    compute_static_representations_with, EmbeddedCorpus, StaticRepOptions, StaticRepTable,
};
use crate::doc_rep::{represent_documents, AttentionMode, ClassReps, DocumentReps};
use crate::error::{Error, Result};
use crate::selection::{select_confident, PseudoLabelSet, SelectionMode};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub expansion: ExpansionConfig,
    pub static_reps: StaticRepOptions,
    pub attention: AttentionMode,
    /// Target PCA dimension; 0 disables the reduction.
    pub pca_dim: usize,
    pub cluster_method: ClusterMethod,
    pub gmm: GmmConfig,
    pub kmeans_iters: usize,
    pub delta: f64,
    pub selection: SelectionMode,
    pub classifier: ClassifierConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            expansion: ExpansionConfig::default(),
            static_reps: StaticRepOptions::default(),
            attention: AttentionMode::Mixture,
            pca_dim: 64,
            cluster_method: ClusterMethod::Gmm,
            gmm: GmmConfig::default(),
            kmeans_iters: 100,
            delta: 0.5,
            selection: SelectionMode::PerClass,
            classifier: ClassifierConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Representation {
    pub class_models: Vec<ClassModel>,
    pub doc_reps: DocumentReps,
}

impl Representation {
    pub fn class_reps(&self) -> Vec<Vec<f64>> {
        self.class_models
            .iter()
            .map(|m| m.representation.clone())
            .collect()
    }
}

fn round_to_f32(v: f64) -> f64 {
    f64::from(v as f32)
}

/// Keyword expansion for every class, then class-oriented document vectors.
///
/// `anchor_fallback` supplies class-name anchors for names missing from
/// `table`, e.g. the corpus-wide table when `table` covers only a partition.
/// Outputs are rounded to binary32, the precision of the on-disk artifacts,
/// so staged and in-memory runs see identical values.
pub fn represent(
    corpus: &EmbeddedCorpus,
    table: &StaticRepTable,
    class_names: &[String],
    config: &PipelineConfig,
    anchor_fallback: Option<&StaticRepTable>,
) -> Result<Representation> {
    use rayon::prelude::*;

    let classes: Vec<ClassName> = class_names
        .iter()
        .enumerate()
        .map(|(i, n)| ClassName::resolve(i, n, corpus.vocab()))
        .collect();
    let mut class_models: Vec<ClassModel> = classes
        .par_iter()
        .map(|c| {
            let anchor = match class_anchor(c, table) {
                Ok(a) => a,
                Err(Error::MissingClassName(name)) => match anchor_fallback {
                    Some(global) => {
                        warn!("class '{name}' missing from partition statistics; using corpus-wide anchor");
                        class_anchor(c, global)?
                    }
                    None => return Err(Error::MissingClassName(name)),
                },
                Err(e) => return Err(e),
            };
            expand_from_anchor(c, &anchor, table, &config.expansion)
        })
        .collect::<Result<_>>()?;
    for m in &mut class_models {
        m.representation
            .iter_mut()
            .for_each(|v| *v = round_to_f32(*v));
    }

    let class_reps = ClassReps::new(
        class_models
            .iter()
            .map(|m| m.representation.clone())
            .collect(),
    )?;
    let mut doc_reps = represent_documents(corpus, table, &class_reps, config.attention)?;
    doc_reps
        .matrix
        .iter_mut()
        .for_each(|v| *v = round_to_f32(*v));
    Ok(Representation {
        class_models,
        doc_reps,
    })
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub prior: PriorLabels,
    /// Cosine of each document to its prior class.
    pub prior_confidence: Vec<f64>,
    pub result: AlignmentResult,
    pub pca: Option<Pca>,
    pub gmm: Option<GmmFit>,
}

/// Prior labels, optional PCA, then clustering seeded by the prior.
pub fn align(
    doc_reps: &DMatrix<f64>,
    class_reps: &[Vec<f64>],
    config: &PipelineConfig,
) -> Result<Alignment> {
    let k = class_reps.len();
    let prior = prior_labels(doc_reps, class_reps)?;
    let prior_conf = prior_confidence(doc_reps, class_reps, &prior);

    if config.cluster_method == ClusterMethod::None {
        let result = AlignmentResult::hard(&prior.labels, k, prior_conf.clone());
        return Ok(Alignment {
            prior,
            prior_confidence: prior_conf,
            result,
            pca: None,
            gmm: None,
        });
    }

    let class_matrix = DMatrix::from_fn(k, doc_reps.ncols(), |i, j| class_reps[i][j]);
    let (data, fallback, pca) = if config.pca_dim == 0 {
        (doc_reps.clone(), class_matrix, None)
    } else {
        let pca = Pca::fit(doc_reps, config.pca_dim)?;
        (
            pca.transform(doc_reps),
            pca.transform(&class_matrix),
            Some(pca),
        )
    };

    let (result, gmm) = match config.cluster_method {
        ClusterMethod::Gmm => {
            let fit = gmm_align(&data, &prior, Some(&fallback), &config.gmm)?;
            (fit.result.clone(), Some(fit))
        }
        ClusterMethod::KMeans => (
            kmeans_align(&data, &prior, Some(&fallback), config.kmeans_iters)?,
            None,
        ),
        ClusterMethod::None => unreachable!(),
    };
    Ok(Alignment {
        prior,
        prior_confidence: prior_conf,
        result,
        pca,
        gmm,
    })
}

pub fn select(result: &AlignmentResult, config: &PipelineConfig) -> Result<PseudoLabelSet> {
    select_confident(result, config.delta, config.selection)
}

pub fn train_and_predict(
    features: &DMatrix<f64>,
    pseudo: &PseudoLabelSet,
    config: &PipelineConfig,
) -> Result<(LinearClassifier, Vec<usize>)> {
    let model = train_classifier(features, pseudo, &config.classifier)?;
    let predictions = model.predict(features)?;
    Ok((model, predictions))
}

/// Every stage's output for one flat run.
#[derive(Debug, Clone)]
pub struct FlatOutput {
    pub representation: Representation,
    pub alignment: Alignment,
    pub pseudo: Option<PseudoLabelSet>,
    pub classifier: Option<LinearClassifier>,
    /// Final labels: classifier predictions, or the best earlier stage when
    /// training was skipped.
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FlatOptions {
    /// Fall back to alignment labels when the pseudo-labels cover a single
    /// class instead of failing.
    pub lenient_training: bool,
}

/// Runs every stage in memory on `corpus`, computing static representations
/// from `corpus` itself.
pub fn classify(
    corpus: &EmbeddedCorpus,
    class_names: &[String],
    config: &PipelineConfig,
    options: FlatOptions,
    anchor_fallback: Option<&StaticRepTable>,
) -> Result<FlatOutput> {
    let table = compute_static_representations_with(corpus, config.static_reps);
    let representation = represent(corpus, &table, class_names, config, anchor_fallback)?;
    let class_reps = representation.class_reps();
    let features = &representation.doc_reps.matrix;

    if corpus.len() < class_names.len() {
        warn!(
            "{} documents for {} classes; using prior labels only",
            corpus.len(),
            class_names.len()
        );
        let prior = prior_labels(features, &class_reps)?;
        let conf = prior_confidence(features, &class_reps, &prior);
        let result = AlignmentResult::hard(&prior.labels, class_names.len(), conf.clone());
        let labels = prior.labels.clone();
        return Ok(FlatOutput {
            representation,
            alignment: Alignment {
                prior,
                prior_confidence: conf,
                result,
                pca: None,
                gmm: None,
            },
            pseudo: None,
            classifier: None,
            labels,
        });
    }

    let alignment = align(features, &class_reps, config)?;
    let pseudo = select(&alignment.result, config)?;
    let (classifier, labels) = match train_and_predict(features, &pseudo, config) {
        Ok((model, labels)) => (Some(model), labels),
        Err(Error::DegenerateTraining(msg)) if options.lenient_training => {
            warn!("classifier skipped ({msg}); using alignment labels");
            (None, alignment.result.assignment.clone())
        }
        Err(e) => return Err(e),
    };
    Ok(FlatOutput {
        representation,
        alignment,
        pseudo: Some(pseudo),
        classifier,
        labels,
    })
}
