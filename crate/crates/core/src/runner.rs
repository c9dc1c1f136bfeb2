//! Stage runners that read and write artifacts in an output directory.
//!
//! Each stage reads only what its predecessor wrote, so any stage can be
//! re-run on its own. File names are fixed (see [`files`]).

use std::fs;
use std::path::Path;

use crate::alignment::Pca;
use crate::artifacts::{
    alignment_from_csv, alignment_to_csv, read_labels, read_lines, read_matrix, read_text,
    write_labels, write_matrix, write_text,
};
use crate::class_rep::format_keyword_lists;
use crate::corpus::{compute_static_representations_with, load_embedded_corpus, EmbeddedCorpus};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::pipeline::{align, represent, select, train_and_predict, PipelineConfig};
use crate::selection::PseudoLabelSet;

pub mod files {
    pub const CLASS_NAMES: &str = "class_names.txt";
    pub const GOLD: &str = "gold_labels.txt";
    pub const KEYWORDS: &str = "keywords.txt";
    pub const CLASS_REPS: &str = "class_reps.bin";
    pub const DOC_REPS: &str = "doc_reps.bin";
    pub const PROJECTION: &str = "projection.csv";
    pub const PRIOR: &str = "prior_labels.txt";
    pub const REPORT_REP: &str = "report_rep.json";
    pub const ALIGNMENT: &str = "alignment.csv";
    pub const ALIGNMENT_LABELS: &str = "alignment_labels.txt";
    pub const REPORT_ALIGN: &str = "report_align.json";
    pub const PSEUDO: &str = "pseudo_labels.csv";
    pub const CLASSIFIER: &str = "classifier.json";
    pub const PREDICTIONS: &str = "predictions.txt";
    pub const REPORT_FINAL: &str = "report_final.json";
}

/// Evaluation of each stage, when gold labels were available.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineSummary {
    pub rep: Option<EvalReport>,
    pub align: Option<EvalReport>,
    pub classifier: Option<EvalReport>,
}

fn gold(out: &Path) -> Result<Option<Vec<usize>>> {
    let p = out.join(files::GOLD);
    if p.exists() {
        Ok(Some(read_labels(&p)?))
    } else {
        Ok(None)
    }
}

fn report(out: &Path, file: &str, predicted: &[usize], k: usize) -> Result<Option<EvalReport>> {
    let Some(gold) = gold(out)? else {
        return Ok(None);
    };
    let r = evaluate(predicted, &gold, k)?;
    write_text(&out.join(file), &r.to_json())?;
    Ok(Some(r))
}

/// Class names from an explicit file, else from the corpus manifest.
pub fn resolve_class_names(corpus: &EmbeddedCorpus, path: Option<&Path>) -> Result<Vec<String>> {
    match path {
        Some(p) => read_lines(p),
        None => corpus.class_names().map(<[String]>::to_vec).ok_or_else(|| {
            Error::InvalidArgument("no class names given and none in the corpus manifest".into())
        }),
    }
}

/// Keyword lists, class and document representations, and a 2-D projection.
pub fn run_represent(
    corpus: &EmbeddedCorpus,
    class_names: &[String],
    out: &Path,
    config: &PipelineConfig,
) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut names = String::new();
    for n in class_names {
        names.push_str(n);
        names.push('\n');
    }
    write_text(&out.join(files::CLASS_NAMES), &names)?;
    match corpus.gold_labels() {
        Some(g) => write_labels(&out.join(files::GOLD), g)?,
        None => {
            let _ = fs::remove_file(out.join(files::GOLD));
        }
    }

    let table = compute_static_representations_with(corpus, config.static_reps);
    let rep = represent(corpus, &table, class_names, config, None)?;
    write_text(
        &out.join(files::KEYWORDS),
        &format_keyword_lists(&rep.class_models, corpus.vocab()),
    )?;

    let class_reps = rep.class_reps();
    let k = class_reps.len();
    let class_matrix = nalgebra::DMatrix::from_fn(k, corpus.dim(), |i, j| class_reps[i][j]);
    write_matrix(&out.join(files::CLASS_REPS), &class_matrix)?;
    write_matrix(&out.join(files::DOC_REPS), &rep.doc_reps.matrix)?;

    let mut csv = String::from("doc_index,x,y\n");
    if rep.doc_reps.len() >= 2 {
        let pca = Pca::fit(&rep.doc_reps.matrix, 2)?;
        let proj = pca.transform(&rep.doc_reps.matrix);
        for i in 0..proj.nrows() {
            let y = if proj.ncols() > 1 { proj[(i, 1)] } else { 0.0 };
            csv.push_str(&format!("{},{},{}\n", i, proj[(i, 0)], y));
        }
    }
    write_text(&out.join(files::PROJECTION), &csv)
}

/// Prior labels and clustering; also scores the prior as the representation
/// stage result.
pub fn run_align(
    out: &Path,
    config: &PipelineConfig,
) -> Result<(Option<EvalReport>, Option<EvalReport>)> {
    let class_matrix = read_matrix(&out.join(files::CLASS_REPS))?;
    let docs = read_matrix(&out.join(files::DOC_REPS))?;
    let class_reps: Vec<Vec<f64>> = class_matrix
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let k = class_reps.len();

    let a = align(&docs, &class_reps, config)?;
    write_labels(&out.join(files::PRIOR), &a.prior.labels)?;
    let rep_report = report(out, files::REPORT_REP, &a.prior.labels, k)?;
    write_text(&out.join(files::ALIGNMENT), &alignment_to_csv(&a.result))?;
    write_labels(&out.join(files::ALIGNMENT_LABELS), &a.result.assignment)?;
    let align_report = report(out, files::REPORT_ALIGN, &a.result.assignment, k)?;
    Ok((rep_report, align_report))
}

pub fn run_select(out: &Path, config: &PipelineConfig) -> Result<PseudoLabelSet> {
    let result = alignment_from_csv(&read_text(&out.join(files::ALIGNMENT))?)?;
    let pseudo = select(&result, config)?;
    write_text(&out.join(files::PSEUDO), &pseudo.to_csv())?;
    Ok(pseudo)
}

pub fn run_train(out: &Path, config: &PipelineConfig) -> Result<Option<EvalReport>> {
    let docs = read_matrix(&out.join(files::DOC_REPS))?;
    let k = read_matrix(&out.join(files::CLASS_REPS))?.nrows();
    let pseudo = PseudoLabelSet::from_csv(&read_text(&out.join(files::PSEUDO))?, k)?;
    let (model, predictions) = train_and_predict(&docs, &pseudo, config)?;
    let json = serde_json::to_string(&model).map_err(|e| Error::Validation(e.to_string()))?;
    write_text(&out.join(files::CLASSIFIER), &(json + "\n"))?;
    write_labels(&out.join(files::PREDICTIONS), &predictions)?;
    report(out, files::REPORT_FINAL, &predictions, k)
}

/// Every stage in order. Errors carry the failing stage's name; artifacts of
/// completed stages stay on disk.
pub fn run_pipeline(
    corpus_path: &Path,
    class_names_path: Option<&Path>,
    out: &Path,
    config: &PipelineConfig,
) -> Result<PipelineSummary> {
    let corpus = load_embedded_corpus(corpus_path).map_err(|e| e.in_stage("load"))?;
    let names = resolve_class_names(&corpus, class_names_path).map_err(|e| e.in_stage("load"))?;
    run_represent(&corpus, &names, out, config).map_err(|e| e.in_stage("represent"))?;
    let (rep, align) = run_align(out, config).map_err(|e| e.in_stage("align"))?;
    run_select(out, config).map_err(|e| e.in_stage("select"))?;
    let classifier = run_train(out, config).map_err(|e| e.in_stage("train"))?;
    Ok(PipelineSummary {
        rep,
        align,
        classifier,
    })
}
