use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use weakcls_core::artifacts::{read_labels, write_labels, write_text};
use weakcls_core::corpus::{load_embedded_corpus, write_embedded_corpus};
use weakcls_core::eval::{evaluate, EvalReport};
use weakcls_core::hierarchy::{classify_end, classify_hier, ClassTree};
use weakcls_core::runner::{self, files};
use weakcls_core::synth::{generate_hierarchical_corpus, generate_synthetic_corpus};

mod config;

use config::{ConfigFile, PipelineArgs};
use weakcls_core::pipeline::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "weakcls",
    version,
    about = "Document classification from class names only"
)]
struct Cli {
    /// Worker threads (defaults to the number of cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Keyword lists, class representations and document representations.
    Represent {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        class_names: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        args: PipelineArgs,
    },
    /// Prior labels, PCA and clustering over an output directory.
    Align {
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        args: PipelineArgs,
    },
    /// Confident pseudo-labels from the alignment.
    Select {
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        args: PipelineArgs,
    },
    /// Trains the classifier on pseudo-labels and predicts every document.
    Train {
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        args: PipelineArgs,
    },
    /// Micro/macro F1 of a label file against gold labels.
    Evaluate {
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        num_classes: Option<usize>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// All stages in order.
    Pipeline {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        class_names: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        args: PipelineArgs,
    },
    /// Writes a synthetic embedded corpus.
    Synth {
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 400)]
        docs: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Two-level corpus; `--classes` top-level classes with `--fine-per` leaves each. Also writes tree.txt.
        #[arg(long)]
        hier: bool,
        #[arg(long, default_value_t = 2)]
        fine_per: usize,
    },
    /// Classifies over a class tree.
    Hier {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = HierMode::Hier)]
        mode: HierMode,
        #[command(flatten)]
        args: PipelineArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum HierMode {
    /// Top-down, one pipeline per internal class.
    Hier,
    /// One flat pipeline over the leaves.
    End,
}

fn required(flag: Option<PathBuf>, file: &ConfigFile, key: &str) -> Result<PathBuf> {
    flag.or_else(|| file.path(key)).ok_or_else(|| {
        anyhow!(
            "missing --{} (or '{key}' in the config file)",
            key.replace('_', "-")
        )
    })
}

fn print_report(stage: &str, report: &Option<EvalReport>) {
    if let Some(r) = report {
        println!(
            "{stage}: accuracy {:.4}  micro-F1 {:.4}  macro-F1 {:.4}",
            r.accuracy, r.micro_f1, r.macro_f1
        );
    }
}

/// Loads the config file, resolves pipeline settings and sizes the thread pool
/// (flag first, then the file's `threads` key).
fn setup(args: &PipelineArgs, threads: Option<usize>) -> Result<(ConfigFile, PipelineConfig)> {
    let file = args.config_file()?;
    let config = args.resolve(&file)?;
    init_threads(threads.map_or_else(|| file.get("threads"), |n| Ok(Some(n)))?)?;
    Ok((file, config))
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    match threads {
        Some(0) => Err(anyhow!("threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}")),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::Represent {
            corpus,
            class_names,
            out,
            args,
        } => {
            let (file, config) = setup(&args, threads)?;
            let corpus_path = required(corpus, &file, "corpus")?;
            let out = required(out, &file, "output")?;
            let corpus = load_embedded_corpus(&corpus_path)?;
            let names = runner::resolve_class_names(
                &corpus,
                class_names.or_else(|| file.path("class_names")).as_deref(),
            )?;
            runner::run_represent(&corpus, &names, &out, &config)
                .map_err(|e| e.in_stage("represent"))?;
        }
        Command::Align { out, args } => {
            let (file, config) = setup(&args, threads)?;
            let out = required(out, &file, "output")?;
            let (rep, align) = runner::run_align(&out, &config).map_err(|e| e.in_stage("align"))?;
            print_report("prior", &rep);
            print_report("alignment", &align);
        }
        Command::Select { out, args } => {
            let (file, config) = setup(&args, threads)?;
            let out = required(out, &file, "output")?;
            let pseudo = runner::run_select(&out, &config).map_err(|e| e.in_stage("select"))?;
            println!("selected {} pseudo-labels", pseudo.labels.len());
        }
        Command::Train { out, args } => {
            let (file, config) = setup(&args, threads)?;
            let out = required(out, &file, "output")?;
            let report = runner::run_train(&out, &config).map_err(|e| e.in_stage("train"))?;
            print_report("classifier", &report);
        }
        Command::Evaluate {
            predicted,
            gold,
            num_classes,
            report,
        } => {
            init_threads(threads)?;
            let p = read_labels(&predicted)?;
            let g = read_labels(&gold)?;
            let k = num_classes.unwrap_or_else(|| p.iter().chain(&g).max().map_or(1, |m| m + 1));
            let r = evaluate(&p, &g, k)?;
            match report {
                Some(path) => {
                    write_text(&path, &r.to_json())?;
                    print_report("evaluation", &Some(r));
                }
                None => print!("{}", r.to_json()),
            }
        }
        Command::Pipeline {
            corpus,
            class_names,
            out,
            args,
        } => {
            let (file, config) = setup(&args, threads)?;
            let corpus = required(corpus, &file, "corpus")?;
            let out = required(out, &file, "output")?;
            let names = class_names.or_else(|| file.path("class_names"));
            let summary = runner::run_pipeline(&corpus, names.as_deref(), &out, &config)?;
            print_report("prior", &summary.rep);
            print_report("alignment", &summary.align);
            print_report("classifier", &summary.classifier);
        }
        Command::Synth {
            classes,
            docs,
            dim,
            seed,
            out,
            hier,
            fine_per,
        } => {
            init_threads(threads)?;
            if hier {
                let h = generate_hierarchical_corpus(classes, fine_per, docs, dim, seed)?;
                write_embedded_corpus(&h.corpus, &out)?;
                write_text(&out.join("tree.txt"), &h.tree.to_text())?;
            } else {
                let s = generate_synthetic_corpus(classes, docs, dim, seed)?;
                write_embedded_corpus(&s.corpus, &out)?;
            }
        }
        Command::Hier {
            corpus,
            tree,
            out,
            mode,
            args,
        } => {
            let (file, config) = setup(&args, threads)?;
            let corpus_path = required(corpus, &file, "corpus")?;
            let tree_path = required(tree, &file, "tree")?;
            let out = required(out, &file, "output")?;
            let corpus = load_embedded_corpus(&corpus_path)?;
            let text = std::fs::read_to_string(&tree_path)
                .with_context(|| format!("reading {}", tree_path.display()))?;
            let tree = ClassTree::parse(&text)?;
            let labels = match mode {
                HierMode::Hier => classify_hier(&corpus, &tree, &config),
                HierMode::End => classify_end(&corpus, &tree, &config),
            }
            .map_err(|e| e.in_stage("hier"))?;
            write_hier_outputs(&out, &corpus, &tree, &labels.leaf_labels, &labels.paths)?;
        }
    }
    Ok(())
}

fn write_hier_outputs(
    out: &Path,
    corpus: &weakcls_core::corpus::EmbeddedCorpus,
    tree: &ClassTree,
    leaf_labels: &[usize],
    paths: &[Vec<usize>],
) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let leaf_names = tree.leaf_names();
    write_text(&out.join(files::CLASS_NAMES), &lines(&leaf_names))?;
    write_labels(&out.join(files::PREDICTIONS), leaf_labels)?;
    let path_lines: Vec<String> = paths
        .iter()
        .map(|p| {
            p.iter()
                .map(|&n| tree.name(n))
                .collect::<Vec<_>>()
                .join("/")
        })
        .collect();
    write_text(&out.join("paths.txt"), &lines(&path_lines))?;

    let Some(gold) = corpus.gold_labels() else {
        return Ok(());
    };
    // Gold labels index the corpus's own class list, which may be ordered
    // differently from the tree's leaves.
    let gold: Vec<usize> = match corpus.class_names() {
        Some(names) => {
            let index: HashMap<&str, usize> = leaf_names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.as_str(), i))
                .collect();
            let map: Vec<usize> = names
                .iter()
                .map(|n| {
                    index
                        .get(n.as_str())
                        .copied()
                        .ok_or_else(|| anyhow!("gold class '{n}' is not a leaf of the tree"))
                })
                .collect::<Result<_>>()?;
            gold.iter().map(|&g| map[g]).collect()
        }
        None => gold.to_vec(),
    };
    let r = evaluate(leaf_labels, &gold, leaf_names.len())?;
    write_text(&out.join(files::REPORT_FINAL), &r.to_json())?;
    print_report("leaves", &Some(r));
    Ok(())
}

fn lines(items: &[impl AsRef<str>]) -> String {
    items.iter().map(|s| format!("{}\n", s.as_ref())).collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Core errors already print their source inline; skip causes that
            // would repeat the previous message.
            let mut msg = e.to_string();
            let mut last = msg.clone();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !last.contains(&c) {
                    msg.push_str(": ");
                    msg.push_str(&c);
                }
                last = c;
            }
            eprintln!("weakcls: {msg}");
            ExitCode::FAILURE
        }
    }
}
