//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use weakcls_core::alignment::{
    gmm_align, kmeans_align, ClusterMethod, GmmConfig, Pca, PriorLabels,
};
use weakcls_core::class_rep::{
    class_representation, expand_observed, ClassName, ExpansionConfig, Keyword,
};
use weakcls_core::corpus::{write_embedded_corpus, StaticRepTable, WordId};
use weakcls_core::doc_rep::{fuse_ranks, ranks_from_scores};
use weakcls_core::hierarchy::{classify_end, classify_hier, ClassTree};
use weakcls_core::pipeline::{classify, FlatOptions, PipelineConfig};
use weakcls_core::runner::{files, run_pipeline};
use weakcls_core::synth::generate_synthetic_corpus;

use common::{
    accuracy, cos, covariance, gaussian, jacobi_eigenvalues, random_vector, ranks_by_counting, rng,
};

type Outcome = Result<String, String>;

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn synthetic_end_to_end() -> Outcome {
    let s = generate_synthetic_corpus(4, 400, 32, 7).map_err(|e| e.to_string())?;
    let out = single_threaded(|| {
        classify(
            &s.corpus,
            &s.class_names,
            &PipelineConfig::default(),
            FlatOptions::default(),
            None,
        )
    })
    .map_err(|e| e.to_string())?;
    let prior = accuracy(&out.alignment.prior.labels, &s.gold_labels);
    let aligned = accuracy(&out.alignment.result.assignment, &s.gold_labels);
    check(prior >= 0.90, || {
        format!("prior accuracy {prior:.4} < 0.90")
    })?;
    check(aligned >= prior, || {
        format!("alignment accuracy {aligned:.4} < prior {prior:.4}")
    })?;
    Ok(format!("prior {prior:.4}, alignment {aligned:.4}"))
}

fn weighted_sum_oracle() -> Outcome {
    let mut r = rng(11);
    let words = 300;
    let dim = 24;
    let table = common::random_table(&mut r, words, dim);
    let ids: Vec<WordId> = (0..words as WordId).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let len = r.random_range(1..=60);
        let mut pool = ids.clone();
        pool.shuffle(&mut r);
        let list = &pool[..len];
        let got = class_representation(list, &table).map_err(|e| e.to_string())?;
        let mut num = vec![0.0; dim];
        let mut den = 0.0;
        for (i, &w) in list.iter().enumerate() {
            let weight = 1.0 / (i as f64 + 1.0);
            den += weight;
            for (j, x) in table.rep(w).unwrap().iter().enumerate() {
                num[j] += weight * x;
            }
        }
        let want: Vec<f64> = num.iter().map(|x| x / den).collect();
        let diff = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = want.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-300);
        worst = worst.max(diff / scale);
    }
    check(worst <= 1e-6, || format!("relative error {worst:e} > 1e-6"))?;
    Ok(format!("max relative error {worst:.2e}"))
}

/// Pool items under (score desc, item order) with the anchor as item 0.
fn top_set(items: &[(Keyword, &[f64])], rep: &[f64], size: usize) -> Vec<Keyword> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    let scores: Vec<f64> = items.iter().map(|(_, v)| cos(v, rep)).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut top: Vec<Keyword> = order[..size].iter().map(|&i| items[i].0).collect();
    top.sort();
    top
}

fn keyword_expansion_fuzz() -> Outcome {
    let mut r = rng(12);
    let mut commits = 0usize;
    for case in 0..10_000 {
        let words = r.random_range(2..=40);
        let dim = r.random_range(2..=8);
        let entries: Vec<(WordId, Vec<f64>, u64)> = (0..words)
            .map(|w| {
                (
                    w as WordId,
                    random_vector(&mut r, dim),
                    r.random_range(1..=10),
                )
            })
            .collect();
        let table =
            StaticRepTable::from_entries(dim, words, &entries).map_err(|e| e.to_string())?;
        let name = r.random_range(0..words) as WordId;
        let config = ExpansionConfig {
            max_keywords: r.random_range(1..=25),
            min_count: r.random_range(1..=6),
        };
        let class = ClassName {
            class_id: 0,
            name: "c".into(),
            name_tokens: vec![name],
        };
        let anchor = table.rep(name).unwrap().to_vec();

        let mut items: Vec<(Keyword, &[f64])> = vec![(Keyword::ClassName, anchor.as_slice())];
        for (w, v, c) in &entries {
            if *c >= config.min_count && *w != name {
                items.push((Keyword::Word(*w), v.as_slice()));
            }
        }

        let mut previous: Vec<Keyword> = Vec::new();
        let mut failure = None;
        let model = expand_observed(&class, &anchor, &table, &config, |list, rep| {
            commits += 1;
            if failure.is_some() {
                return;
            }
            if list.len() != previous.len() + 1 || list[..previous.len()] != previous[..] {
                failure = Some(format!(
                    "case {case}: committed list does not extend the previous one"
                ));
            }
            let mut mine = list.to_vec();
            mine.sort();
            if top_set(&items, rep, list.len()) != mine {
                failure = Some(format!(
                    "case {case}: list of {} is not the top set of its representation",
                    list.len()
                ));
            }
            previous = list.to_vec();
        })
        .map_err(|e| format!("case {case}: {e}"))?;
        if let Some(f) = failure {
            return Err(f);
        }
        check(model.keywords.len() <= config.max_keywords, || {
            format!(
                "case {case}: {} keywords > T = {}",
                model.keywords.len(),
                config.max_keywords
            )
        })?;
        check(model.keywords == previous, || {
            format!("case {case}: final list differs from last commit")
        })?;
    }
    Ok(format!("10000 tables, {commits} accepted steps checked"))
}

fn rank_fusion_oracle() -> Outcome {
    let mut r = rng(13);
    for case in 0..1000 {
        let tokens = r.random_range(1..=50);
        let mechanisms = r.random_range(1..=4);
        // Coarse scores so ties are common.
        let scores: Vec<Vec<f64>> = (0..mechanisms)
            .map(|_| {
                (0..tokens)
                    .map(|_| f64::from(r.random_range(0..8u8)) / 8.0)
                    .collect()
            })
            .collect();
        let ranks: Vec<Vec<u64>> = scores.iter().map(|s| ranks_from_scores(s)).collect();
        let oracle_ranks: Vec<Vec<u64>> = scores.iter().map(|s| ranks_by_counting(s)).collect();
        check(ranks == oracle_ranks, || {
            format!("case {case}: ranks differ")
        })?;

        let got = fuse_ranks(&ranks).map_err(|e| e.to_string())?;
        let mut want: Vec<(u64, usize)> = (0..tokens)
            .map(|j| (oracle_ranks.iter().map(|rk| rk[j]).product(), j))
            .collect();
        want.sort();
        let want: Vec<usize> = want.into_iter().map(|(_, j)| j).collect();
        check(got == want, || {
            format!("case {case}: fused order {got:?} != {want:?}")
        })?;
    }
    Ok("1000 matrices identical".into())
}

fn random_blobs(r: &mut impl Rng, n: usize, p: usize, k: usize) -> DMatrix<f64> {
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| random_vector(r, p).iter().map(|x| 3.0 * x).collect())
        .collect();
    let mixing: Vec<Vec<f64>> = (0..p).map(|_| random_vector(r, p)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let z = random_vector(r, p);
            (0..p)
                .map(|j| centers[i % k][j] + 0.5 * (0..p).map(|m| mixing[j][m] * z[m]).sum::<f64>())
                .collect()
        })
        .collect();
    DMatrix::from_fn(n, p, |i, j| rows[i][j])
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    *jacobi_eigenvalues(&rows).last().unwrap()
}

fn gmm_em_invariants() -> Outcome {
    let mut r = rng(14);
    let mut worst_drop: f64 = 0.0;
    let mut steps = 0usize;
    for case in 0..500 {
        let n = r.random_range(20..=80);
        let p = r.random_range(1..=5);
        let k = r.random_range(2..=4);
        let data = random_blobs(&mut r, n, p, k);
        // Random initialization: uniformly random prior labels.
        let prior = PriorLabels {
            labels: (0..n).map(|_| r.random_range(0..k)).collect(),
            num_classes: k,
            degenerate: Vec::new(),
        };
        let config = GmmConfig {
            max_iters: 50,
            tol: 0.0,
            keep_history: true,
            ..GmmConfig::default()
        };
        let fit =
            gmm_align(&data, &prior, None, &config).map_err(|e| format!("case {case}: {e}"))?;
        for w in fit.objective.windows(2) {
            steps += 1;
            check(w[1] >= w[0] - 1e-8, || {
                format!("case {case}: EM objective fell from {} to {}", w[0], w[1])
            })?;
        }
        for w in fit.log_likelihoods.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
        for i in 0..n {
            let s: f64 = fit.result.posterior.row(i).sum();
            check((s - 1.0).abs() <= 1e-6, || {
                format!("case {case}: posterior row {i} sums to {s}")
            })?;
        }
        for state in &fit.history {
            let c = &state.tied_covariance;
            let asym = (c - c.transpose()).amax();
            check(asym <= 1e-12 * c.amax().max(1.0), || {
                format!("case {case}: covariance asymmetry {asym:e}")
            })?;
            let min = min_eigenvalue(c);
            check(min >= -1e-12 * c.amax().max(1.0), || {
                format!("case {case}: covariance eigenvalue {min:e}")
            })?;
        }
    }
    Ok(format!(
        "{steps} EM steps monotone; largest plain log-likelihood decrease {worst_drop:.2e}"
    ))
}

fn pca_captured_variance() -> Outcome {
    let mut r = rng(15);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = r.random_range(10..=60);
        let d = r.random_range(2..=16);
        let p = r.random_range(1..=n.min(d));
        let mixing: Vec<Vec<f64>> = (0..d).map(|_| random_vector(&mut r, d)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let z = random_vector(&mut r, d);
                (0..d)
                    .map(|j| (0..d).map(|m| mixing[j][m] * z[m]).sum::<f64>() + 1.0)
                    .collect()
            })
            .collect();
        let data = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        let pca = Pca::fit(&data, p).map_err(|e| e.to_string())?;
        let projected = pca.transform(&data);
        let proj_rows: Vec<Vec<f64>> = projected
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        let captured: f64 = (0..p).map(|j| covariance(&proj_rows)[j][j]).sum();
        let want: f64 = jacobi_eigenvalues(&covariance(&rows)).iter().take(p).sum();
        let rel = (captured - want).abs() / want.abs().max(1e-300);
        worst = worst.max(rel);
        check(rel <= 1e-6, || {
            format!("case {case}: captured {captured} vs eigenvalue sum {want}")
        })?;
    }
    Ok(format!("max relative error {worst:.2e}"))
}

/// Two classes stretched along the diagonal, offset horizontally; the
/// offset is small next to the spread along the diagonal.
fn anisotropic_fixture() -> (DMatrix<f64>, Vec<usize>) {
    let mut r = rng(16);
    let n = 400;
    let gold: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let rows: Vec<[f64; 2]> = gold
        .iter()
        .map(|&c| {
            let along = 3.0 * gaussian(&mut r);
            let across = 0.3 * gaussian(&mut r);
            let offset = if c == 1 { 3.0 } else { 0.0 };
            [along * s - across * s + offset, along * s + across * s]
        })
        .collect();
    (DMatrix::from_fn(n, 2, |i, j| rows[i][j]), gold)
}

fn anisotropic_gmm_beats_kmeans() -> Outcome {
    let (data, gold) = anisotropic_fixture();
    // Prior: nearest true class mean, the labeling a spherical model produces.
    let means = [[0.0, 0.0], [3.0, 0.0]];
    let labels: Vec<usize> = (0..data.nrows())
        .map(|i| {
            let d = |m: &[f64; 2]| (data[(i, 0)] - m[0]).powi(2) + (data[(i, 1)] - m[1]).powi(2);
            usize::from(d(&means[1]) < d(&means[0]))
        })
        .collect();
    let prior = PriorLabels {
        labels,
        num_classes: 2,
        degenerate: Vec::new(),
    };
    let run = || -> Result<(f64, f64), String> {
        let gmm =
            gmm_align(&data, &prior, None, &GmmConfig::default()).map_err(|e| e.to_string())?;
        let km = kmeans_align(&data, &prior, None, 100).map_err(|e| e.to_string())?;
        Ok((
            accuracy(&gmm.result.assignment, &gold),
            accuracy(&km.assignment, &gold),
        ))
    };
    let (g, k) = run()?;
    check(run()? == (g, k), || "results differ between runs".into())?;
    check(g > k, || {
        format!("GMM accuracy {g:.4} not above k-means {k:.4}")
    })?;
    Ok(format!("GMM {g:.4} vs k-means {k:.4}"))
}

fn stage_bypass() -> Outcome {
    let s = generate_synthetic_corpus(4, 200, 24, 21).map_err(|e| e.to_string())?;
    let config = PipelineConfig {
        cluster_method: ClusterMethod::None,
        ..PipelineConfig::default()
    };
    let out = classify(
        &s.corpus,
        &s.class_names,
        &config,
        FlatOptions::default(),
        None,
    )
    .map_err(|e| e.to_string())?;
    check(
        out.alignment.result.assignment == out.alignment.prior.labels,
        || "alignment labels differ from prior labels".into(),
    )?;

    let tree_text: String = s
        .class_names
        .iter()
        .map(|n| format!("ROOT\t{n}\n"))
        .collect();
    let tree = ClassTree::parse(&tree_text).map_err(|e| e.to_string())?;
    let config = PipelineConfig::default();
    let end = classify_end(&s.corpus, &tree, &config).map_err(|e| e.to_string())?;
    let hier = classify_hier(&s.corpus, &tree, &config).map_err(|e| e.to_string())?;
    check(end == hier, || {
        "single-level hierarchical labels differ from flat labels".into()
    })?;
    let flat = classify(
        &s.corpus,
        &s.class_names,
        &config,
        FlatOptions::default(),
        None,
    )
    .map_err(|e| e.to_string())?;
    check(flat.labels == end.leaf_labels, || {
        "flat classify differs from classify_end".into()
    })?;
    Ok("prior labels kept; depth-1 tree identical to flat".into())
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let s = generate_synthetic_corpus(4, 400, 32, 7).map_err(|e| e.to_string())?;
    let corpus = tmp.path().join("corpus");
    write_embedded_corpus(&s.corpus, &corpus).map_err(|e| e.to_string())?;
    let config = PipelineConfig::default();
    let many = std::thread::available_parallelism().map_or(4, |n| n.get().max(4));
    let mut runs = Vec::new();
    for (threads, rep) in [(1, 0), (1, 1), (many, 0), (many, 1)] {
        let out = tmp.path().join(format!("out_{threads}_{rep}"));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| run_pipeline(&corpus, None, &out, &config))
            .map_err(|e| e.to_string())?;
        runs.push(dir_contents(&out));
    }
    check(runs[0].iter().any(|(f, _)| f == files::PREDICTIONS), || {
        "no predictions written".into()
    })?;
    for (i, r) in runs.iter().enumerate().skip(1) {
        check(r == &runs[0], || {
            format!("run {i} differs from the first single-threaded run")
        })?;
    }
    Ok(format!(
        "{} artifacts identical across 1 and {many} threads",
        runs[0].len()
    ))
}

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            name: "synthetic end-to-end accuracy",
            limit: Some(Duration::from_secs(10)),
            run: synthetic_end_to_end,
        },
        Criterion {
            name: "class representation weighted sum",
            limit: Some(Duration::from_secs(1)),
            run: weighted_sum_oracle,
        },
        Criterion {
            name: "keyword expansion termination and prefix stability",
            limit: Some(Duration::from_secs(30)),
            run: keyword_expansion_fuzz,
        },
        Criterion {
            name: "rank fusion exact product order",
            limit: Some(Duration::from_secs(5)),
            run: rank_fusion_oracle,
        },
        Criterion {
            name: "GMM EM invariants",
            limit: Some(Duration::from_secs(60)),
            run: gmm_em_invariants,
        },
        Criterion {
            name: "PCA captured variance",
            limit: Some(Duration::from_secs(10)),
            run: pca_captured_variance,
        },
        Criterion {
            name: "tied-covariance GMM beats k-means on anisotropic data",
            limit: Some(Duration::from_secs(5)),
            run: anisotropic_gmm_beats_kmeans,
        },
        Criterion {
            name: "stage bypass and single-level hierarchy",
            limit: None,
            run: stage_bypass,
        },
        Criterion {
            name: "byte-identical artifacts across runs and threads",
            limit: None,
            run: determinism,
        },
    ];
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Ok(d) => match c.limit {
                Some(limit) if elapsed > limit => (
                    "FAIL",
                    format!(
                        "{d}; took {:.2}s, limit {}s",
                        elapsed.as_secs_f64(),
                        limit.as_secs()
                    ),
                ),
                _ => ("PASS", d),
            },
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "{status} [{}] {} ({:.2}s): {detail}",
            i + 1,
            c.name,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all {} acceptance criteria passed", criteria.len());
}
