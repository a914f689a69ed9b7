//! Command-line entry point tying ingestion, sampling, training,
//! evaluation and export into reproducible pipelines.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! abort.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hinembed::error::Error;
use hinembed::eval::{
    f1_scores, kmeans, map_at_k, nmi, stratified_split, top_k_neighbors, LabelSet, Similarity,
    SoftmaxRegression,
};
use hinembed::graph::{load_graph, HinGraph, MetaPathPattern};
use hinembed::io::{
    read_embeddings_binary, read_embeddings_text, write_embeddings_binary, write_embeddings_text,
    NamedEmbeddings,
};
use hinembed::sampler::{
    apply_min_count, metapath_instances, random_walks, walk_to_chain_samples, write_samples,
    SamplerConfig,
};
use hinembed::trainer::{train_chain_model, train_edge_model, Phase, StopReason, TrainConfig};
use hinembed::trajectory::{orders_to_graph, parse_orders, trajectory_to_walks, TimeBucketRule};
use hinembed::Result;

/// Environment variable naming a directory that relative input paths
/// are resolved against when they do not exist in the working
/// directory.
const DATA_DIR_ENV: &str = "HINEMBED_DATA_DIR";

#[derive(Parser)]
#[command(
    name = "hinembed",
    version,
    about = "Heterogeneous information network embedding toolkit",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricArg {
    Cosine,
    Dot,
}

impl From<MetricArg> for Similarity {
    fn from(m: MetricArg) -> Similarity {
        match m {
            MetricArg::Cosine => Similarity::Cosine,
            MetricArg::Dot => Similarity::Dot,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Text,
    Binary,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a chain-sample corpus from a graph or trajectory log
    Sample {
        /// edge list: `src<TAB>edge_type<TAB>dst`
        #[arg(long, conflicts_with = "trajectory")]
        graph: Option<PathBuf>,
        /// node types: `node<TAB>type`
        #[arg(long)]
        node_types: Option<PathBuf>,
        /// trip log: `actor<TAB>timestamp<TAB>src<TAB>dst`; edges are
        /// typed by time bucket and walks stitched per actor and day
        #[arg(long, required_unless_present = "graph")]
        trajectory: Option<PathBuf>,
        /// write the (derived) edge list here, for later `train` runs
        #[arg(long)]
        graph_out: Option<PathBuf>,
        /// output sample file: `first<TAB>e1,..,em<TAB>last`
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        /// restrict sampling to instances of this comma-separated edge
        /// type pattern instead of running random walks
        #[arg(long)]
        metapath: Option<String>,
        /// number of meta-path instances to draw (with --metapath)
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = 100)]
        walks_per_node: usize,
        #[arg(long, default_value_t = 50)]
        max_walk_length: usize,
        #[arg(long, default_value_t = 3)]
        max_chain_length: usize,
        /// drop samples whose endpoints appear fewer than this many
        /// times in the corpus
        #[arg(long, default_value_t = 5)]
        min_count: usize,
    },
    /// Train embeddings on a graph (optionally with a chain corpus)
    Train {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        node_types: Option<PathBuf>,
        /// chain-sample file from `sample`; omitted = edge-level
        /// training on uniform edge triples
        #[arg(long)]
        samples: Option<PathBuf>,
        /// flat `key = value` config file; flags below override it
        #[arg(long)]
        config: Option<PathBuf>,
        /// output embedding file (text format, header `|V| d`)
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        eta_embed: Option<f64>,
        #[arg(long)]
        eta_dnn: Option<f64>,
        #[arg(long)]
        neg: Option<usize>,
        #[arg(long)]
        max_chain_length: Option<usize>,
        /// maximum epochs per phase
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        convergence_tol: Option<f64>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        pretrain_epochs: Option<usize>,
        /// negative-sampling noise distribution: unigram | uniform
        #[arg(long)]
        noise: Option<String>,
        #[arg(long)]
        keep_short_chains: Option<bool>,
        /// gradient-norm cap, 0 disables
        #[arg(long)]
        max_grad_norm: Option<f64>,
        /// 1 = deterministic; >1 = throughput mode (nondeterministic)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// K-means clustering of embeddings scored by NMI against labels
    EvalCluster {
        #[arg(long)]
        embeddings: PathBuf,
        /// `node<TAB>class` file; clustering runs over labeled nodes
        #[arg(long)]
        labels: PathBuf,
        /// cluster count; default = number of label classes
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        /// write `node<TAB>cluster_id` assignments here
        #[arg(long)]
        assignments_out: Option<PathBuf>,
    },
    /// Softmax-regression node classification with Micro/Macro-F1
    EvalClassify {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 0.5)]
        lr: f64,
        #[arg(long, default_value_t = 0.001)]
        l2: f64,
    },
    /// MAP@K similarity ranking over labeled nodes
    EvalRank {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
        metric: MetricArg,
    },
    /// Top-k nearest neighbors of a node
    Nn {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
        metric: MetricArg,
    },
    /// Convert an embedding file between text and binary formats
    Export {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        from: FormatArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Binary)]
        to: FormatArg,
    },
    /// Print graph statistics
    Info {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        node_types: Option<PathBuf>,
    },
}

/// Resolves an input path, falling back to $HINEMBED_DATA_DIR for
/// relative paths that do not exist in the working directory.
fn resolve(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(resolve(path))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load_graph_resolved(edge_file: &Path, node_types: Option<&PathBuf>) -> Result<HinGraph> {
    let resolved_types = node_types.map(|p| resolve(p));
    load_graph(&resolve(edge_file), resolved_types.as_deref())
}

fn load_embeddings(path: &Path, format: FormatArg) -> Result<NamedEmbeddings> {
    let name = path.display().to_string();
    match format {
        FormatArg::Text => read_embeddings_text(open(path)?, &name),
        FormatArg::Binary => read_embeddings_binary(&mut open(path)?, &name),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    graph: Option<&PathBuf>,
    node_types: Option<&PathBuf>,
    trajectory: Option<&PathBuf>,
    graph_out: Option<&PathBuf>,
    out: &Path,
    metapath: Option<&String>,
    count: usize,
    scfg: SamplerConfig,
) -> Result<()> {
    let (g, walks) = if let Some(traj) = trajectory {
        let parsed = parse_orders(open(traj)?, &traj.display().to_string())?;
        if parsed.skipped > 0 {
            eprintln!(
                "warning: skipped {} rows with unparseable timestamps",
                parsed.skipped
            );
        }
        if parsed.orders.is_empty() {
            return Err(Error::EmptyGraph {
                path: traj.display().to_string(),
            });
        }
        let rule = TimeBucketRule::default();
        let g = orders_to_graph(&parsed.orders, &rule);
        let walks = trajectory_to_walks(&parsed.orders, &rule, &g)?;
        (g, walks)
    } else {
        let g = load_graph_resolved(graph.unwrap(), node_types)?;
        scfg.validate()?;
        let walks = random_walks(&g, &scfg);
        (g, walks)
    };

    let samples = if let Some(pattern) = metapath {
        let relations = pattern
            .split(',')
            .map(|name| {
                g.edge_type_id(name.trim())
                    .ok_or_else(|| Error::UnknownEdgeType(name.trim().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        metapath_instances(&g, &MetaPathPattern::new(relations), count, scfg.seed)?
    } else {
        walks
            .iter()
            .flat_map(|w| walk_to_chain_samples(w, scfg.max_chain_length))
            .collect()
    };
    let samples = apply_min_count(samples, scfg.min_count);

    if let Some(path) = graph_out {
        g.export_edges(&mut create(path)?)?;
    }
    write_samples(&g, &samples, &mut create(out)?)?;
    println!("samples = {}", samples.len());
    println!("nodes = {}", g.node_count());
    println!("edges = {}", g.edge_count());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    graph: &Path,
    node_types: Option<&PathBuf>,
    samples: Option<&PathBuf>,
    config: Option<&PathBuf>,
    out: &Path,
    checkpoint_dir: Option<&PathBuf>,
    cfg: TrainConfig,
) -> Result<()> {
    let g = load_graph_resolved(graph, node_types)?;
    if cfg.threads > 1 {
        eprintln!(
            "warning: threads = {} enables throughput mode; results will vary run to run",
            cfg.threads
        );
    }
    let ckpt = checkpoint_dir.map(|p| p.as_path());
    let (params, report) = match samples {
        Some(path) => {
            let corpus =
                hinembed::sampler::read_samples(&g, open(path)?, &path.display().to_string())?;
            train_chain_model(&g, &cfg, &corpus, ckpt)?
        }
        None => train_edge_model(&g, &cfg, ckpt)?,
    };

    let emb = NamedEmbeddings::new(g.node_names().to_vec(), params.embeddings.clone());
    write_embeddings_text(&emb, &mut create(out)?)?;
    let _ = config; // precedence already folded into cfg

    let pretrain = report.losses_for(Phase::Pretrain);
    let chain = report.losses_for(Phase::Chain);
    println!("pretrain_epochs_run = {}", pretrain.len());
    println!("chain_epochs_run = {}", chain.len());
    if let Some(l) = pretrain.last() {
        println!("final_pretrain_loss = {l}");
    }
    if let Some(l) = chain.last() {
        println!("final_chain_loss = {l}");
    }
    println!(
        "stop_reason = {}",
        match report.stop_reason {
            StopReason::Converged => "converged",
            StopReason::MaxEpochs => "max_epochs",
            StopReason::EmptyCorpus => "empty_corpus",
        }
    );
    println!("wall_secs = {:.3}", report.wall_secs);
    println!("samples_per_sec = {:.1}", report.samples_per_sec);
    Ok(())
}

/// Embedding rows of the labeled nodes, with their labels, in
/// embedding order.
fn labeled_vectors<'a>(
    emb: &'a NamedEmbeddings,
    labels: &LabelSet,
) -> Result<(Vec<&'a [f64]>, Vec<usize>, Vec<usize>)> {
    let aligned = labels.align(emb)?;
    let mut vectors = Vec::with_capacity(aligned.len());
    let mut ys = Vec::with_capacity(aligned.len());
    let mut indices = Vec::with_capacity(aligned.len());
    for (idx, label) in aligned {
        vectors.push(emb.vector(idx));
        ys.push(label);
        indices.push(idx);
    }
    Ok((vectors, ys, indices))
}

fn cmd_eval_cluster(
    embeddings: &Path,
    labels: &Path,
    k: Option<usize>,
    seed: u64,
    restarts: usize,
    assignments_out: Option<&PathBuf>,
) -> Result<()> {
    let emb = load_embeddings(embeddings, FormatArg::Text)?;
    let labels = LabelSet::load(open(labels)?, &labels.display().to_string())?;
    let (vectors, truth, indices) = labeled_vectors(&emb, &labels)?;
    let k = k.unwrap_or(labels.class_count());
    let result = kmeans(&vectors, k, seed, restarts)?;
    let score = nmi(&result.assignment, &truth);
    if let Some(path) = assignments_out {
        let mut w = create(path)?;
        for (i, &idx) in indices.iter().enumerate() {
            writeln!(w, "{}\t{}", emb.names[idx], result.assignment[i])?;
        }
    }
    println!("k = {k}");
    println!("points = {}", vectors.len());
    println!("wcss = {:.6}", result.wcss);
    println!("nmi = {score:.6}");
    Ok(())
}

fn cmd_eval_classify(
    embeddings: &Path,
    labels: &Path,
    seed: u64,
    test_fraction: f64,
    epochs: usize,
    lr: f64,
    l2: f64,
) -> Result<()> {
    let emb = load_embeddings(embeddings, FormatArg::Text)?;
    let labels = LabelSet::load(open(labels)?, &labels.display().to_string())?;
    let (vectors, ys, _) = labeled_vectors(&emb, &labels)?;
    if labels.class_count() < 2 {
        return Err(Error::Parse {
            path: "labels".into(),
            line: 0,
            msg: "classification needs at least 2 classes".into(),
        });
    }
    let (train_idx, test_idx) = stratified_split(&ys, test_fraction, seed);
    let train_x: Vec<&[f64]> = train_idx.iter().map(|&i| vectors[i]).collect();
    let train_y: Vec<usize> = train_idx.iter().map(|&i| ys[i]).collect();
    let mut model = SoftmaxRegression::new(emb.dim(), labels.class_count(), seed);
    model.fit(&train_x, &train_y, lr, l2, epochs)?;
    let predictions: Vec<usize> = test_idx.iter().map(|&i| model.predict(vectors[i])).collect();
    let truth: Vec<usize> = test_idx.iter().map(|&i| ys[i]).collect();
    let (macro_f1, micro_f1) = f1_scores(&predictions, &truth, labels.class_count());
    println!("train_size = {}", train_idx.len());
    println!("test_size = {}", test_idx.len());
    println!("macro_f1 = {macro_f1:.6}");
    println!("micro_f1 = {micro_f1:.6}");
    for (c, name) in labels.class_names.iter().enumerate() {
        let tp = predictions
            .iter()
            .zip(&truth)
            .filter(|(p, t)| **p == c && **t == c)
            .count() as f64;
        let predicted = predictions.iter().filter(|&&p| p == c).count() as f64;
        let actual = truth.iter().filter(|&&t| t == c).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        println!("precision[{name}] = {precision:.6}");
        println!("recall[{name}] = {recall:.6}");
    }
    Ok(())
}

fn cmd_eval_rank(embeddings: &Path, labels: &Path, k: usize, metric: MetricArg) -> Result<()> {
    let emb = load_embeddings(embeddings, FormatArg::Text)?;
    let labels = LabelSet::load(open(labels)?, &labels.display().to_string())?;
    let (vectors, ys, _) = labeled_vectors(&emb, &labels)?;
    let queries: Vec<usize> = (0..vectors.len()).collect();
    let result = map_at_k(&vectors, &ys, &queries, k, metric.into());
    println!("k = {k}");
    println!("queries = {}", result.queries_evaluated);
    println!("queries_skipped = {}", result.queries_skipped);
    println!("map_at_{k} = {:.6}", result.map);
    Ok(())
}

fn cmd_nn(embeddings: &Path, query: &str, k: usize, metric: MetricArg) -> Result<()> {
    let emb = load_embeddings(embeddings, FormatArg::Text)?;
    let ranked = top_k_neighbors(&emb, query, k, metric.into())?;
    for (name, score) in ranked {
        println!("{name}\t{score:.6}");
    }
    Ok(())
}

fn cmd_export(embeddings: &Path, out: &Path, from: FormatArg, to: FormatArg) -> Result<()> {
    let emb = load_embeddings(embeddings, from)?;
    let mut w = create(out)?;
    match to {
        FormatArg::Text => write_embeddings_text(&emb, &mut w)?,
        FormatArg::Binary => write_embeddings_binary(&emb, &mut w)?,
    }
    println!("rows = {}", emb.len());
    println!("dim = {}", emb.dim());
    Ok(())
}

fn cmd_info(graph: &Path, node_types: Option<&PathBuf>) -> Result<()> {
    let g = load_graph_resolved(graph, node_types)?;
    println!("nodes = {}", g.node_count());
    println!("edges = {}", g.edge_count());
    println!("node_types = {}", g.node_type_count());
    println!("edge_types = {}", g.edge_type_count());
    println!("heterogeneous = {}", g.validate_heterogeneous());
    let mut degrees: Vec<usize> = g.nodes().map(|v| g.out_degree(v)).collect();
    degrees.sort_unstable();
    let min = degrees.first().copied().unwrap_or(0);
    let max = degrees.last().copied().unwrap_or(0);
    let mean = if degrees.is_empty() {
        0.0
    } else {
        degrees.iter().sum::<usize>() as f64 / degrees.len() as f64
    };
    let median = if degrees.is_empty() {
        0
    } else {
        degrees[degrees.len() / 2]
    };
    println!("out_degree_min = {min}");
    println!("out_degree_median = {median}");
    println!("out_degree_mean = {mean:.2}");
    println!("out_degree_max = {max}");
    for e in g.edge_types() {
        let count = g.edges().filter(|(_, t, _)| *t == e).count();
        println!("edge_type[{}] = {count}", g.edge_type_name(e));
    }
    for t in 0..g.node_type_count() {
        let t = hinembed::graph::NodeTypeId(t as u16);
        let count = g.nodes().filter(|&v| g.node_type_of(v) == t).count();
        println!("node_type[{}] = {count}", g.node_type_name(t));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample {
            graph,
            node_types,
            trajectory,
            graph_out,
            out,
            seed,
            metapath,
            count,
            walks_per_node,
            max_walk_length,
            max_chain_length,
            min_count,
        } => {
            let scfg = SamplerConfig {
                walks_per_node,
                max_walk_length,
                max_chain_length,
                min_count,
                seed,
            };
            cmd_sample(
                graph.as_ref(),
                node_types.as_ref(),
                trajectory.as_ref(),
                graph_out.as_ref(),
                &out,
                metapath.as_ref(),
                count,
                scfg,
            )
        }
        Command::Train {
            graph,
            node_types,
            samples,
            config,
            out,
            checkpoint_dir,
            seed,
            batch_size,
            eta_embed,
            eta_dnn,
            neg,
            max_chain_length,
            max_iterations,
            convergence_tol,
            dim,
            hidden,
            pretrain_epochs,
            noise,
            keep_short_chains,
            max_grad_norm,
            threads,
        } => {
            let mut cfg = match &config {
                Some(path) => TrainConfig::load(open(path)?, &path.display().to_string())?,
                None => TrainConfig::default(),
            };
            // flags override the config file
            cfg.seed = seed;
            macro_rules! apply {
                ($($field:ident),*) => {
                    $(if let Some(v) = $field { cfg.$field = v; })*
                };
            }
            apply!(
                batch_size,
                eta_embed,
                eta_dnn,
                neg,
                max_chain_length,
                max_iterations,
                convergence_tol,
                dim,
                hidden,
                pretrain_epochs,
                keep_short_chains,
                max_grad_norm,
                threads
            );
            if let Some(v) = noise {
                cfg.set("noise", &v)?;
            }
            cfg.validate()?;
            cmd_train(
                &graph,
                node_types.as_ref(),
                samples.as_ref(),
                config.as_ref(),
                &out,
                checkpoint_dir.as_ref(),
                cfg,
            )
        }
        Command::EvalCluster {
            embeddings,
            labels,
            k,
            seed,
            restarts,
            assignments_out,
        } => cmd_eval_cluster(&embeddings, &labels, k, seed, restarts, assignments_out.as_ref()),
        Command::EvalClassify {
            embeddings,
            labels,
            seed,
            test_fraction,
            epochs,
            lr,
            l2,
        } => cmd_eval_classify(&embeddings, &labels, seed, test_fraction, epochs, lr, l2),
        Command::EvalRank {
            embeddings,
            labels,
            k,
            metric,
        } => cmd_eval_rank(&embeddings, &labels, k, metric),
        Command::Nn {
            embeddings,
            query,
            k,
            metric,
        } => cmd_nn(&embeddings, &query, k, metric),
        Command::Export {
            embeddings,
            out,
            from,
            to,
        } => cmd_export(&embeddings, &out, from, to),
        Command::Info { graph, node_types } => cmd_info(&graph, node_types.as_ref()),
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NonFinite(_) | Error::StaleTape { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help / --version are successes; everything else is a
            // usage error (exit 1)
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
