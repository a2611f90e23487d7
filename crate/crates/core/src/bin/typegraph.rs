use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use typegraph::metrics::{read_metrics_csv, write_metrics_csv, MetricRow};
use typegraph::report::{
    write_per_word_csv, write_sentence_types_csv, TypeMatrix, DEFAULT_FILTER,
};
use typegraph::{
    align, build_graph_with, compare_sentence_types, compute_metrics, dataset_summary,
    heatmap_by_lexical_type, induce_hierarchy, load_bundle, neighbor_word_distribution,
    parse_dataset, per_word_ntmr, table_by_sentence_type, write_bundle, Dataset,
    EmbeddingBundleF32, GraphOptions, MetricTableF64, NeighborGraph, SemanticType, SentenceLabel,
    SynthConfig, DEFAULT_K,
};

#[derive(Parser)]
#[command(name = "typegraph", version, about = "Neighbor-type analysis of contextual embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build kNN graphs and export them as JSON lines.
    BuildGraph(Common),
    /// Compute per-instance metric tables.
    Metrics(Common),
    /// Sentence-type table, type heatmap and per-word ratios.
    Aggregate(AggregateArgs),
    /// NTE means per label and Mann-Whitney comparisons.
    Compare(Common),
    /// Induce a type hierarchy from a heatmap.
    Hierarchy(HierarchyArgs),
    /// Generate a synthetic dataset with plain and masked bundles.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Annotation file (JSON lines).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Bundle directory, optionally named as NAME=DIR. Repeatable.
    #[arg(long = "bundle")]
    bundles: Vec<String>,
    /// Metric CSV written by `metrics`, as NAME=FILE. Repeatable; used
    /// instead of rebuilding graphs where a command allows it.
    #[arg(long = "metrics")]
    metric_files: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Labels admitted by per-type and per-word views. Repeatable.
    #[arg(long = "filter-label")]
    filter_label: Vec<String>,
    /// Keep nodes with fewer than k eligible neighbors; NTP is then divided
    /// by the actual out-degree.
    #[arg(long)]
    allow_deficit: bool,
}

#[derive(Args)]
struct AggregateArgs {
    #[command(flatten)]
    common: Common,
    /// Lemma whose neighbor words to break down. Repeatable.
    #[arg(long = "word")]
    words: Vec<String>,
    /// Peer lemma reported separately in the neighbor-word breakdown.
    #[arg(long = "peer")]
    peers: Vec<String>,
    /// Types reported individually; the rest are rolled up as `other`.
    #[arg(long = "focus-type")]
    focus_types: Vec<String>,
}

#[derive(Args)]
struct HierarchyArgs {
    #[command(flatten)]
    common: Common,
    /// Heatmap CSV to cluster instead of computing one.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Cells of --matrix are percentages.
    #[arg(long)]
    percent: bool,
    /// Output name used with --matrix.
    #[arg(long, default_value = "matrix")]
    name: String,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    lemmas_per_type: usize,
    #[arg(long, default_value_t = 12)]
    instances_per_lemma: usize,
    #[arg(long, default_value_t = 0.1)]
    within_type_sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    coercion_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    unrestricted_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    coercion_mix: f64,
    #[arg(long, default_value_t = 0.1)]
    masked_context_sigma: f64,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::BuildGraph(c) => cmd_build_graph(&c),
        Command::Metrics(c) => cmd_metrics(&c),
        Command::Aggregate(a) => cmd_aggregate(&a),
        Command::Compare(c) => cmd_compare(&c),
        Command::Hierarchy(h) => cmd_hierarchy(&h),
        Command::Synth(s) => cmd_synth(&s),
    }
}

fn split_named(spec: &str) -> (Option<&str>, &str) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (Some(name), path),
        _ => (None, spec),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

impl Common {
    fn dataset(&self) -> Result<Dataset> {
        let path = self.dataset.as_ref().context("--dataset is required")?;
        parse_dataset(path).with_context(|| format!("loading {}", path.display()))
    }

    fn filter(&self) -> Result<Vec<SentenceLabel>> {
        if self.filter_label.is_empty() {
            return Ok(DEFAULT_FILTER.to_vec());
        }
        self.filter_label
            .iter()
            .map(|s| s.parse().map_err(anyhow::Error::from))
            .collect()
    }

    /// Named bundles, loaded in argument order.
    fn bundles(&self) -> Result<Vec<(String, EmbeddingBundleF32)>> {
        self.bundles
            .iter()
            .map(|spec| {
                let (name, dir) = split_named(spec);
                let b: EmbeddingBundleF32 =
                    load_bundle(dir).with_context(|| format!("loading bundle {dir}"))?;
                let name = name.map_or_else(|| b.variant().graph_name(), str::to_string);
                Ok((name, b))
            })
            .collect()
    }

    fn graphs(&self, dataset: &Dataset) -> Result<Vec<(String, NeighborGraph)>> {
        let bundles = self.bundles()?;
        if bundles.is_empty() {
            bail!("at least one --bundle is required");
        }
        let opts = GraphOptions {
            k: self.k,
            allow_deficit: self.allow_deficit,
        };
        bundles
            .into_iter()
            .map(|(name, b)| {
                let corpus = align(&b, dataset)?;
                let g = build_graph_with(&corpus, opts)
                    .with_context(|| format!("building graph {name}"))?;
                eprintln!("{name}: {} nodes, k={}", g.len(), g.k());
                Ok((name, g))
            })
            .collect()
    }

    /// Metric rows per graph, from --metrics files when given, otherwise by
    /// building graphs from --bundle.
    fn metric_rows(&self, dataset: Option<&Dataset>) -> Result<Vec<(String, Vec<MetricRow<f64>>)>> {
        if !self.metric_files.is_empty() {
            return self
                .metric_files
                .iter()
                .map(|spec| {
                    let (name, path) = split_named(spec);
                    let name = name.map_or_else(
                        || {
                            Path::new(path)
                                .file_stem()
                                .map(|s| s.to_string_lossy().trim_start_matches("metrics_").to_string())
                                .unwrap_or_else(|| path.to_string())
                        },
                        str::to_string,
                    );
                    let f = File::open(path).with_context(|| format!("opening {path}"))?;
                    Ok((name, read_metrics_csv(BufReader::new(f))?))
                })
                .collect();
        }
        let dataset = dataset.context("--dataset is required with --bundle")?;
        self.graphs(dataset)?
            .into_iter()
            .map(|(name, g)| {
                let t: MetricTableF64 = compute_metrics(&g, dataset)?;
                Ok((name, t.rows))
            })
            .collect()
    }
}

fn cmd_build_graph(c: &Common) -> Result<()> {
    let dataset = c.dataset()?;
    for (name, g) in c.graphs(&dataset)? {
        let mut w = create(&c.out_dir, &format!("graph_{name}.jsonl"))?;
        g.write_jsonl(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_metrics(c: &Common) -> Result<()> {
    let dataset = c.dataset()?;
    let s = dataset_summary(&dataset);
    eprintln!("dataset: {} records {:?}", s.total, s.by_label);
    for (name, g) in c.graphs(&dataset)? {
        let t: MetricTableF64 = compute_metrics(&g, &dataset)?;
        let mut w = create(&c.out_dir, &format!("metrics_{name}.csv"))?;
        write_metrics_csv(&t, &mut w)?;
        w.flush()?;
        let mut m = create(&c.out_dir, &format!("metrics_{name}.meta.json"))?;
        serde_json::to_writer_pretty(&mut m, &t.meta())?;
        writeln!(m)?;
    }
    Ok(())
}

fn cmd_aggregate(a: &AggregateArgs) -> Result<()> {
    let c = &a.common;
    let dataset = c.dataset()?;
    let filter = c.filter()?;
    for (name, rows) in c.metric_rows(Some(&dataset))? {
        let mut w = create(&c.out_dir, &format!("sentence_types_{name}.csv"))?;
        write_sentence_types_csv(&table_by_sentence_type(&rows), &mut w)?;
        w.flush()?;

        let m = heatmap_by_lexical_type(&rows, &filter)?;
        if !m.absent_rows().is_empty() {
            eprintln!("{name}: no instances for {:?} under the label filter", m.absent_rows());
        }
        let mut w = create(&c.out_dir, &format!("heatmap_{name}.csv"))?;
        m.write_csv(&mut w)?;
        w.flush()?;

        let mut w = create(&c.out_dir, &format!("per_word_{name}.csv"))?;
        write_per_word_csv(&per_word_ntmr(&rows, &dataset, &filter)?, &mut w)?;
        w.flush()?;
    }

    if !a.words.is_empty() {
        let focus: Vec<SemanticType> = a
            .focus_types
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()?;
        let peers: Vec<&str> = a.peers.iter().map(String::as_str).collect();
        for (name, g) in c.graphs(&dataset)? {
            for word in &a.words {
                let peers: Vec<&str> = peers.iter().copied().filter(|p| p != word).collect();
                let d = neighbor_word_distribution(&g, &dataset, word, &peers, &focus)?;
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(create(&c.out_dir, &format!("neighbor_words_{name}_{word}.csv"))?);
                w.write_record(["target", "share"])?;
                for (p, s) in &d.peers {
                    w.write_record([p.as_str(), &format!("{s:.6}")])?;
                }
                for t in SemanticType::ALL {
                    w.write_record([&format!("type:{t}"), &format!("{:.6}", d.type_share(t))])?;
                }
                w.write_record(["other", &format!("{:.6}", d.other)])?;
                w.flush()?;
            }
        }
    }
    Ok(())
}

fn cmd_compare(c: &Common) -> Result<()> {
    let dataset = if c.metric_files.is_empty() {
        Some(c.dataset()?)
    } else {
        None
    };
    let tables: Vec<(String, MetricTableF64)> = c
        .metric_rows(dataset.as_ref())?
        .into_iter()
        .map(|(name, rows)| {
            (
                name,
                MetricTableF64 {
                    k: c.k,
                    denominator: typegraph::metrics::NtpDenominator::K,
                    rows,
                },
            )
        })
        .collect();
    let refs: Vec<(&str, &MetricTableF64)> = tables.iter().map(|(n, t)| (n.as_str(), t)).collect();
    let report = compare_sentence_types(&refs)?;
    let mut w = create(&c.out_dir, "comparison.csv")?;
    report.write_tests_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&c.out_dir, "nte_means.csv")?;
    report.write_means_csv(&mut w)?;
    w.flush()?;
    for t in &report.tests {
        println!("{:<8} {t}", t.graph);
    }
    Ok(())
}

fn cmd_hierarchy(h: &HierarchyArgs) -> Result<()> {
    let c = &h.common;
    let matrices: Vec<(String, TypeMatrix<f64>)> = match &h.matrix {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            vec![(h.name.clone(), TypeMatrix::read_csv(BufReader::new(f), h.percent)?)]
        }
        None => {
            let dataset = if c.metric_files.is_empty() {
                Some(c.dataset()?)
            } else {
                None
            };
            let filter = c.filter()?;
            c.metric_rows(dataset.as_ref())?
                .into_iter()
                .map(|(name, rows)| Ok((name, heatmap_by_lexical_type(&rows, &filter)?)))
                .collect::<Result<_>>()?
        }
    };
    for (name, m) in matrices {
        let d = induce_hierarchy(&m)?;
        let mut w = create(&c.out_dir, &format!("hierarchy_{name}.json"))?;
        serde_json::to_writer_pretty(&mut w, &d.to_json())?;
        writeln!(w)?;
        let groups: Vec<String> = d
            .cut(4)
            .iter()
            .map(|g| {
                let names: Vec<&str> = g.iter().map(|t| t.as_str()).collect();
                format!("{{{}}}", names.join(", "))
            })
            .collect();
        println!("{name}: first merge {:?}; 4 clusters {}", d.first_merge(), groups.join(" "));
    }
    Ok(())
}

fn cmd_synth(s: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        seed: s.seed,
        dim: s.dim,
        lemmas_per_type: s.lemmas_per_type,
        instances_per_lemma: s.instances_per_lemma,
        within_type_sigma: s.within_type_sigma,
        coercion_fraction: s.coercion_fraction,
        unrestricted_fraction: s.unrestricted_fraction,
        coercion_mix: s.coercion_mix,
        masked_context_sigma: s.masked_context_sigma,
    };
    let out = typegraph::generate::<f32>(&cfg)?;
    fs::create_dir_all(&s.out_dir)?;
    out.dataset.save(s.out_dir.join("dataset.jsonl"))?;
    write_bundle(&out.plain, s.out_dir.join("plain"))?;
    write_bundle(&out.masked, s.out_dir.join("masked"))?;
    let mut w = create(&s.out_dir, "synth_config.json")?;
    serde_json::to_writer_pretty(&mut w, &cfg)?;
    writeln!(w)?;
    eprintln!(
        "wrote {} records to {}",
        out.dataset.len(),
        s.out_dir.display()
    );
    Ok(())
}
