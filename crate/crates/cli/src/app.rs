//! Argument parsing and subcommand handlers.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use neca_core::cavnet::export_edge_list;
use neca_core::encoders::{encode_frequency, encode_onehot, Method};
use neca_core::evaluation::{calinski_harabasz, silhouette, LabeledEmbedding};
use neca_core::{HetNet, Network};
use serde_json::json;

use crate::compare::run_compare;
use crate::config::ConfigArgs;
use crate::datasets::{reload, DatasetArgs, LoadedDataset};
use crate::embedding_file::{read_embedding, write_embedding};
use crate::pipeline::{run_neca, RunMetadata};

#[derive(Debug, Parser)]
#[command(
    name = "neca",
    version,
    about = "Embed categorical datasets and compare encoders"
)]
pub struct Cli {
    /// Worker threads for parallel sections. Results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Onehot,
    Frequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Onehot,
    Frequency,
    Neca,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Onehot => Method::OneHot,
            MethodArg::Frequency => Method::Frequency,
            MethodArg::Neca => Method::Neca,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IndexArg {
    Ch,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NetworkArg {
    Inter,
    Intra,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download (or copy from a mirror) a dataset into the cache and print its path.
    Fetch {
        #[command(flatten)]
        data: DatasetArgs,
    },
    /// Train NECA and write per-object embeddings plus run metadata.
    Embed {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
        /// Metadata path (default: `<out>.meta.json`).
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// Repeat the run recorded in a metadata file; flags still override.
        #[arg(long, value_name = "META")]
        replay: Option<PathBuf>,
        /// Also write the trained parameters as JSON.
        #[arg(long, value_name = "FILE")]
        params_out: Option<PathBuf>,
        /// Print one JSON line per epoch to stderr.
        #[arg(long, short)]
        verbose: bool,
    },
    /// Encode with a baseline encoder.
    Encode {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long, value_enum)]
        method: Baseline,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Score an embedding file against the dataset's labels.
    Eval {
        #[arg(long)]
        embedding: PathBuf,
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["ch", "s"])]
        indices: Vec<IndexArg>,
        /// Also write the scores as JSON.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Compare encoders over several seeds.
    Compare {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["onehot", "frequency", "neca"])]
        methods: Vec<MethodArg>,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed0: u64,
        /// Also write every run and the ranked rows as JSON.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Write one of the two networks as a TSV edge list.
    ExportGraph {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long, value_enum)]
        network: NetworkArg,
        #[arg(long, default_value_t = 0.01)]
        beta_connect: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn default_metadata_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn load(data: &DatasetArgs) -> Result<LoadedDataset> {
    data.load().context("loading dataset")
}

fn labels_of(loaded: &LoadedDataset) -> Result<&[String]> {
    loaded
        .cad
        .labels()
        .ok_or_else(|| anyhow!("{} has no label column (use --label)", loaded.source.name))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn cmd_fetch(data: &DatasetArgs) -> Result<()> {
    let (manifest, path) = data.locate().context("fetching")?;
    let loaded = crate::datasets::load_with_manifest(&manifest, &path)?;
    println!("{}", path.display());
    eprintln!(
        "{}: n={} m={} classes={}",
        manifest.name,
        loaded.cad.n(),
        loaded.cad.m(),
        loaded
            .cad
            .labels()
            .map(|l| l.iter().collect::<std::collections::BTreeSet<_>>().len())
            .unwrap_or(0)
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_embed(
    data: &DatasetArgs,
    config: &ConfigArgs,
    out: &Path,
    metadata: Option<&Path>,
    replay: Option<&Path>,
    params_out: Option<&Path>,
    verbose: bool,
) -> Result<()> {
    let (loaded, cfg) = match replay {
        Some(meta_path) => {
            let meta = RunMetadata::read(meta_path).context("reading replay metadata")?;
            let cfg = config
                .resolve_over(meta.run_config()?)
                .context("configuration")?;
            let loaded = if data.dataset.is_some() {
                load(data)?
            } else {
                reload(&meta.dataset).context("loading recorded dataset")?
            };
            (loaded, cfg)
        }
        None => {
            let cfg = config.resolve().context("configuration")?;
            (load(data)?, cfg)
        }
    };
    let stderr = std::io::stderr();
    let run = run_neca(&loaded.cad, &cfg, |log| {
        if verbose {
            let _ = writeln!(
                stderr.lock(),
                "{}",
                serde_json::to_string(log).unwrap_or_default()
            );
        }
    })?;
    write_embedding(out, &run.outcome.embeddings.objects).context("writing embeddings")?;
    let meta = RunMetadata::new(&loaded.source, &loaded.cad, &cfg, &run);
    let meta_path = metadata
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_metadata_path(out));
    meta.write(&meta_path).context("writing metadata")?;
    if let Some(p) = params_out {
        let text = serde_json::to_string(&run.outcome.params)?;
        std::fs::write(p, text)
            .with_context(|| format!("writing parameters to {}", p.display()))?;
    }
    eprintln!(
        "{}: {} objects x {} dims, {} epochs ({}), final loss {:.6}, beta_inter {:.4}, beta_intra {:.4}",
        loaded.source.name,
        run.outcome.embeddings.objects.nrows(),
        run.outcome.embeddings.objects.ncols(),
        run.outcome.report.epochs_run,
        run.outcome.report.stop_reason,
        run.outcome.report.loss_history.last().copied().unwrap_or(f64::NAN),
        run.outcome.report.beta_inter,
        run.outcome.report.beta_intra,
    );
    Ok(())
}

fn cmd_encode(data: &DatasetArgs, method: Baseline, out: &Path) -> Result<()> {
    let loaded = load(data)?;
    let encoded = match method {
        Baseline::Onehot => encode_onehot(&loaded.cad),
        Baseline::Frequency => encode_frequency(&loaded.cad),
    };
    write_embedding(out, &encoded.vectors).context("writing embeddings")?;
    eprintln!(
        "{}: {} objects x {} dims ({})",
        loaded.source.name,
        encoded.n(),
        encoded.width(),
        encoded.method
    );
    Ok(())
}

fn cmd_eval(
    embedding: &Path,
    data: &DatasetArgs,
    indices: &[IndexArg],
    out: Option<&Path>,
) -> Result<()> {
    let vectors = read_embedding(embedding).context("reading embedding")?;
    let loaded = load(data)?;
    let labels = labels_of(&loaded)?;
    if vectors.nrows() != labels.len() {
        anyhow::bail!(
            "embedding has {} rows but {} has {} records",
            vectors.nrows(),
            loaded.source.name,
            labels.len()
        );
    }
    let emb = LabeledEmbedding::new(vectors, labels.to_vec()).context("evaluating")?;
    let mut report = serde_json::Map::new();
    report.insert("dataset".into(), json!(loaded.source.name));
    report.insert("embedding".into(), json!(embedding.display().to_string()));
    for idx in indices {
        match idx {
            IndexArg::Ch => {
                let ch = calinski_harabasz(&emb).context("evaluating CH")?;
                if ch.zero_within {
                    println!("CH\tinf\t(zero within-class scatter)");
                } else {
                    println!("CH\t{}", ch.value);
                }
                report.insert(
                    "ch".into(),
                    json!({ "value": (!ch.zero_within).then_some(ch.value), "zero_within": ch.zero_within }),
                );
            }
            IndexArg::S => {
                let s = silhouette(&emb).context("evaluating S")?;
                println!("S\t{}\tmicro={}", s.macro_avg, s.micro_avg);
                report.insert(
                    "s".into(),
                    json!({ "macro": s.macro_avg, "micro": s.micro_avg }),
                );
            }
        }
    }
    if let Some(p) = out {
        write_json(p, &serde_json::Value::Object(report)).context("writing scores")?;
    }
    Ok(())
}

fn cmd_compare(
    data: &DatasetArgs,
    config: &ConfigArgs,
    methods: &[MethodArg],
    runs: u64,
    seed0: u64,
    out: Option<&Path>,
) -> Result<()> {
    let cfg = config.resolve().context("configuration")?;
    let loaded = load(data)?;
    let mut selected: Vec<Method> = Vec::new();
    for m in methods {
        let m = Method::from(*m);
        if !selected.contains(&m) {
            selected.push(m);
        }
    }
    let result = run_compare(
        &loaded.cad,
        &loaded.source.name,
        &selected,
        runs as usize,
        seed0,
        &cfg,
    )
    .context("comparing")?;
    print!("{}", result.to_text());
    if let Some(p) = out {
        let value = json!({
            "dataset": result.dataset,
            "runs": result.runs,
            "summary": result.summary,
            "rows": result.records(),
        });
        write_json(p, &value).context("writing comparison")?;
    }
    Ok(())
}

fn cmd_export_graph(
    data: &DatasetArgs,
    network: NetworkArg,
    beta: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let loaded = load(data)?;
    let net = HetNet::build(&loaded.cad, beta, seed).context("building networks")?;
    let which = match network {
        NetworkArg::Inter => Network::Inter,
        NetworkArg::Intra => Network::Intra,
    };
    export_edge_list(&net, which, out).context("writing edge list")?;
    eprintln!(
        "{} {which} network: {} nodes, {} edges",
        loaded.source.name,
        net.nodes().len(),
        net.network(which).len()
    );
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        // a second call in the same process keeps the first pool, which is harmless
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match &cli.command {
        Command::Fetch { data } => cmd_fetch(data),
        Command::Embed {
            data,
            config,
            out,
            metadata,
            replay,
            params_out,
            verbose,
        } => cmd_embed(
            data,
            config,
            out,
            metadata.as_deref(),
            replay.as_deref(),
            params_out.as_deref(),
            *verbose,
        ),
        Command::Encode { data, method, out } => cmd_encode(data, *method, out),
        Command::Eval {
            embedding,
            data,
            indices,
            out,
        } => cmd_eval(embedding, data, indices, out.as_deref()),
        Command::Compare {
            data,
            config,
            methods,
            runs,
            seed0,
            out,
        } => cmd_compare(data, config, methods, *runs, *seed0, out.as_deref()),
        Command::ExportGraph {
            data,
            network,
            beta_connect,
            seed,
            out,
        } => cmd_export_graph(data, *network, *beta_connect, *seed, out),
    }
}

/// Parses `args` and runs the command: 0 on success, 1 on a runtime failure, 2 on a usage error.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "neca",
            "embed",
            "data.csv",
            "--out",
            "e.csv",
            "--seed",
            "3",
            "--heads",
            "2",
            "--head-dim",
            "4",
            "--beta-connect",
            "0.05",
            "--sigma",
            "2",
            "--epochs",
            "9",
            "--lr",
            "0.01",
            "--tol",
            "inf",
        ])
        .unwrap();
        match cli.command {
            Command::Embed { config, .. } => {
                let cfg = config.resolve().unwrap();
                assert_eq!(
                    (cfg.seed, cfg.heads, cfg.head_dim, cfg.epochs),
                    (3, 2, 4, 9)
                );
                assert_eq!(cfg.tol, f64::INFINITY);
                assert_eq!(cfg.beta_connect, 0.05);
            }
            _ => panic!("wrong subcommand"),
        }
        assert!(
            Cli::try_parse_from(["neca", "encode", "d.csv", "--method", "pca", "--out", "x"])
                .is_err()
        );
        assert!(Cli::try_parse_from(["neca", "compare", "d.csv", "--runs", "0"]).is_err());
    }
}
