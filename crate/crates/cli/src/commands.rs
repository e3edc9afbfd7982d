use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

use surgnn::dataio::{load_manifest, validate_dataset, Mode, Split};
use surgnn::eval::{evaluate_model, format_table, gaussian_baseline, MetricsReport};
use surgnn::explain::{
    export_embeddings, pca_project, read_embeddings_csv, write_embeddings_csv,
    write_projection_csv, EmbeddingTable,
};
use surgnn::features::{extract_dataset, read_feature_table, write_feature_table, FeatureConfig};
use surgnn::gnn::{load_checkpoint, save_checkpoint};
use surgnn::graph::{build_graph_set, load_graph_set, save_graph_set, EdgePolicy, GraphEntry};
use surgnn::synth::{generate_dataset, SynthSpec};
use surgnn::train::{
    adasyn_balance, category_labels, lift_synthetic_graph, train_ssl, train_supervised,
    write_history_csv, TrainConfig,
};

use crate::runlog::RunManifest;
use crate::{Cli, Command, TrainOverrides};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of clips.
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "2D")]
    pub mode: Mode,
    /// Novice, intermediate and expert shares, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub proportions: Option<Vec<f64>>,
    #[arg(long)]
    pub frames_per_phase: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Manifest file or its directory.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Feature table CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildGraphsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Output directory (graphs, index.json, scaler.json).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub temporal_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    pub cooccurrence_weight: f64,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    /// Graph directory written by `build-graphs`.
    #[arg(long)]
    pub graphs: PathBuf,
    #[arg(long, default_value = "Overall")]
    pub category: String,
    #[arg(long, default_value_t = 7)]
    pub k: usize,
    /// Output graph directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Graph directory written by `build-graphs`.
    #[arg(long)]
    pub graphs: PathBuf,
    /// Encoder checkpoint (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Loss history CSV [default: <out stem>.history.csv].
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Graph directory written by `build-graphs`.
    #[arg(long)]
    pub graphs: PathBuf,
    #[arg(long, default_value = "Overall")]
    pub category: String,
    /// Model checkpoint (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Encoder checkpoint to start from.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Train only the linear head.
    #[arg(long)]
    pub freeze_encoder: bool,
    /// Skip ADASYN oversampling.
    #[arg(long)]
    pub no_balance: bool,
    /// Loss history CSV [default: <out stem>.history.csv].
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Graph directory written by `build-graphs`.
    #[arg(long)]
    pub graphs: PathBuf,
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Defaults to the checkpoint's category.
    #[arg(long)]
    pub category: Option<String>,
    /// Only clips of this mode.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Report JSON; the text table goes next to it with a .txt extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Dataset manifest (file or directory).
    #[arg(long, conflicts_with = "graphs", required_unless_present = "graphs")]
    pub manifest: Option<PathBuf>,
    /// Graph directory.
    #[arg(long)]
    pub graphs: Option<PathBuf>,
    #[arg(long, default_value = "Overall")]
    pub category: String,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// train, val, test or all.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Graph directory written by `build-graphs`.
    #[arg(long)]
    pub graphs: PathBuf,
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Only clips of this split.
    #[arg(long)]
    pub split: Option<Split>,
    /// Category whose score labels each row [default: the checkpoint's].
    #[arg(long)]
    pub category: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Embedding CSV written by `embed`.
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Project node rows too, not only graph rows.
    #[arg(long)]
    pub all_rows: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn dispatch(cli: &Cli, args: Vec<String>) -> Result<()> {
    let seed = cli.seed;
    let (name, out, inputs): (&str, PathBuf, Vec<PathBuf>) = match &cli.command {
        Command::Synth(a) => {
            synth(a, seed)?;
            ("synth", a.out.clone(), vec![])
        }
        Command::Extract(a) => {
            extract(a)?;
            ("extract", a.out.clone(), vec![a.manifest.clone()])
        }
        Command::BuildGraphs(a) => {
            build_graphs(a)?;
            (
                "build-graphs",
                a.out.clone(),
                vec![a.manifest.clone(), a.features.clone()],
            )
        }
        Command::Balance(a) => {
            balance(a, seed)?;
            ("balance", a.out.clone(), vec![a.graphs.clone()])
        }
        Command::Pretrain(a) => {
            pretrain(a, seed)?;
            let mut inputs = vec![a.graphs.clone()];
            inputs.extend(a.overrides.config.clone());
            ("pretrain", a.out.clone(), inputs)
        }
        Command::Train(a) => {
            train(a, seed)?;
            let mut inputs = vec![a.graphs.clone()];
            inputs.extend(a.init.clone());
            inputs.extend(a.overrides.config.clone());
            ("train", a.out.clone(), inputs)
        }
        Command::Evaluate(a) => {
            evaluate(a)?;
            (
                "evaluate",
                a.out.clone(),
                vec![a.graphs.clone(), a.model.clone()],
            )
        }
        Command::Baseline(a) => {
            baseline(a, seed)?;
            let input = a
                .manifest
                .clone()
                .or(a.graphs.clone())
                .into_iter()
                .collect();
            ("baseline", a.out.clone(), input)
        }
        Command::Embed(a) => {
            embed(a)?;
            (
                "embed",
                a.out.clone(),
                vec![a.graphs.clone(), a.model.clone()],
            )
        }
        Command::Project(a) => {
            project(a)?;
            ("project", a.out.clone(), vec![a.embeddings.clone()])
        }
    };
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let manifest = RunManifest::new(name, args, seed, &input_refs)?;
    manifest.write_beside(&out)?;
    Ok(())
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        if !p.as_os_str().is_empty() {
            fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    create_parent(path)?;
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn synth(a: &SynthArgs, seed: u64) -> Result<()> {
    let mut spec = SynthSpec {
        n_clips: a.n,
        seed,
        mode: a.mode,
        ..Default::default()
    };
    if let Some(p) = &a.proportions {
        spec.class_proportions = [p[0], p[1], p[2]];
    }
    if let Some(f) = a.frames_per_phase {
        spec.frames_per_phase = f;
    }
    if let Some(n) = a.noise {
        spec.noise = n;
    }
    let manifest = generate_dataset(&spec, &a.out)?;
    println!(
        "wrote {} clips to {}",
        manifest.clips.len(),
        a.out.display()
    );
    Ok(())
}

fn extract(a: &ExtractArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let report = validate_dataset(&manifest);
    if !report.is_ok() {
        for v in &report.violations {
            eprintln!("{v}");
        }
        bail!(
            "dataset failed validation with {} violation(s)",
            report.violations.len()
        );
    }
    let (vectors, warnings) = extract_dataset(&manifest, &FeatureConfig::default())?;
    for w in &warnings {
        log::warn!("{w}");
    }
    write_feature_table(create(&a.out)?, &vectors)?;
    println!(
        "wrote {} feature vectors to {}",
        vectors.len(),
        a.out.display()
    );
    Ok(())
}

fn build_graphs(a: &BuildGraphsArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let file =
        File::open(&a.features).with_context(|| format!("opening {}", a.features.display()))?;
    let vectors = read_feature_table(file, &a.features)?;
    let policy = EdgePolicy {
        temporal_weight: a.temporal_weight,
        cooccurrence_weight: a.cooccurrence_weight,
    };
    let (set, scaler, warnings) = build_graph_set(&manifest, &vectors, &policy)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    save_graph_set(&a.out, &set)?;
    surgnn::canonical::write_json(&a.out.join("scaler.json"), &scaler)?;
    println!("wrote {} graphs to {}", set.graphs.len(), a.out.display());
    Ok(())
}

fn balance(a: &BalanceArgs, seed: u64) -> Result<()> {
    let mut set = load_graph_set(&a.graphs)?;
    let train = set.split(Split::Train);
    let labels = category_labels(&train, &a.category, &set.index.ordinal_scale)?;
    let pooled: Vec<Vec<f64>> = train.iter().map(|g| g.pooled_features()).collect();
    let out = adasyn_balance(&pooled, &labels, a.k, &mut surgnn::seeded_rng(seed))?;
    for w in &out.warnings {
        log::warn!("{w}");
    }
    let lifted: Vec<_> = out
        .synthetic
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let id = format!("{}~syn{k:04}", train[s.source].clip_id);
            lift_synthetic_graph(train[s.source], train[s.partner], s.lambda, id)
        })
        .collect();
    for g in lifted {
        set.index.graphs.push(GraphEntry {
            clip_id: g.clip_id.clone(),
            split: Split::Train,
            path: format!("{}.json", g.clip_id),
        });
        set.graphs.push(g);
    }
    save_graph_set(&a.out, &set)?;
    println!("added {} synthetic training graphs", out.synthetic.len());
    Ok(())
}

fn train_config(o: &TrainOverrides, seed: u64) -> Result<TrainConfig> {
    let mut cfg = match &o.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    cfg.seed = seed;
    if let Some(v) = o.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = o.lr0 {
        cfg.lr0 = v;
    }
    if let Some(v) = o.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = o.mask_fraction {
        cfg.mask_fraction = v;
    }
    if let Some(v) = o.edge_mask_fraction {
        cfg.edge_mask_fraction = v;
    }
    if let Some(v) = o.spectral_k {
        cfg.spectral_k = v;
    }
    if let Some(v) = o.joint_weight {
        cfg.joint_spectral_weight = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pretrain(a: &PretrainArgs, seed: u64) -> Result<()> {
    let cfg = train_config(&a.overrides, seed)?;
    let set = load_graph_set(&a.graphs)?;
    let (ckpt, history) = train_ssl(&set, &cfg)?;
    save_checkpoint(&a.out, &ckpt)?;
    let history_path = a
        .history
        .clone()
        .unwrap_or_else(|| sibling(&a.out, ".history.csv"));
    write_history_csv(create(&history_path)?, &history)?;
    if let (Some(first), Some(last)) = (history.first(), history.last()) {
        println!(
            "spectral loss {:.6} -> {:.6} over {} epochs",
            first.loss,
            last.loss,
            history.len()
        );
    }
    Ok(())
}

fn train(a: &TrainArgs, seed: u64) -> Result<()> {
    let mut cfg = train_config(&a.overrides, seed)?;
    cfg.freeze_encoder = a.freeze_encoder;
    if a.no_balance {
        cfg.balance = false;
    }
    let set = load_graph_set(&a.graphs)?;
    let init = a.init.as_deref().map(load_checkpoint).transpose()?;
    if let Some(init) = &init {
        cfg.spectral_k = init.spectral_k;
    }
    let run = train_supervised(&set, &cfg, &a.category, init.as_ref())?;
    for w in &run.warnings {
        log::warn!("{w}");
    }
    save_checkpoint(&a.out, &run.checkpoint)?;
    let history_path = a
        .history
        .clone()
        .unwrap_or_else(|| sibling(&a.out, ".history.csv"));
    write_history_csv(create(&history_path)?, &run.history)?;
    if let Some(last) = run.history.last() {
        println!(
            "final loss {:.6}, training accuracy {:.3} ({} synthetic graphs)",
            last.loss,
            last.accuracy.unwrap_or(f64::NAN),
            run.synthetic
        );
    }
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let set = load_graph_set(&a.graphs)?;
    let ckpt = load_checkpoint(&a.model)?;
    let category = match (&a.category, &ckpt.category) {
        (Some(c), _) => c.clone(),
        (None, Some(c)) => c.clone(),
        (None, None) => bail!("checkpoint has no category; pass --category"),
    };
    let report = evaluate_model(&ckpt, &set, a.split, &category, a.mode)?;
    report.save(&a.out)?;
    let table = format_table(std::slice::from_ref(&report));
    fs::write(a.out.with_extension("txt"), &table).with_context(|| "writing table")?;
    print!("{table}");
    Ok(())
}

fn parse_split(s: &str) -> Result<Option<Split>> {
    if s == "all" {
        return Ok(None);
    }
    s.parse::<Split>().map(Some).map_err(anyhow::Error::msg)
}

fn baseline(a: &BaselineArgs, seed: u64) -> Result<()> {
    let split = parse_split(&a.split)?;
    let (truth, scale): (Vec<i64>, _) = if let Some(m) = &a.manifest {
        let manifest = load_manifest(m)?;
        let truth = manifest
            .records()
            .filter(|r| split.is_none() || manifest.split_of(&r.clip_id) == split)
            .map(|r| {
                r.labels
                    .get(&a.category)
                    .copied()
                    .with_context(|| format!("clip {} has no label for {}", r.clip_id, a.category))
            })
            .collect::<Result<_>>()?;
        (truth, manifest.ordinal_scale)
    } else {
        let set = load_graph_set(a.graphs.as_deref().expect("clap enforces one input"))?;
        let graphs: Vec<_> = set
            .index
            .graphs
            .iter()
            .zip(&set.graphs)
            .filter(|(e, _)| split.is_none_or(|s| s == e.split))
            .map(|(_, g)| g)
            .collect();
        let classes = category_labels(&graphs, &a.category, &set.index.ordinal_scale)?;
        let scale = set.index.ordinal_scale;
        (
            classes.into_iter().map(|c| scale.score_of(c)).collect(),
            scale,
        )
    };
    let mut report: MetricsReport = gaussian_baseline(&truth, &scale, a.runs, seed)?;
    report.category = a.category.clone();
    report.save(&a.out)?;
    let table = format_table(std::slice::from_ref(&report));
    fs::write(a.out.with_extension("txt"), &table).with_context(|| "writing table")?;
    print!("{table}");
    Ok(())
}

fn embed(a: &EmbedArgs) -> Result<()> {
    let set = load_graph_set(&a.graphs)?;
    let ckpt = load_checkpoint(&a.model)?;
    let category = a.category.clone().or(ckpt.category.clone());
    let table = export_embeddings(&ckpt, &set, a.split, category.as_deref())?;
    write_embeddings_csv(create(&a.out)?, &table)?;
    println!(
        "wrote {} embedding rows to {}",
        table.rows.len(),
        a.out.display()
    );
    Ok(())
}

fn project(a: &ProjectArgs) -> Result<()> {
    let file =
        File::open(&a.embeddings).with_context(|| format!("opening {}", a.embeddings.display()))?;
    let table = read_embeddings_csv(file, &a.embeddings)?;
    let table: EmbeddingTable = if a.all_rows {
        table
    } else {
        table.graph_rows()
    };
    let projection = pca_project(&table, a.dim)?;
    write_projection_csv(create(&a.out)?, &projection)?;
    surgnn::canonical::write_json(
        &sibling(&a.out, ".variance.json"),
        &projection.explained_variance_ratio,
    )?;
    let shown: Vec<String> = projection
        .explained_variance_ratio
        .iter()
        .take(a.dim)
        .map(|v| format!("{v:.3}"))
        .collect();
    println!("explained variance: {}", shown.join(", "));
    Ok(())
}
