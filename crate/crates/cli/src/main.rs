//! `spikeplast` command-line interface.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on invalid
//! configuration or a checkpoint that does not match the configuration.

mod config;
mod export;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use spikeplast::data::{small_sample_subset, DatasetId, RawDataset, Split};
use spikeplast::error::CheckpointError;
use spikeplast::layers::Mechanisms;
use spikeplast::pipeline::{
    ablation::ablation_csv, append_metrics_csv, assign_votes, evaluate, run_ablation_series, standard_ablations,
    train_layerwise, Checkpoint, MetricsRecord, Phase,
};

use config::{ConfigError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "spikeplast", version, about = "Unsupervised spiking network trained with batched STDP")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train layer-wise, assign votes and evaluate on the test split.
    Train(RunArgs),
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train and evaluate with modules disabled.
    Ablate {
        /// Disabled modules per run, joined by '+', e.g. `asf+alic`; `none`
        /// is the full network. Defaults to the cumulative series.
        #[arg(long = "set")]
        sets: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write conv kernels and FC receptive fields as PGM images.
    ExportWeights {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "weights")]
        out: PathBuf,
        /// FC neurons to render.
        #[arg(long, default_value_t = 100)]
        fc_limit: usize,
    },
    /// Train on a few samples per class for several seeds.
    SmallSample {
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Module {
    Asf,
    Alic,
    Atb,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long, value_parser = parse_dataset)]
    dataset: Option<DatasetId>,
    /// Flat JSON object of dotted keys, e.g. `{"network.timesteps": 100}`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    train_limit: Option<usize>,
    #[arg(long)]
    test_limit: Option<usize>,
    #[arg(long)]
    conv_epochs: Option<usize>,
    #[arg(long)]
    fc_epochs: Option<usize>,
    /// Dataset root (overrides SPIKEPLAST_DATA).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    disable: Vec<Module>,
}

fn parse_dataset(s: &str) -> std::result::Result<DatasetId, String> {
    DatasetId::parse(s).ok_or_else(|| format!("unknown dataset {s:?} (mnist, fashion, cifar10)"))
}

fn disable(m: &mut Mechanisms, module: Module) {
    match module {
        Module::Asf => m.asf = false,
        Module::Alic => m.alic = false,
        Module::Atb => m.atb = false,
    }
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::resolve(self.dataset, self.config.as_deref())?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.per_class.is_some() {
            cfg.per_class = self.per_class;
        }
        if self.train_limit.is_some() {
            cfg.train_limit = self.train_limit;
        }
        if self.test_limit.is_some() {
            cfg.test_limit = self.test_limit;
        }
        if let Some(e) = self.conv_epochs {
            cfg.conv_epochs = e;
        }
        if let Some(e) = self.fc_epochs {
            cfg.fc_epochs = e;
        }
        if self.data_dir.is_some() {
            cfg.data_dir = self.data_dir.clone();
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        for &m in &self.disable {
            disable(&mut cfg.network.mechanisms, m);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_split(cfg: &RunConfig, split: Split) -> Result<RawDataset> {
    let dir = cfg.dataset_dir();
    let data = cfg
        .dataset
        .load(&dir, split)
        .with_context(|| format!("loading {} {:?} split from {}", cfg.dataset.name(), split, dir.display()))?;
    log::info!("{} {:?}: {} samples ({})", cfg.dataset.name(), split, data.len(), data.meta.checksum);
    Ok(data)
}

fn training_set(cfg: &RunConfig) -> Result<RawDataset> {
    let full = load_split(cfg, Split::Train)?;
    Ok(match (cfg.per_class, cfg.train_limit) {
        (Some(k), _) => small_sample_subset(&full, k, cfg.seed)?,
        (None, Some(n)) => full.head(n),
        (None, None) => full,
    })
}

fn test_set(cfg: &RunConfig) -> Result<RawDataset> {
    let full = load_split(cfg, Split::Test)?;
    Ok(match cfg.test_limit {
        Some(n) => full.head(n),
        None => full,
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_metrics(out: &Path, run: &str, m: &MetricsRecord) -> Result<()> {
    append_metrics_csv(&out.join("metrics.csv"), run, m)?;
    fs::write(out.join("confusion.csv"), m.confusion_csv())?;
    Ok(())
}

/// Full train-assign-evaluate run writing its artifacts to `out`.
fn train_run(cfg: &RunConfig, out: &Path, train: &RawDataset, test: &RawDataset) -> Result<MetricsRecord> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let start = Instant::now();
    let ckpt_path = out.join("checkpoint.bin");
    let epochs_csv = out.join("epochs.csv");
    let _ = fs::remove_file(&epochs_csv);
    fs::write(&epochs_csv, "phase,epoch,spikes,updates,wall_time_s\n")?;
    let mut conv_done = 0u32;
    let mut fc_done = 0u32;
    let network = train_layerwise(cfg.network.clone(), train, &cfg.train_config(), |net, r| {
        match r.phase {
            Phase::Conv => conv_done += 1,
            Phase::Fc => fc_done += 1,
        }
        log::info!("{:?} epoch {}: {} spikes, {} updates, {:.1}s", r.phase, r.epoch, r.spikes, r.updates, r.wall_time_s);
        let line = format!(
            "{},{},{},{},{:.3}\n",
            match r.phase {
                Phase::Conv => "conv",
                Phase::Fc => "fc",
            },
            r.epoch,
            r.spikes,
            r.updates,
            r.wall_time_s
        );
        fs::OpenOptions::new()
            .append(true)
            .open(&epochs_csv)
            .and_then(|mut f| std::io::Write::write_all(&mut f, line.as_bytes()))?;
        Checkpoint {
            network: net.clone(),
            seed: cfg.seed,
            conv_epochs_done: conv_done,
            fc_epochs_done: fc_done,
            votes: None,
        }
        .save(&ckpt_path)
    })?;
    let votes = assign_votes(&network, train, cfg.seed)?;
    let mut metrics = evaluate(&network, &votes, test, Split::Test, cfg.seed)?;
    metrics.epoch = cfg.fc_epochs;
    let ckpt = Checkpoint {
        network,
        seed: cfg.seed,
        conv_epochs_done: conv_done,
        fc_epochs_done: fc_done,
        votes: Some(votes),
    };
    ckpt.save(&ckpt_path)?;
    write_metrics(out, &format!("seed{}", cfg.seed), &metrics)?;
    let sizes = ckpt.votes.as_ref().map(|v| v.class_sizes()).unwrap_or_default();
    write_json(
        &out.join("summary.json"),
        &json!({
            "config": cfg,
            "spec_hash": ckpt.network.spec.hash_hex(),
            "train_samples": train.len(),
            "train_source": train.meta.source,
            "train_checksum": train.meta.checksum,
            "test_samples": test.len(),
            "accuracy": metrics.accuracy,
            "per_class_accuracy": metrics.per_class_accuracy,
            "neurons_per_class": sizes,
            "metrics": metrics,
            "wall_time_s": start.elapsed().as_secs_f64(),
        }),
    )?;
    Ok(metrics)
}

fn cmd_train(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let train = training_set(&cfg)?;
    let test = test_set(&cfg)?;
    let m = train_run(&cfg, &cfg.out, &train, &test)?;
    println!("test accuracy {:.4} on {} samples; artifacts in {}", m.accuracy, m.samples, cfg.out.display());
    Ok(())
}

fn cmd_small_sample(seeds: &[u64], args: &RunArgs) -> Result<()> {
    let mut cfg = args.resolve()?;
    if cfg.per_class.is_none() {
        cfg.per_class = Some(20);
    }
    let test = test_set(&cfg)?;
    let root = cfg.out.clone();
    let mut rows = Vec::new();
    for &seed in seeds {
        let mut c = cfg.clone();
        c.seed = seed;
        let train = training_set(&c)?;
        let m = train_run(&c, &root.join(format!("seed-{seed}")), &train, &test)?;
        println!("seed {seed}: {:.4}", m.accuracy);
        rows.push((seed, m.accuracy));
    }
    let mean = rows.iter().map(|r| r.1).sum::<f64>() / rows.len().max(1) as f64;
    let mut csv = String::from("seed,accuracy\n");
    for (s, a) in &rows {
        csv.push_str(&format!("{s},{a:.6}\n"));
    }
    fs::write(root.join("small_sample.csv"), csv)?;
    write_json(
        &root.join("summary.json"),
        &json!({ "config": cfg, "per_class": cfg.per_class, "seeds": seeds, "accuracy": rows.iter().map(|r| r.1).collect::<Vec<_>>(), "mean_accuracy": mean }),
    )?;
    println!("mean accuracy {mean:.4} over {} seeds", rows.len());
    Ok(())
}

fn parse_set(s: &str) -> Result<(String, Mechanisms)> {
    let mut m = Mechanisms::default();
    if s != "none" {
        for part in s.split('+') {
            let module = Module::from_str(part, true).map_err(|_| ConfigError(format!("unknown module {part:?} in set {s:?}")))?;
            disable(&mut m, module);
        }
    }
    let name = if s == "none" { "baseline".to_string() } else { format!("no-{}", s.replace('+', "-")) };
    Ok((name, m))
}

fn cmd_ablate(sets: &[String], seeds: &[u64], args: &RunArgs) -> Result<()> {
    let mut cfg = args.resolve()?;
    if cfg.per_class.is_none() && cfg.train_limit.is_none() {
        cfg.per_class = Some(20);
    }
    let series: Vec<(String, Mechanisms)> = if sets.is_empty() {
        standard_ablations().into_iter().map(|(n, m)| (n.to_string(), m)).collect()
    } else {
        sets.iter().map(|s| parse_set(s)).collect::<Result<_>>()?
    };
    for (name, m) in &series {
        spikeplast::pipeline::NetworkSpec {
            mechanisms: *m,
            ..cfg.network.clone()
        }
        .validate()
        .map_err(|e| ConfigError(format!("set {name}: {e}")))?;
    }
    let test = test_set(&cfg)?;
    fs::create_dir_all(&cfg.out)?;
    let mut rows = Vec::new();
    for &seed in seeds {
        let c = RunConfig { seed, ..cfg.clone() };
        let train = training_set(&c)?;
        let named: Vec<(&str, Mechanisms)> = series.iter().map(|(n, m)| (n.as_str(), *m)).collect();
        rows.extend(run_ablation_series(&c.network, &named, &[seed], &train, &test, &c.train_config())?);
    }
    fs::write(cfg.out.join("ablation.csv"), ablation_csv(&rows))?;
    let mut means = serde_json::Map::new();
    for (name, _) in &series {
        let accs: Vec<f64> = rows.iter().filter(|r| &r.name == name).map(|r| r.metrics.accuracy).collect();
        let mean = accs.iter().sum::<f64>() / accs.len().max(1) as f64;
        println!("{name}: {mean:.4}");
        means.insert(name.clone(), json!(mean));
    }
    write_json(&cfg.out.join("summary.json"), &json!({ "config": cfg, "seeds": seeds, "mean_accuracy": means, "runs": rows }))?;
    Ok(())
}

fn cmd_eval(checkpoint: &Path, args: &RunArgs) -> Result<()> {
    let explicit = args.config.is_some();
    let mut cfg = args.resolve()?;
    let expected = explicit.then(|| cfg.network.clone());
    let ckpt = Checkpoint::load(checkpoint, expected.as_ref()).with_context(|| format!("loading {}", checkpoint.display()))?;
    cfg.network = ckpt.network.spec.clone();
    if args.seed.is_none() {
        cfg.seed = ckpt.seed;
    }
    let votes = match &ckpt.votes {
        Some(v) => v.clone(),
        None => {
            log::info!("checkpoint has no voting table; assigning on the training split");
            assign_votes(&ckpt.network, &training_set(&cfg)?, cfg.seed)?
        }
    };
    let test = test_set(&cfg)?;
    let m = evaluate(&ckpt.network, &votes, &test, Split::Test, cfg.seed)?;
    fs::create_dir_all(&cfg.out)?;
    write_metrics(&cfg.out, &format!("eval-seed{}", cfg.seed), &m)?;
    write_json(&cfg.out.join("eval.json"), &json!({ "checkpoint": checkpoint, "spec_hash": ckpt.network.spec.hash_hex(), "metrics": m }))?;
    println!("test accuracy {:.4} on {} samples", m.accuracy, m.samples);
    Ok(())
}

fn cmd_export(checkpoint: &Path, out: &Path, fc_limit: usize) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint, None).with_context(|| format!("loading {}", checkpoint.display()))?;
    let net = &ckpt.network;
    let spec = &net.spec;
    fs::create_dir_all(out)?;
    let k = spec.kernel;
    // one tile per (output channel, input channel) pair
    let conv: Vec<&[f64]> = net.conv.weight_slice().chunks(k * k).collect();
    let (px, w, h) = export::tile_grid(&conv, k, k, spec.in_channels * 8);
    export::write_pgm(&out.join("conv_kernels.pgm"), &px, w, h)?;
    // FC receptive fields with pooled channels stacked vertically
    let (ph, pw) = (spec.pooled_height(), spec.pooled_width());
    let fc: Vec<&[f64]> = net.fc.weight_slice().chunks(spec.pooled_len()).take(fc_limit).collect();
    let (px, w, h) = export::tile_grid(&fc, spec.conv_channels * ph, pw, 20);
    export::write_pgm(&out.join("fc_weights.pgm"), &px, w, h)?;
    if let Some(v) = &ckpt.votes {
        let mut csv = String::from("neuron,class\n");
        for (j, a) in v.assignment.iter().enumerate() {
            csv.push_str(&format!("{j},{a}\n"));
        }
        fs::write(out.join("assignments.csv"), csv)?;
    }
    println!("wrote weight images to {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval { checkpoint, run } => cmd_eval(checkpoint, run),
        Command::Ablate { sets, seeds, run } => cmd_ablate(sets, seeds, run),
        Command::ExportWeights { checkpoint, out, fc_limit } => cmd_export(checkpoint, out, *fc_limit),
        Command::SmallSample { seeds, run } => cmd_small_sample(seeds, run),
    }
}

/// Configuration faults and checkpoint/spec mismatches exit with 2.
fn is_config_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<ConfigError>()
            || matches!(e.downcast_ref::<spikeplast::Error>(), Some(spikeplast::Error::Config(_)))
            || matches!(
                e.downcast_ref::<spikeplast::Error>(),
                Some(spikeplast::Error::Checkpoint(CheckpointError::HashMismatch { .. }))
            )
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}
