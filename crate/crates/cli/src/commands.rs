use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};

use slade_core::bench::{latency_bench, prefix_lengths};
use slade_core::config::SEED_ENV;
use slade_core::datasets::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use slade_core::datasets::inject::{inject_anomalies, InjectionConfig, InjectionMode};
use slade_core::datasets::{
    emaileu, jodie, load_edges, load_tags, node_map_path, save_edges, save_tags, signed, synth, tags_path,
    Dataset, StreamStats,
};
use slade_core::diagnostics::{gradcheck_suite, Fault, TOLERANCE};
use slade_core::score::{
    export_type_distributions, load_scores, mean_score_by_type, new_memory, save_scores, score_test_split,
    stream_inference, write_type_scores, write_type_series, InferenceConfig,
};
use slade_core::{train, MetricReport, RunConfig, ScoreRecord, TypeTag};

use crate::args::*;

/// An error caused by the invocation rather than the data; exits with 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Generate(a) => generate(a),
        Command::Inject(a) => inject(a),
        Command::Train(a) => train_cmd(a),
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::ExportDist(a) => export_dist(a),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn print_stats(stats: &StreamStats, out: Option<&Path>) -> Result<()> {
    println!(
        "{} edges, {} nodes, {} abnormal ({:.2} %)",
        stats.edges,
        stats.nodes,
        stats.abnormal_edges,
        100.0 * stats.anomaly_ratio
    );
    let json = serde_json::to_string_pretty(stats)?;
    println!("{json}");
    if let Some(p) = out {
        ensure_parent(p)?;
        fs::write(p, json + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<ExitCode> {
    let Dataset { stream, nodes } = match a.format {
        Format::Jodie => jodie::load_jodie_csv(&a.input)?,
        Format::Signed => signed::load_signed_network(&a.input, !a.no_reverse)?,
        Format::Emaileu => {
            let window = if a.no_window {
                None
            } else {
                Some(a.window.unwrap_or(emaileu::DEFAULT_ACTIVE_WINDOW))
            };
            emaileu::load_email_eu(&a.input, window)?
        }
    };
    ensure_parent(&a.output)?;
    save_edges(&stream, &a.output)?;
    let map = node_map_path(&a.output);
    nodes.write_csv(fs::File::create(&map).with_context(|| format!("writing {}", map.display()))?)?;
    print_stats(&StreamStats::of(&stream), a.stats.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn generate(a: GenerateArgs) -> Result<ExitCode> {
    let stream = synth::generate_normal_stream(a.nodes, a.edges, a.communities, a.seed)?;
    ensure_parent(&a.output)?;
    save_edges(&stream, &a.output)?;
    print_stats(&StreamStats::of(&stream), None)?;
    Ok(ExitCode::SUCCESS)
}

fn inject(a: InjectArgs) -> Result<ExitCode> {
    let base = load_edges(&a.input)?;
    let mode = match a.mode {
        Mode::Hijack => InjectionMode::Hijack,
        Mode::New => InjectionMode::New,
    };
    let cfg = InjectionConfig {
        mode,
        n_anomalous_nodes: a.anomalous_nodes,
        burst_destinations: a.burst_destinations,
        jitter_seconds: a.jitter_seconds,
        target_ratio: a.target_ratio,
        eval_region_fraction: a.eval_region_fraction,
        seed: a.seed,
    };
    let out = inject_anomalies(&base, &cfg)?;
    ensure_parent(&a.output)?;
    save_edges(&out.stream, &a.output)?;
    save_tags(&out.tags, &tags_path(&a.output))?;
    print_stats(&StreamStats::of(&out.stream), None)?;
    Ok(ExitCode::SUCCESS)
}

/// Defaults, then the file, then `SLADE_SEED`, then flags.
fn build_config(c: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => RunConfig::default(),
    };
    cfg.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref())
        .map_err(|e| UsageError(format!("{SEED_ENV}: {e}")))?;
    for kv in &c.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| UsageError(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v).map_err(|e| UsageError(e.to_string()))?;
    }
    if let Some(seed) = c.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    Ok(cfg)
}

fn train_cmd(a: TrainArgs) -> Result<ExitCode> {
    let mut cfg = build_config(&a.config)?;
    if let Some(d) = a.data {
        cfg.data = Some(d);
    }
    if let Some(d) = a.output_dir {
        cfg.output_dir = d;
    }
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.train.lr = lr;
    }
    if let Some(b) = a.batch_size {
        cfg.train.batch_size = b;
    }
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let data = cfg
        .data
        .clone()
        .ok_or_else(|| UsageError("no training data: pass --data or set `data`".into()))?;
    let stream = load_edges(&data)?;
    let (train_part, _, _) = stream.chronological_split(cfg.split)?;
    log::info!("training on {} of {} edges", train_part.len(), stream.len());

    let mut model = slade_core::Slade::new(cfg.model.clone(), cfg.seed)?;
    let report = train(&mut model, &train_part, &cfg.train)?;

    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let ckpt = cfg.output_dir.join("model.ckpt");
    // run locations stay out so the bytes depend only on the setup and seed
    let stored = RunConfig {
        data: None,
        output_dir: RunConfig::default().output_dir,
        ..cfg.clone()
    };
    save_checkpoint(&ckpt, &stored, &model, None)?;
    report.save_csv(&cfg.output_dir.join("losses.csv"))?;
    fs::write(cfg.output_dir.join("config.txt"), cfg.to_text())?;
    if let Some(last) = report.epoch_means().last() {
        println!("trained {} epochs, final mean loss {last:.6}", cfg.train.epochs);
    }
    println!("checkpoint {}", ckpt.display());
    Ok(ExitCode::SUCCESS)
}

fn open_checkpoint(path: &Path) -> Result<Checkpoint> {
    load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn score_records(ck: &Checkpoint, data: &Path, split: Split, cfg: &InferenceConfig) -> Result<Vec<ScoreRecord>> {
    let stream = load_edges(data)?;
    let records = match split {
        Split::Test => score_test_split(&ck.model, &stream, ck.config.split, cfg)?,
        Split::All => {
            let mut memory = new_memory(&ck.model);
            stream_inference(&ck.model, &mut memory, &stream.edges, 0, cfg)?
        }
    };
    Ok(records)
}

fn score(a: ScoreArgs) -> Result<ExitCode> {
    let ck = open_checkpoint(&a.checkpoint)?;
    let mut inference = ck.config.inference;
    if let Some(b) = a.batch_size {
        if b == 0 {
            return Err(UsageError("--batch-size must be at least 1".into()).into());
        }
        inference.batch_size = b;
    }
    inference.score_destinations |= a.score_destinations;
    let records = score_records(&ck, &a.data, a.split, &inference)?;
    ensure_parent(&a.output)?;
    save_scores(&records, &a.output)?;
    println!("{} scores written to {}", records.len(), a.output.display());
    Ok(ExitCode::SUCCESS)
}

fn eval(a: EvalArgs) -> Result<ExitCode> {
    fs::create_dir_all(&a.output_dir).with_context(|| format!("creating {}", a.output_dir.display()))?;
    let records = match (&a.scores, &a.checkpoint, &a.data) {
        (Some(s), _, _) => load_scores(s)?,
        (None, Some(c), Some(d)) => {
            let ck = open_checkpoint(c)?;
            let r = score_records(&ck, d, a.split, &ck.config.inference)?;
            save_scores(&r, &a.output_dir.join("scores.csv"))?;
            r
        }
        _ => return Err(UsageError("pass --scores, or --checkpoint with --data".into()).into()),
    };
    let report = MetricReport::from_records(&records)?;
    report.save_json(&a.output_dir.join("metrics.json"))?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn bench(a: BenchArgs) -> Result<ExitCode> {
    if a.repeats == 0 {
        return Err(UsageError("--repeats must be at least 1".into()).into());
    }
    if a.prefixes.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(UsageError("prefix fractions must lie in (0, 1]".into()).into());
    }
    let ck = open_checkpoint(&a.checkpoint)?;
    let stream = load_edges(&a.data)?;
    let initial = ck.memory.clone().unwrap_or_else(|| new_memory(&ck.model));
    let prefixes = prefix_lengths(stream.len(), &a.prefixes);
    let report = latency_bench(&ck.model, &initial, &stream.edges, &prefixes, a.repeats)?;
    ensure_parent(&a.output)?;
    let mut w = fs::File::create(&a.output).with_context(|| format!("writing {}", a.output.display()))?;
    use std::io::Write;
    let r2 = report.r_squared.map(|r| r.to_string()).unwrap_or_default();
    writeln!(w, "n_edges,total_s,per_edge_s,fit_r2")?;
    for row in &report.rows {
        writeln!(w, "{},{},{},{}", row.n_edges, row.total_seconds, row.per_edge_seconds, r2)?;
    }
    match report.r_squared {
        Some(r) => println!("R^2 = {r:.6}"),
        None => println!("R^2 = n/a (fewer than two prefixes)"),
    }
    if let Some(ratio) = report.per_edge_ratio() {
        println!("per-edge time ratio last/first = {ratio:.3}");
    }
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(a: GradcheckArgs) -> Result<ExitCode> {
    let fault = a.fault.map(|FaultArg::SignFlip| Fault::SignFlip);
    let checks = gradcheck_suite(a.seed, fault)?;
    let width = checks.iter().map(|c| c.component.len()).max().unwrap_or(0);
    for c in &checks {
        println!(
            "{:<width$}  max_rel_error {:.3e}  {}",
            c.component,
            c.max_rel_error,
            if c.passed { "ok" } else { "FAIL" }
        );
    }
    if let Some(p) = &a.output {
        ensure_parent(p)?;
        fs::write(p, serde_json::to_string_pretty(&checks)? + "\n")?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        eprintln!("{failed} of {} components exceed {TOLERANCE:e}", checks.len());
        return Ok(ExitCode::from(1));
    }
    println!("all {} components below {TOLERANCE:e}", checks.len());
    Ok(ExitCode::SUCCESS)
}

fn export_dist(a: ExportArgs) -> Result<ExitCode> {
    let records = load_scores(&a.scores)?;
    if records.is_empty() {
        bail!("score file {} holds no records", a.scores.display());
    }
    let tags: Vec<TypeTag> = match &a.tags {
        Some(p) if p.exists() => load_tags(p)?,
        Some(p) => {
            log::warn!("tags file {} not found; exporting every edge as NORMAL", p.display());
            Vec::new()
        }
        None => {
            log::warn!("no tags file given; exporting every edge as NORMAL");
            Vec::new()
        }
    };
    let rows = export_type_distributions(&records, &tags);
    fs::create_dir_all(&a.output_dir)?;
    let open = |name: &str| -> Result<fs::File> {
        let p: PathBuf = a.output_dir.join(name);
        fs::File::create(&p).with_context(|| format!("writing {}", p.display()))
    };
    write_type_scores(&rows, open("type_scores.csv")?)?;
    write_type_series(&rows, open("type_series.csv")?)?;
    for (tag, mean) in mean_score_by_type(&rows) {
        println!("{tag}: mean score {mean:.6}");
    }
    Ok(ExitCode::SUCCESS)
}
