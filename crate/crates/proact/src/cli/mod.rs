//! Command-line front end. Every invocation gets its own timestamped
//! directory under the output root, holding a replayable run manifest plus
//! the command's artifacts. Exit codes: 0 success, 1 runtime/backend
//! failure, 2 usage/config error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    self, corpus_stats, load_corpus, save_corpus, CorpusSample, ElementKind, Label, Split,
};
use crate::error::{Error, Result};
use crate::gateway::{Gateway, GatewayConfig};
use crate::promptcraft::{
    select_demonstrations, Demonstration, GenerationRun, Pipeline, PipelineRunner,
    SelectionCriterion, SelectionDirection, TemplateSet,
};
use crate::scoring::{
    point_biserial, score_batch, semantic_score, user_sim_score, Metric, ScoreReport,
    ScoringConfig, SemanticConfig, UserSimConfig,
};
use crate::simulation::{
    run_batch, AgentMode, Conversation, EpisodeConfig, SimulationStats, Simulator,
};

#[derive(Parser, Debug)]
#[command(name = "proact", version, about = "Proactive dialogue response generation and evaluation")]
pub struct Cli {
    /// Gateway config (TOML). Omit to run fully offline on stub backends.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root under which a per-run timestamped directory is created.
    #[arg(long, global = true, default_value = "runs")]
    pub output_root: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory of prompt template overrides (.txt files).
    #[arg(long, global = true)]
    pub templates: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Corpus inspection and preparation.
    Corpus {
        #[command(subcommand)]
        cmd: CorpusCmd,
    },
    /// Generate proactive responses for the corpus test split.
    Generate {
        #[arg(long)]
        corpus: PathBuf,
        /// direct | 3step | 3in1
        #[arg(long)]
        pipeline: String,
        /// fq | ai
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 0)]
        shots: usize,
        /// Demonstration selection as criterion-direction, e.g. sum-top,
        /// semantic-bottom, user-sim-top. Omitted: first k train samples.
        #[arg(long)]
        select: Option<String>,
        #[arg(long, default_value_t = 0.2)]
        temperature: f64,
        /// Cap on the number of test samples processed (0 = all).
        #[arg(long, default_value_t = 0)]
        limit: usize,
    },
    /// Score responses with the selected metrics.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        /// Output of `generate`; scores these responses instead of the
        /// corpus references.
        #[arg(long)]
        responses: Option<PathBuf>,
        /// semantic | user-sim | prompt | classifier (repeatable)
        #[arg(long = "metric")]
        metrics: Vec<String>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Simulated user replies per sample for the user-sim metric.
        #[arg(long, default_value_t = 5)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        limit: usize,
    },
    /// Point-biserial correlation of metric scores against binary labels.
    Correlate {
        /// ScoreReport JSONL produced by `evaluate`.
        #[arg(long)]
        reports: PathBuf,
        /// Corpus JSONL carrying valid/invalid labels, matched by id.
        #[arg(long)]
        labels: PathBuf,
    },
    /// Multi-turn episodes between a simulated user and an agent.
    Simulate {
        /// Seed queries, one per line. Alternative to --corpus.
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Corpus whose test-split queries seed the episodes.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// reactive | proactive-fq | proactive-ai
        #[arg(long)]
        mode: String,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 10)]
        max_turns: usize,
        #[arg(long, default_value_t = 0.2)]
        temperature: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum CorpusCmd {
    /// Token-count averages, overall and per element kind.
    Stats { corpus: PathBuf },
    /// Tag samples train/test, a fixed number of train samples per kind.
    Split {
        corpus: PathBuf,
        #[arg(long, default_value_t = 500)]
        train_per_kind: usize,
    },
    /// Drop samples outside the token-count bounds.
    Filter {
        corpus: PathBuf,
        #[arg(long, default_value_t = 0)]
        min_query_tokens: usize,
        #[arg(long, default_value_t = usize::MAX)]
        max_query_tokens: usize,
        #[arg(long, default_value_t = 0)]
        min_long_answer_tokens: usize,
    },
    /// Export train samples as instruction/response pairs.
    ExportSft {
        corpus: PathBuf,
        #[arg(long, default_value = "Answer the following query proactively: {query}")]
        instruction: String,
    },
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Usage/config problems exit 2; everything else is a runtime failure (1).
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidBounds { .. }
        | Error::Template(_)
        | Error::MissingPlaceholder(_)
        | Error::KTooLarge { .. }
        | Error::NotEnoughDemos { .. }
        | Error::MissingScores => 2,
        _ => 1,
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    version: &'static str,
    timestamp: String,
    args: Vec<String>,
    seed: u64,
    backend_profile_hash: String,
    gateway_config: &'a GatewayConfig,
}

/// Creates `<root>/<label>-<timestamp>[-<n>]`, dodging collisions.
fn make_run_dir(root: &Path, label: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(root)?;
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S%.3f");
    for attempt in 0.. {
        let name = if attempt == 0 {
            format!("{label}-{stamp}")
        } else {
            format!("{label}-{stamp}-{attempt}")
        };
        let dir = root.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = std::io::BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".to_string())
}

fn execute(cli: &Cli) -> Result<()> {
    let gateway_config = match &cli.config {
        Some(path) => GatewayConfig::from_file(path)?,
        None => GatewayConfig::offline(),
    };
    let gateway = gateway_config.build()?;
    let templates = match &cli.templates {
        Some(dir) => TemplateSet::from_dir(dir)?,
        None => TemplateSet::builtin(),
    };

    let label = match &cli.command {
        Command::Corpus { .. } => "corpus",
        Command::Generate { .. } => "generate",
        Command::Evaluate { .. } => "evaluate",
        Command::Correlate { .. } => "correlate",
        Command::Simulate { .. } => "simulate",
    };
    let run_dir = make_run_dir(&cli.output_root, label)?;
    write_json(
        &run_dir.join("manifest.json"),
        &RunManifest {
            version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Local::now().to_rfc3339(),
            args: std::env::args().collect(),
            seed: cli.seed,
            backend_profile_hash: gateway.profile().hash(),
            gateway_config: &gateway_config,
        },
    )?;
    println!("run directory: {}", run_dir.display());

    match &cli.command {
        Command::Corpus { cmd } => cmd_corpus(cmd, &run_dir, cli.seed),
        Command::Generate {
            corpus,
            pipeline,
            kind,
            shots,
            select,
            temperature,
            limit,
        } => cmd_generate(
            &gateway,
            &templates,
            &run_dir,
            corpus,
            pipeline,
            kind,
            *shots,
            select.as_deref(),
            *temperature,
            *limit,
        ),
        Command::Evaluate {
            corpus,
            responses,
            metrics,
            alpha,
            draws,
            limit,
        } => cmd_evaluate(
            &gateway,
            &templates,
            &run_dir,
            corpus,
            responses.as_deref(),
            metrics,
            *alpha,
            *draws,
            *limit,
        ),
        Command::Correlate { reports, labels } => cmd_correlate(&run_dir, reports, labels),
        Command::Simulate {
            queries,
            corpus,
            mode,
            episodes,
            max_turns,
            temperature,
        } => cmd_simulate(
            &gateway,
            &templates,
            &run_dir,
            queries.as_deref(),
            corpus.as_deref(),
            mode,
            *episodes,
            *max_turns,
            *temperature,
            cli.seed,
        ),
    }
}

fn cmd_corpus(cmd: &CorpusCmd, run_dir: &Path, seed: u64) -> Result<()> {
    match cmd {
        CorpusCmd::Stats { corpus } => {
            let samples = load_corpus(corpus)?;
            let stats = corpus_stats(&samples)?;
            println!("samples            {}", stats.n_samples);
            println!("avg query tokens   {:.3}", stats.avg_query_tokens);
            println!("avg response tokens {:.3}", stats.avg_response_tokens);
            println!("avg element tokens {:.3}", stats.avg_element_tokens);
            for (kind, ks) in &stats.per_kind {
                println!(
                    "  {}: n={} query={:.3} response={:.3} element={:.3}",
                    kind.short(),
                    ks.n_samples,
                    ks.avg_query_tokens,
                    ks.avg_response_tokens,
                    ks.avg_element_tokens
                );
            }
            write_json(&run_dir.join("report.json"), &stats)
        }
        CorpusCmd::Split {
            corpus,
            train_per_kind,
        } => {
            let samples = load_corpus(corpus)?;
            let tagged = corpus::split_corpus(&samples, *train_per_kind, seed)?;
            let out = run_dir.join("corpus.jsonl");
            save_corpus(&tagged, &out)?;
            let train = tagged.iter().filter(|s| s.split == Split::Train).count();
            let report = serde_json::json!({
                "train": train,
                "test": tagged.len() - train,
                "train_per_kind": train_per_kind,
                "seed": seed,
                "output": out,
            });
            println!("train {} / test {}", train, tagged.len() - train);
            write_json(&run_dir.join("report.json"), &report)
        }
        CorpusCmd::Filter {
            corpus,
            min_query_tokens,
            max_query_tokens,
            min_long_answer_tokens,
        } => {
            let samples = load_corpus(corpus)?;
            let kept = corpus::filter_corpus(
                &samples,
                *min_query_tokens,
                *max_query_tokens,
                *min_long_answer_tokens,
            )?;
            let out = run_dir.join("corpus.jsonl");
            save_corpus(&kept, &out)?;
            let report = serde_json::json!({
                "input": samples.len(),
                "kept": kept.len(),
                "dropped": samples.len() - kept.len(),
                "output": out,
            });
            println!("kept {} of {}", kept.len(), samples.len());
            write_json(&run_dir.join("report.json"), &report)
        }
        CorpusCmd::ExportSft {
            corpus,
            instruction,
        } => {
            let samples = load_corpus(corpus)?;
            let train: Vec<CorpusSample> = samples
                .into_iter()
                .filter(|s| s.split == Split::Train)
                .collect();
            if train.is_empty() {
                return Err(Error::EmptyCorpus);
            }
            let out = run_dir.join("sft.jsonl");
            let n = corpus::export_sft(&train, instruction, &out)?;
            println!("exported {n} records");
            write_json(
                &run_dir.join("report.json"),
                &serde_json::json!({ "exported": n, "output": out }),
            )
        }
    }
}

/// Test-split samples of the requested kind; falls back to every sample of
/// that kind when the corpus carries no split tags.
fn test_pool(samples: &[CorpusSample], kind: ElementKind) -> Vec<&CorpusSample> {
    let of_kind: Vec<&CorpusSample> = samples
        .iter()
        .filter(|s| s.response.element_kind == Some(kind))
        .collect();
    let test: Vec<&CorpusSample> = of_kind
        .iter()
        .copied()
        .filter(|s| s.split == Split::Test)
        .collect();
    if test.is_empty() {
        of_kind
    } else {
        test
    }
}

/// One generated response, alongside the sample it answers. A failed
/// pipeline run is recorded, not fatal to the batch.
#[derive(Debug, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub sample_id: String,
    pub query: String,
    pub run: Option<GenerationRun>,
    pub error: Option<String>,
}

fn parse_selection(s: &str) -> Result<(SelectionCriterion, SelectionDirection)> {
    let (criterion, direction) = s
        .rsplit_once('-')
        .ok_or_else(|| Error::Config(format!("bad selection spec: {s} (want criterion-direction)")))?;
    let direction = match direction {
        "top" => SelectionDirection::Top,
        "bottom" => SelectionDirection::Bottom,
        other => return Err(Error::Config(format!("unknown selection direction: {other}"))),
    };
    Ok((criterion.parse()?, direction))
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    gateway: &Gateway,
    templates: &TemplateSet,
    run_dir: &Path,
    corpus: &Path,
    pipeline: &str,
    kind: &str,
    shots: usize,
    select: Option<&str>,
    temperature: f64,
    limit: usize,
) -> Result<()> {
    let pipeline: Pipeline = pipeline.parse()?;
    let kind: ElementKind = kind.parse()?;
    let samples = load_corpus(corpus)?;
    let mut targets = test_pool(&samples, kind);
    if limit > 0 {
        targets.truncate(limit);
    }
    if targets.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let demos = if shots == 0 {
        Vec::new()
    } else {
        let pool: Vec<&CorpusSample> = samples
            .iter()
            .filter(|s| s.split == Split::Train && s.response.element_kind == Some(kind))
            .collect();
        if pool.len() < shots {
            return Err(Error::NotEnoughDemos {
                available: pool.len(),
                needed: shots,
            });
        }
        let mut demos: Vec<Demonstration> = pool
            .iter()
            .map(|s| Demonstration::new(s.query.clone(), s.response.clone()))
            .collect();
        match select {
            None => {
                demos.truncate(shots);
                demos
            }
            Some(spec) => {
                let (criterion, direction) = parse_selection(spec)?;
                // score the pool so the extremes can be picked
                for (demo, s) in demos.iter_mut().zip(&pool) {
                    let semantic = semantic_score(
                        gateway,
                        &s.query,
                        &s.response,
                        kind,
                        &SemanticConfig::default(),
                    )?;
                    let user_sim = user_sim_score(
                        gateway,
                        templates,
                        &s.response,
                        &Conversation::seeded(&s.query),
                        &UserSimConfig::default(),
                    )?;
                    *demo = demo.clone().with_scores(semantic, user_sim);
                }
                select_demonstrations(&demos, shots, criterion, direction)?
            }
        }
    };

    let runner = PipelineRunner::new(gateway, templates).temperature(temperature);
    let mut records = Vec::with_capacity(targets.len());
    for s in &targets {
        let run = match pipeline {
            Pipeline::Direct => runner.run_direct(&s.query, kind, &demos, shots),
            Pipeline::ThreeStep => runner.run_three_step(&s.query, kind, &demos, shots),
            Pipeline::ThreeInOne => runner.run_three_in_one(&s.query, kind, &demos, shots),
        };
        records.push(match run {
            Ok(run) => GenerationRecord {
                sample_id: s.id.clone(),
                query: s.query.clone(),
                run: Some(run),
                error: None,
            },
            Err(e) => GenerationRecord {
                sample_id: s.id.clone(),
                query: s.query.clone(),
                run: None,
                error: Some(e.to_string()),
            },
        });
    }
    let ok = records.iter().filter(|r| r.error.is_none()).count();
    write_jsonl(&run_dir.join("responses.jsonl"), &records)?;
    println!("generated {ok}/{} responses", records.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    gateway: &Gateway,
    templates: &TemplateSet,
    run_dir: &Path,
    corpus: &Path,
    responses: Option<&Path>,
    metrics: &[String],
    alpha: f64,
    draws: usize,
    limit: usize,
) -> Result<()> {
    let metrics: Vec<Metric> = metrics
        .iter()
        .map(|m| m.parse())
        .collect::<Result<Vec<_>>>()?;
    if metrics.is_empty() {
        return Err(Error::Config("no metrics selected (pass --metric)".into()));
    }
    let mut samples = load_corpus(corpus)?;
    if let Some(path) = responses {
        // score generated responses in place of the corpus references
        let records: Vec<GenerationRecord> = read_jsonl(path)?;
        let by_id: BTreeMap<&str, &GenerationRecord> =
            records.iter().map(|r| (r.sample_id.as_str(), r)).collect();
        samples.retain_mut(|s| match by_id.get(s.id.as_str()) {
            Some(r) => match &r.run {
                Some(run) => {
                    s.response = run.final_response.clone();
                    true
                }
                None => false,
            },
            None => false,
        });
    }
    if limit > 0 {
        samples.truncate(limit);
    }
    if samples.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let cfg = ScoringConfig {
        semantic: SemanticConfig {
            alpha,
            ..SemanticConfig::default()
        },
        user_sim: UserSimConfig {
            n: draws,
            ..UserSimConfig::default()
        },
    };
    let reports = score_batch(gateway, templates, &samples, &metrics, &cfg)?;
    write_jsonl(&run_dir.join("reports.jsonl"), &reports)?;

    // summary: mean per element kind
    let mut summary = Vec::new();
    println!(
        "{:<6} {:>4} {:>15} {:>16} {:>20} {:>10}",
        "kind", "n", "Classification", "User Simulation", "Semantic Similarity", "Num Token"
    );
    for kind in ElementKind::ALL {
        let rs: Vec<&ScoreReport> = reports.iter().filter(|r| r.kind == kind).collect();
        if rs.is_empty() {
            continue;
        }
        let classification = mean(rs.iter().filter_map(|r| r.classifier_prob));
        let user_sim = mean(rs.iter().filter_map(|r| r.user_sim));
        let semantic = mean(rs.iter().filter_map(|r| r.semantic));
        let prompt_based = mean(rs.iter().filter_map(|r| r.prompt_based));
        let num_token = mean(rs.iter().map(|r| r.n_tokens as f64));
        println!(
            "{:<6} {:>4} {:>15} {:>16} {:>20} {:>10}",
            kind.short(),
            rs.len(),
            fmt_opt(classification),
            fmt_opt(user_sim),
            fmt_opt(semantic),
            fmt_opt(num_token)
        );
        summary.push(serde_json::json!({
            "kind": kind,
            "n": rs.len(),
            "classification": classification,
            "user_sim": user_sim,
            "semantic": semantic,
            "prompt_based": prompt_based,
            "num_token": num_token,
        }));
    }
    write_json(&run_dir.join("summary.json"), &summary)?;
    Ok(())
}

fn cmd_correlate(run_dir: &Path, reports: &Path, labels: &Path) -> Result<()> {
    let reports: Vec<ScoreReport> = read_jsonl(reports)?;
    if reports.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let corpus = load_corpus(labels)?;
    let label_by_id: BTreeMap<&str, Option<Label>> =
        corpus.iter().map(|s| (s.id.as_str(), s.label)).collect();
    let mut labeled: Vec<(&ScoreReport, bool)> = Vec::with_capacity(reports.len());
    for r in &reports {
        let label = label_by_id
            .get(r.sample_id.as_str())
            .copied()
            .flatten()
            .ok_or_else(|| Error::Config(format!("no label for sample {}", r.sample_id)))?;
        labeled.push((r, label == Label::Valid));
    }

    // fixed row order; each cell is the point-biserial correlation over
    // the reports that carry both a label and that metric's score
    type Extract = fn(&ScoreReport) -> Option<f64>;
    let rows: [(&str, Extract); 4] = [
        ("prompt", |r| r.prompt_based),
        ("classification", |r| r.classifier_logit),
        ("user-sim", |r| r.user_sim),
        ("semantic", |r| r.semantic),
    ];
    let cell = |metric: fn(&ScoreReport) -> Option<f64>,
                kind: Option<ElementKind>|
     -> Option<f64> {
        let (labels, scores): (Vec<bool>, Vec<f64>) = labeled
            .iter()
            .filter(|(r, _)| kind.is_none_or(|k| r.kind == k))
            .filter_map(|(r, l)| metric(r).map(|s| (*l, s)))
            .unzip();
        point_biserial(&labels, &scores).ok()
    };

    let mut csv = String::from("metric,fq,ai,all\n");
    println!("{:<15} {:>8} {:>8} {:>8}", "metric", "fq", "ai", "all");
    for (name, metric) in rows {
        let fq = cell(metric, Some(ElementKind::FollowUpQuestion));
        let ai = cell(metric, Some(ElementKind::AdditionalInformation));
        let all = cell(metric, None);
        println!(
            "{:<15} {:>8} {:>8} {:>8}",
            name,
            fmt_opt(fq),
            fmt_opt(ai),
            fmt_opt(all)
        );
        let c = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        csv.push_str(&format!("{},{},{},{}\n", name, c(fq), c(ai), c(all)));
    }
    std::fs::write(run_dir.join("correlations.csv"), csv)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    gateway: &Gateway,
    templates: &TemplateSet,
    run_dir: &Path,
    queries: Option<&Path>,
    corpus: Option<&Path>,
    mode: &str,
    episodes: usize,
    max_turns: usize,
    temperature: f64,
    seed: u64,
) -> Result<()> {
    let mode: AgentMode = mode.parse()?;
    let mut seeds: Vec<String> = match (queries, corpus) {
        (Some(path), _) => BufReader::new(File::open(path)?)
            .lines()
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .filter(|l| !l.trim().is_empty())
            .collect(),
        (None, Some(path)) => {
            let samples = load_corpus(path)?;
            let test: Vec<String> = samples
                .iter()
                .filter(|s| s.split != Split::Train)
                .map(|s| s.query.clone())
                .collect();
            test
        }
        (None, None) => {
            return Err(Error::Config("pass --queries or --corpus".into()));
        }
    };
    if seeds.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    // cycle the seed queries up to the requested episode count
    while seeds.len() < episodes {
        let next = seeds[seeds.len() % seeds.len().max(1)].clone();
        seeds.push(next);
    }
    seeds.truncate(episodes);

    let mut cfg = EpisodeConfig::new(mode);
    cfg.max_turns = max_turns;
    cfg.temperature = temperature;
    let simulator = Simulator::new(gateway, templates);
    let transcript_path = run_dir.join("transcripts.jsonl");
    let stats: SimulationStats = run_batch(&simulator, &seeds, &cfg, seed, Some(&transcript_path))?;
    write_json(&run_dir.join("stats.json"), &stats)?;
    println!(
        "episodes {}  ended-after-one-turn {:.3}  avg user turns {:.3}",
        stats.n_episodes, stats.frac_ended_after_one_turn, stats.avg_user_turns
    );
    Ok(())
}
