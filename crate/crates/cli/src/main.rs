use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use vqg_core::checkpoint::Checkpoint;
use vqg_core::config::{load_config, Config, CODE_VERSION};
use vqg_core::dataset::Dataset;
use vqg_core::eval::{
    evaluate, high_quality_pct, mean_success_rounds, progressive_trend_pct, round_success_curve, run_ablation,
    RoundPoint, SplitMode,
};
use vqg_core::persist::{read_jsonl, write_jsonl, Header, JsonlWriter};
use vqg_core::questioner::DecodeMode;
use vqg_core::seed::derive_seed;
use vqg_core::trainer::{game_setup, pretrain, verify_episode, EpisodeLog, MetricRecord, Trainer};
use vqg_service::{load_checkpoints, system_clock, CreateRequest, Questioner, Study, StudyOptions};

#[derive(Debug, Parser)]
#[command(name = "vqg", version, about = "Goal-oriented question generation experiments")]
struct Cli {
    /// TOML config file. Defaults apply when omitted.
    #[arg(long, global = true, env = "VQG_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed, overriding `harness.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding `harness.out_dir`.
    #[arg(long, global = true, env = "VQG_LOG_DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the train and test scenes.
    GenWorld,
    /// Supervised pretraining on scripted expert dialogs.
    Pretrain,
    /// REINFORCE training.
    Train {
        /// Warm-start from this checkpoint (e.g. the pretrained one).
        #[arg(long, conflicts_with = "resume")]
        init: Option<PathBuf>,
        /// Continue an interrupted run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// NewObject or NewImage; both when omitted.
        #[arg(long)]
        split: Option<String>,
        /// sampling, greedy or beamN; `eval.modes` when omitted.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        n_games: Option<usize>,
    },
    /// Train and evaluate every reward variant over several seeds.
    Ablate {
        /// Comma-separated seeds, overriding `ablation.seeds`.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Run the study HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Play one game in the terminal as the Guesser.
    Play {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        scene_seed: u64,
        #[arg(long)]
        session_seed: Option<u64>,
    },
    /// Re-execute logged episodes and check every reward.
    Replay {
        #[arg(long)]
        episode: PathBuf,
    },
}

/// Exit status classes.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<vqg_core::Error>() {
            Some(vqg_core::Error::InvalidConfig { .. } | vqg_core::Error::ConfigParse(_)) => Failure::Config(e),
            _ => Failure::Runtime(e),
        }
    }
}

impl From<vqg_core::Error> for Failure {
    fn from(e: vqg_core::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

struct Ctx {
    cfg: Config,
    seed: u64,
    out_dir: PathBuf,
}

fn context(cli: &Cli) -> Result<Ctx, Failure> {
    let cfg = match &cli.config {
        Some(p) => load_config(p).map_err(|e| Failure::Config(anyhow!(e).context(format!("config {}", p.display()))))?,
        None => Config::default(),
    };
    let seed = cli.seed.unwrap_or(cfg.harness.seed);
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.harness.out_dir));
    Ok(Ctx { cfg, seed, out_dir })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let ctx = context(&cli)?;
    // A second initialization only happens in tests; ignore it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(ctx.cfg.workers()).build_global();
    match cli.command {
        Command::GenWorld => gen_world(&ctx),
        Command::Pretrain => run_pretrain(&ctx),
        Command::Train { init, resume } => train(&ctx, init.as_deref(), resume.as_deref()),
        Command::Eval {
            checkpoint,
            split,
            mode,
            n_games,
        } => eval(&ctx, &checkpoint, split.as_deref(), mode.as_deref(), n_games),
        Command::Ablate { seeds } => ablate(&ctx, seeds),
        Command::Serve {
            bind,
            checkpoint_dir,
            ledger,
        } => serve(&ctx, bind, checkpoint_dir, ledger),
        Command::Play {
            checkpoint,
            scene_seed,
            session_seed,
        } => play(&ctx, &checkpoint, scene_seed, session_seed),
        Command::Replay { episode } => replay(&episode),
    }
}

fn gen_world(ctx: &Ctx) -> Result<(), Failure> {
    let data = Dataset::generate(&ctx.cfg.world, ctx.seed)?;
    for (name, scenes) in [("scenes-train.jsonl", &data.train), ("scenes-test.jsonl", &data.test)] {
        let path = ctx.out_dir.join(name);
        write_jsonl(&path, &Header::new("scenes", &ctx.cfg), scenes)?;
        println!("wrote {} scenes to {}", scenes.len(), path.display());
    }
    Ok(())
}

fn run_pretrain(ctx: &Ctx) -> Result<(), Failure> {
    let data = Dataset::generate(&ctx.cfg.world, ctx.seed)?;
    let (policy, hist, _) = pretrain(&ctx.cfg, &data, ctx.seed)?;
    let mut log = JsonlWriter::create(&ctx.out_dir.join("pretrain-metrics.jsonl"), &Header::new("metrics", &ctx.cfg))?;
    for (epoch, nll) in hist.iter().enumerate() {
        log.write(&MetricRecord {
            epoch,
            split: "train".into(),
            mode: "supervised".into(),
            success: f64::NAN,
            mean_rounds: f64::NAN,
            mean_reward: f64::NAN,
            nll: Some(*nll),
            baseline_loss: None,
            config_hash: ctx.cfg.hash(),
            code_version: CODE_VERSION.into(),
        })?;
        eprintln!("pretrain epoch {epoch}: nll {nll:.4}");
    }
    log.flush()?;
    let grammar = game_setup(&ctx.cfg)?.grammar;
    let path = ctx.out_dir.join("pretrain.ckpt");
    Checkpoint::new(&ctx.cfg, &grammar, policy, None, 0, ctx.seed, "supervised").save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn train(ctx: &Ctx, init: Option<&Path>, resume: Option<&Path>) -> Result<(), Failure> {
    let data = Arc::new(Dataset::generate(&ctx.cfg.world, ctx.seed)?);
    let mut trainer = match (init, resume) {
        (_, Some(path)) => {
            let ck = Checkpoint::load(path)?;
            if ck.header.config_hash != ctx.cfg.hash() {
                return Err(Failure::Config(anyhow!(
                    "checkpoint {} was written with config {}, current config is {}",
                    path.display(),
                    ck.header.config_hash,
                    ctx.cfg.hash()
                )));
            }
            Trainer::resume(&ctx.cfg, data, &ck)?
        }
        (Some(path), None) => Trainer::new(&ctx.cfg, data, Some(Checkpoint::load(path)?.policy), ctx.seed)?,
        (None, None) => Trainer::new(&ctx.cfg, data, None, ctx.seed)?,
    };
    let label = ctx.cfg.rewards.label();
    let header = Header::new("metrics", &ctx.cfg);
    let (mut metrics, mut episodes) = if resume.is_some() {
        (
            JsonlWriter::append(&ctx.out_dir.join("metrics.jsonl"), &header)?,
            JsonlWriter::append(&ctx.out_dir.join("episodes.jsonl"), &Header::new("episodes", &ctx.cfg))?,
        )
    } else {
        (
            JsonlWriter::create(&ctx.out_dir.join("metrics.jsonl"), &header)?,
            JsonlWriter::create(&ctx.out_dir.join("episodes.jsonl"), &Header::new("episodes", &ctx.cfg))?,
        )
    };
    let every = ctx.cfg.trainer.checkpoint_every;
    let result = trainer.train(|t, report| {
        metrics.write(&report.metrics)?;
        metrics.flush()?;
        for e in &report.episodes {
            episodes.write(e)?;
        }
        episodes.flush()?;
        let m = &report.metrics;
        eprintln!(
            "epoch {}: success {:.3} rounds {:.2} reward {:.3}",
            m.epoch, m.success, m.mean_rounds, m.mean_reward
        );
        if every > 0 && t.epoch % every == 0 {
            t.checkpoint(&label)
                .save(&ctx.out_dir.join("checkpoints").join(format!("epoch-{:04}.ckpt", t.epoch)))?;
        }
        Ok(())
    });
    if let Err(e @ vqg_core::Error::NonFiniteGradient { .. }) = result {
        let path = ctx.out_dir.join("diagnostic.ckpt");
        trainer.checkpoint(&format!("{label} (aborted)")).save(&path)?;
        return Err(Failure::Runtime(anyhow!(e).context(format!("parameters before the failed update saved to {}", path.display()))));
    }
    result?;
    let path = ctx.out_dir.join("final.ckpt");
    trainer.checkpoint(&label).save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary {
    split: SplitMode,
    mode: String,
    n_games: usize,
    success: f64,
    mean_success_rounds: Option<f64>,
    progressive_pct: Option<f64>,
    high_quality_pct: Option<f64>,
    round_curve: Vec<RoundPoint>,
}

#[derive(Serialize)]
struct EvalReport {
    config_hash: String,
    code_version: String,
    checkpoint: String,
    seed: u64,
    results: Vec<EvalSummary>,
}

fn eval(ctx: &Ctx, checkpoint: &Path, split: Option<&str>, mode: Option<&str>, n_games: Option<usize>) -> Result<(), Failure> {
    let ck = Checkpoint::load(checkpoint)?;
    // Scenes and held-out objects come from the run that produced the checkpoint.
    let train_cfg = ck.config()?;
    let data = Dataset::generate(&train_cfg.world, ck.header.master_seed)?;
    let setup = game_setup(&train_cfg)?;
    if setup.grammar.hash() != ck.header.grammar_hash {
        return Err(Failure::Runtime(anyhow!("checkpoint grammar does not match its config")));
    }
    let splits = match split {
        Some(s) => vec![s.parse::<SplitMode>()?],
        None => SplitMode::ALL.to_vec(),
    };
    let modes: Vec<DecodeMode> = match mode {
        Some(m) => vec![m.parse()?],
        None => ctx.cfg.eval.decode_modes()?,
    };
    let n = n_games.unwrap_or(ctx.cfg.eval.n_games);
    if n == 0 {
        return Err(Failure::Config(anyhow!("--n-games must be >= 1")));
    }
    let eval_seed = derive_seed(ctx.seed, "eval", &[]);
    let mut records = JsonlWriter::create(&ctx.out_dir.join("eval-records.jsonl"), &Header::new("games", &train_cfg))?;
    let mut results = Vec::new();
    for &s in &splits {
        for &m in &modes {
            let res = evaluate(&setup, &ck.policy, &data, s, m, n, eval_seed)?;
            println!("{s} {m}: success {:.4} over {} games", res.success, res.n_games);
            for r in &res.records {
                records.write(r)?;
            }
            results.push(EvalSummary {
                split: s,
                mode: m.to_string(),
                n_games: n,
                success: res.success,
                mean_success_rounds: mean_success_rounds(&res.records),
                progressive_pct: progressive_trend_pct(&res.records),
                high_quality_pct: high_quality_pct(&res.records),
                round_curve: round_success_curve(&res.records, setup.rewards.j_max),
            });
        }
    }
    records.flush()?;
    let report = EvalReport {
        config_hash: train_cfg.hash(),
        code_version: CODE_VERSION.into(),
        checkpoint: checkpoint.display().to_string(),
        seed: ctx.seed,
        results,
    };
    let path = ctx.out_dir.join("eval-report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report).context("serializing report")?)
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn ablate(ctx: &Ctx, seeds: Vec<u64>) -> Result<(), Failure> {
    let seeds = if seeds.is_empty() { ctx.cfg.ablation.seeds.clone() } else { seeds };
    let report = run_ablation(&ctx.cfg, &seeds, |msg| eprintln!("{msg}"))?;
    std::fs::create_dir_all(&ctx.out_dir).context("creating output directory")?;
    let json = ctx.out_dir.join("ablation.json");
    std::fs::write(&json, serde_json::to_string_pretty(&report).context("serializing report")?)
        .with_context(|| format!("writing {}", json.display()))?;
    let table = report.table();
    std::fs::write(ctx.out_dir.join("ablation.txt"), &table).context("writing table")?;
    for (v, seed, policy) in &report.policies {
        let grammar = game_setup(&ctx.cfg)?.grammar;
        let name = format!("{}-seed{seed}.ckpt", v.label().replace('+', "_"));
        Checkpoint::new(&ctx.cfg, &grammar, policy.clone(), None, ctx.cfg.trainer.epochs, *seed, v.label())
            .save(&ctx.out_dir.join("checkpoints").join(name))?;
    }
    print!("{table}");
    Ok(())
}

fn study_options(ctx: &Ctx, ledger: PathBuf) -> Result<StudyOptions, Failure> {
    Ok(StudyOptions {
        ledger,
        ttl: Duration::from_secs(ctx.cfg.service.session_ttl_secs),
        default_mode: ctx.cfg.service.decode.parse()?,
        seed: ctx.seed,
    })
}

fn serve(ctx: &Ctx, bind: Option<String>, dir: Option<PathBuf>, ledger: Option<PathBuf>) -> Result<(), Failure> {
    let dir = dir.unwrap_or_else(|| PathBuf::from(&ctx.cfg.service.checkpoint_dir));
    let questioners = load_checkpoints(&dir)?;
    if questioners.is_empty() {
        return Err(Failure::Runtime(anyhow!("no .ckpt files in {}", dir.display())));
    }
    let ledger = ledger.unwrap_or_else(|| PathBuf::from(&ctx.cfg.service.ledger));
    let study = Arc::new(Study::new(questioners, study_options(ctx, ledger)?, system_clock()));
    let bind = bind.unwrap_or_else(|| ctx.cfg.service.bind.clone());
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    eprintln!("serving {} checkpoints on http://{bind}", study.checkpoints().len());
    rt.block_on(vqg_service::serve(study, &bind))
        .with_context(|| format!("serving on {bind}"))?;
    Ok(())
}

fn print_scene(scene: &[vqg_core::world::SceneObject]) {
    println!("{:>3}  {:<10} {:<24} box", "id", "category", "attributes");
    for o in scene {
        let attrs: Vec<String> = o.attributes.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let b = &o.bbox;
        println!(
            "{:>3}  {:<10} {:<24} ({:.2},{:.2})-({:.2},{:.2})",
            o.id,
            o.category,
            attrs.join(" "),
            b.x_min,
            b.y_min,
            b.x_max,
            b.y_max
        );
    }
}

fn play(ctx: &Ctx, checkpoint: &Path, scene_seed: u64, session_seed: Option<u64>) -> Result<(), Failure> {
    let ck = Checkpoint::load(checkpoint)?;
    let name = checkpoint.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    let mut qs = BTreeMap::new();
    qs.insert(name.clone(), Questioner::from_checkpoint(&ck)?);
    let study = Study::new(qs, study_options(ctx, ctx.out_dir.join("play-ledger.jsonl"))?, system_clock());
    let view = study
        .create(CreateRequest {
            checkpoint: name,
            scene_seed,
            session_seed,
            ..CreateRequest::default()
        })
        .map_err(|e| anyhow!(e))?;
    let id = view.session_id.clone();
    print_scene(&view.scene.objects);
    let stdin = std::io::stdin();
    let mut finished = false;
    loop {
        if finished {
            print!("dialog over; guess an object id: ");
        } else {
            print!("[enter] next question, or an object id to guess: ");
        }
        std::io::stdout().flush().context("writing prompt")?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line).context("reading input")? == 0 {
            return Err(Failure::Runtime(anyhow!("input closed before a guess was made")));
        }
        let line = line.trim();
        if line.is_empty() {
            if finished {
                continue;
            }
            let step = study.step(&id).map_err(|e| anyhow!(e))?;
            match &step.round {
                Some(r) => println!("Q{}: {}  A: {}", r.round, r.question, r.answer),
                None => println!("(the questioner has no more questions)"),
            }
            finished = step.finished;
            continue;
        }
        let Ok(pick) = line.parse::<usize>() else {
            println!("not an object id: {line}");
            continue;
        };
        match study.guess(&id, pick) {
            Ok(g) => {
                println!(
                    "{} the target was object {} (after {} rounds)",
                    if g.correct { "Correct!" } else { "Wrong," },
                    g.target_id,
                    g.rounds_seen
                );
                return Ok(());
            }
            Err(e) => println!("{e}"),
        }
    }
}

fn replay(path: &Path) -> Result<(), Failure> {
    let (header, logs): (Header, Vec<EpisodeLog>) = read_jsonl(path, "episodes")?;
    let cfg = header.config()?;
    let setup = game_setup(&cfg)?;
    for (i, log) in logs.iter().enumerate() {
        verify_episode(&setup, log).with_context(|| format!("episode {} (scene {})", i + 1, log.scene.id))?;
    }
    println!("verified {} episodes from {}", logs.len(), path.display());
    Ok(())
}

