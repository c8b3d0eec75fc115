//! `csr` — matrix-factorization recommenders with social regularization.
//!
//! Subcommands: `gen` (synthetic corpora), `train`, `evaluate`, `sweep`
//! (grid search), `groups` (per-share-count breakdown). Every run writes a
//! manifest with the resolved configuration and sha256 of each artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use csr_core::baselines::{
    baseline_regularizer, random_scorer, sbpr_train, PopularityModel,
};
use csr_core::data::{
    derive_seed, generate_synthetic, group_users_by_share_count, leave_one_out_split, Dataset,
    InteractionMode, SocialStrengths, Split, SyntheticSpec,
};
use csr_core::eval::{
    evaluate, group_report, write_report_csv, write_report_json, CandidateMode, RankingReport,
};
use csr_core::model::{predict, EmbeddingTable, RegularizerSpec};
use csr_core::persist::{read_embeddings, write_embeddings};
use csr_core::train::{train, write_training_log, TrainConfig};

#[derive(Parser)]
#[command(name = "csr", about = "Matrix-factorization recommenders with social regularization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus (interactions + shares CSV).
    Gen(GenArgs),
    /// Train a model on the train side of the leave-one-out split.
    Train(TrainArgs),
    /// Rank and score a trained model (or rand/itempop) on the held-out items.
    Evaluate(EvaluateArgs),
    /// Grid search over alpha, K and lambda_s; emits one row per cell.
    Sweep(SweepArgs),
    /// Per-group evaluation by share count (0, 1, 2-3, >3).
    Groups(GroupsArgs),
}

#[derive(Args, Serialize)]
struct DataArgs {
    /// Interactions CSV (user_id,item_id[,rating][,timestamp]).
    #[arg(long)]
    interactions: PathBuf,
    /// Shares CSV (user_id,friend_id,item_id).
    #[arg(long)]
    shares: Option<PathBuf>,
    /// Treat the rating column as explicit feedback.
    #[arg(long, default_value = "false")]
    explicit: bool,
}

#[derive(Args, Serialize)]
struct GenArgs {
    /// key=value spec file (users, items, k_true, interactions_per_user,
    /// shares_per_user, noise); omitted keys use defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value = "42")]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// One of: bpr, sbpr, socialbpr, ugpmf, csr.
    #[arg(long, default_value = "csr")]
    model: String,
    #[arg(long, default_value = "16")]
    k: usize,
    #[arg(long, default_value = "0.01")]
    alpha: f64,
    #[arg(long = "lambda-s", default_value = "0.01")]
    lambda_s: f64,
    #[arg(long = "lambda-p", default_value = "0.01")]
    lambda_p: f64,
    #[arg(long = "lambda-q", default_value = "0.01")]
    lambda_q: f64,
    #[arg(long, default_value = "200")]
    epochs: usize,
    /// Drives initialization, SGD streams and the leave-one-out split.
    #[arg(long, default_value = "42")]
    seed: u64,
    /// Seed for the leave-one-out split only; defaults to --seed. Lets a
    /// sweep cell be replayed: cells draw their rng seed from the sweep seed
    /// but share the sweep's split.
    #[arg(long = "split-seed")]
    split_seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// One of: rand, itempop, bpr, sbpr, socialbpr, ugpmf, csr.
    #[arg(long)]
    model: String,
    /// Embedding binary from `train`; required for trained models.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Must match the training seed so both sides see the same split.
    #[arg(long, default_value = "42")]
    seed: u64,
    /// Seed for the leave-one-out split only; defaults to --seed. Lets a
    /// sweep cell be replayed: cells draw their rng seed from the sweep seed
    /// but share the sweep's split.
    #[arg(long = "split-seed")]
    split_seed: Option<u64>,
    /// Comma-separated cutoffs.
    #[arg(long, default_value = "5,10")]
    cutoffs: String,
    /// "full" or "sampled:N".
    #[arg(long, default_value = "full")]
    candidates: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "csr")]
    model: String,
    /// Comma-separated learning-rate grid.
    #[arg(long, default_value = "0.001,0.005,0.01,0.05")]
    alphas: String,
    /// Comma-separated dimensionality grid.
    #[arg(long, default_value = "4,8,16,32")]
    ks: String,
    /// Comma-separated social-weight grid (ignored for models without a
    /// social term).
    #[arg(long = "lambda-s-grid", default_value = "0.001,0.01,0.1,1")]
    lambda_s_grid: String,
    #[arg(long = "lambda-p", default_value = "0.01")]
    lambda_p: f64,
    #[arg(long = "lambda-q", default_value = "0.01")]
    lambda_q: f64,
    #[arg(long, default_value = "200")]
    epochs: usize,
    #[arg(long, default_value = "42")]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct GroupsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: String,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value = "42")]
    seed: u64,
    /// Seed for the leave-one-out split only; defaults to --seed. Lets a
    /// sweep cell be replayed: cells draw their rng seed from the sweep seed
    /// but share the sweep's split.
    #[arg(long = "split-seed")]
    split_seed: Option<u64>,
    #[arg(long, default_value = "5,10")]
    cutoffs: String,
    #[arg(long, default_value = "full")]
    candidates: String,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Groups(args) => cmd_groups(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

const TRAINED_MODELS: &[&str] = &["bpr", "sbpr", "socialbpr", "ugpmf", "csr"];
const ALL_MODELS: &[&str] = &["rand", "itempop", "bpr", "sbpr", "socialbpr", "ugpmf", "csr"];

fn check_model(name: &str, allowed: &[&str]) -> Result<(), String> {
    if allowed.contains(&name) {
        Ok(())
    } else {
        Err(format!(
            "unknown model '{name}' (expected one of {})",
            allowed.join(", ")
        ))
    }
}

fn load_data(args: &DataArgs) -> Result<(Dataset, SocialStrengths), Box<dyn std::error::Error>> {
    let mode = if args.explicit {
        InteractionMode::Explicit
    } else {
        InteractionMode::Implicit
    };
    let mut ds = Dataset::load_interactions(&args.interactions, mode)?;
    let strengths = match &args.shares {
        Some(path) => ds.load_shares(path, false)?,
        None => SocialStrengths::new(),
    };
    Ok((ds, strengths))
}

fn parse_cutoffs(s: &str) -> Result<Vec<usize>, String> {
    let cutoffs: Result<Vec<usize>, _> = s.split(',').map(|c| c.trim().parse()).collect();
    let cutoffs = cutoffs.map_err(|e| format!("bad cutoff list '{s}': {e}"))?;
    if cutoffs.is_empty() || cutoffs.contains(&0) {
        return Err(format!("bad cutoff list '{s}'"));
    }
    Ok(cutoffs)
}

fn parse_grid<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    let grid: Result<Vec<T>, _> = s.split(',').map(|c| c.trim().parse()).collect();
    let grid = grid.map_err(|e| format!("bad {what} grid '{s}': {e}"))?;
    if grid.is_empty() {
        return Err(format!("{what} grid is empty"));
    }
    Ok(grid)
}

fn parse_candidates(s: &str, seed: u64) -> Result<CandidateMode, String> {
    if s == "full" {
        return Ok(CandidateMode::Full);
    }
    if let Some(count) = s.strip_prefix("sampled:") {
        let count: usize = count
            .parse()
            .map_err(|e| format!("bad candidate count in '{s}': {e}"))?;
        return Ok(CandidateMode::Sampled { count, seed });
    }
    Err(format!("bad --candidates '{s}' (expected full or sampled:N)"))
}

/// Resolved run description plus sha256 of every artifact the run wrote.
#[derive(Serialize)]
struct Manifest {
    command: String,
    config: serde_json::Value,
    artifacts: BTreeMap<String, String>,
}

fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn write_manifest(
    out: &Path,
    command: &str,
    config: serde_json::Value,
    artifacts: &[PathBuf],
) -> CliResult {
    let mut hashed = BTreeMap::new();
    for path in artifacts {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        hashed.insert(name, sha256_file(path)?);
    }
    let manifest = Manifest {
        command: command.to_string(),
        config,
        artifacts: hashed,
    };
    std::fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

fn cmd_gen(args: GenArgs) -> CliResult {
    let spec = match &args.spec {
        Some(path) => SyntheticSpec::from_file(path)?,
        None => SyntheticSpec::default(),
    };
    let ds = generate_synthetic(&spec, args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    let ipath = args.out.join("interactions.csv");
    let spath = args.out.join("shares.csv");
    ds.write_interactions(&ipath)?;
    ds.write_shares(&spath)?;
    let config = serde_json::json!({
        "seed": args.seed,
        "spec": spec.to_key_values(),
    });
    write_manifest(&args.out, "gen", config, &[ipath, spath])?;
    println!(
        "generated {} users, {} items, {} interactions, {} shares",
        ds.num_users(),
        ds.num_items(),
        ds.interactions().len(),
        ds.shares().len()
    );
    Ok(())
}

/// Trains `model` on the train side of the split; rand/itempop are rejected.
fn train_model(
    model: &str,
    split: &Split,
    strengths: &SocialStrengths,
    lambda_s: f64,
    config: &TrainConfig,
) -> Result<EmbeddingTable, Box<dyn std::error::Error>> {
    check_model(model, TRAINED_MODELS)?;
    if model == "sbpr" {
        return Ok(sbpr_train(&split.train, config)?.embeddings);
    }
    let (manner, kind) = baseline_regularizer(model).expect("trained model");
    let spec = RegularizerSpec::new(kind, lambda_s);
    let config = TrainConfig {
        manner,
        ..config.clone()
    };
    Ok(train(&split.train, strengths, &spec, &config)?.embeddings)
}

fn cmd_train(args: TrainArgs) -> CliResult {
    check_model(&args.model, TRAINED_MODELS)?;
    let (ds, strengths) = load_data(&args.data)?;
    let split = leave_one_out_split(&ds, args.split_seed.unwrap_or(args.seed));
    let config = TrainConfig {
        k: args.k,
        alpha: args.alpha,
        lambda_p: args.lambda_p,
        lambda_q: args.lambda_q,
        epochs: args.epochs,
        seed: args.seed,
        ..Default::default()
    };
    config.validate()?;
    std::fs::create_dir_all(&args.out)?;

    let (embeddings, log) = if args.model == "sbpr" {
        let outcome = sbpr_train(&split.train, &config)?;
        (outcome.embeddings, outcome.log)
    } else {
        let (manner, kind) = baseline_regularizer(&args.model).expect("trained model");
        let spec = RegularizerSpec::new(kind, args.lambda_s);
        let config = TrainConfig { manner, ..config };
        let outcome = train(&split.train, &strengths, &spec, &config)?;
        (outcome.embeddings, outcome.log)
    };

    let epath = args.out.join("embeddings.bin");
    let lpath = args.out.join("training_log.csv");
    write_embeddings(&embeddings, &epath)?;
    write_training_log(&log, &lpath)?;
    write_manifest(&args.out, "train", serde_json::to_value(&args)?, &[epath, lpath])?;
    println!(
        "trained {} (K={}) for {} epochs on {} train interactions",
        args.model,
        args.k,
        args.epochs,
        split.train.interactions().len()
    );
    Ok(())
}

/// Builds the per-user scorer for any model name and runs the shared
/// evaluation path.
fn score_and_evaluate(
    model: &str,
    embeddings: Option<&EmbeddingTable>,
    split: &Split,
    cutoffs: &[usize],
    mode: CandidateMode,
    seed: u64,
) -> Result<RankingReport, Box<dyn std::error::Error>> {
    let report = match model {
        "rand" => {
            let scorer_seed = derive_seed(seed, 0x52414e44);
            let scorer = move |u: u32, i: u32| random_scorer(u, i, scorer_seed);
            evaluate(&scorer, split, cutoffs, mode, model, seed)?
        }
        "itempop" => {
            let pop = PopularityModel::from_train(&split.train);
            let scorer = move |_: u32, i: u32| pop.score(i);
            evaluate(&scorer, split, cutoffs, mode, model, seed)?
        }
        _ => {
            check_model(model, TRAINED_MODELS)?;
            let emb = embeddings.ok_or("model requires --embeddings")?;
            if emb.num_users != split.train.num_users() || emb.num_items != split.train.num_items()
            {
                return Err(format!(
                    "embedding dims ({} users, {} items) do not match dataset ({}, {})",
                    emb.num_users,
                    emb.num_items,
                    split.train.num_users(),
                    split.train.num_items()
                )
                .into());
            }
            let scorer = move |u: u32, i: u32| predict(emb, u, i).expect("dims checked");
            evaluate(&scorer, split, cutoffs, mode, model, seed)?
        }
    };
    Ok(report)
}

fn cmd_evaluate(args: EvaluateArgs) -> CliResult {
    check_model(&args.model, ALL_MODELS)?;
    let cutoffs = parse_cutoffs(&args.cutoffs)?;
    let mode = parse_candidates(&args.candidates, args.seed)?;
    let (ds, _) = load_data(&args.data)?;
    let split = leave_one_out_split(&ds, args.split_seed.unwrap_or(args.seed));
    let embeddings = match &args.embeddings {
        Some(path) => Some(read_embeddings(path)?),
        None => None,
    };
    let report = score_and_evaluate(
        &args.model,
        embeddings.as_ref(),
        &split,
        &cutoffs,
        mode,
        args.seed,
    )?;

    std::fs::create_dir_all(&args.out)?;
    let jpath = args.out.join("report.json");
    let cpath = args.out.join("report.csv");
    write_report_json(&report, &jpath)?;
    write_report_csv(&report, None, &cpath)?;
    write_manifest(&args.out, "evaluate", serde_json::to_value(&args)?, &[jpath, cpath])?;
    for (&k, pair) in &report.metrics {
        println!("{} HR@{k} = {:.4}  NDCG@{k} = {:.4}", args.model, pair.hr, pair.ndcg);
    }
    Ok(())
}

fn cmd_groups(args: GroupsArgs) -> CliResult {
    check_model(&args.model, ALL_MODELS)?;
    if args.data.shares.is_none() {
        return Err("groups requires --shares".into());
    }
    let cutoffs = parse_cutoffs(&args.cutoffs)?;
    let mode = parse_candidates(&args.candidates, args.seed)?;
    let (ds, _) = load_data(&args.data)?;
    let split = leave_one_out_split(&ds, args.split_seed.unwrap_or(args.seed));
    let embeddings = match &args.embeddings {
        Some(path) => Some(read_embeddings(path)?),
        None => None,
    };
    let report = score_and_evaluate(
        &args.model,
        embeddings.as_ref(),
        &split,
        &cutoffs,
        mode,
        args.seed,
    )?;
    let groups = group_users_by_share_count(&ds);
    let by_group = group_report(&report, &groups);

    std::fs::create_dir_all(&args.out)?;
    let cpath = args.out.join("groups.csv");
    let jpath = args.out.join("groups.json");
    write_report_csv(&report, Some(&by_group), &cpath)?;
    std::fs::write(&jpath, serde_json::to_string_pretty(&by_group)?)?;
    write_manifest(&args.out, "groups", serde_json::to_value(&args)?, &[cpath, jpath])?;
    for (label, gm) in &by_group.groups {
        let line: Vec<String> = gm
            .metrics
            .iter()
            .map(|(&k, p)| format!("HR@{k}={:.4} NDCG@{k}={:.4}", p.hr, p.ndcg))
            .collect();
        println!("group {label} ({} users): {}", gm.test_users, line.join("  "));
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    alpha: f64,
    k: usize,
    lambda_s: f64,
    seed: u64,
    status: String,
    hr5: f64,
    ndcg5: f64,
    hr10: f64,
    ndcg10: f64,
}

fn cmd_sweep(args: SweepArgs) -> CliResult {
    check_model(&args.model, TRAINED_MODELS)?;
    let alphas: Vec<f64> = parse_grid(&args.alphas, "alpha")?;
    let ks: Vec<usize> = parse_grid(&args.ks, "K")?;
    let has_social = matches!(args.model.as_str(), "socialbpr" | "ugpmf" | "csr");
    let lambdas: Vec<f64> = if has_social {
        parse_grid(&args.lambda_s_grid, "lambda_s")?
    } else {
        vec![0.0]
    };

    let (ds, strengths) = load_data(&args.data)?;
    let split = leave_one_out_split(&ds, args.seed);

    let mut cells = Vec::new();
    for &alpha in &alphas {
        for &k in &ks {
            for &lambda_s in &lambdas {
                cells.push((alpha, k, lambda_s));
            }
        }
    }

    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Ok(threads) = std::env::var("CSR_THREADS") {
            builder = builder.num_threads(threads.parse().map_err(|e| {
                format!("bad CSR_THREADS '{threads}': {e}")
            })?);
        }
        builder.build()?
    };

    let model = args.model.clone();
    let rows: Vec<SweepRow> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .enumerate()
            .map(|(index, &(alpha, k, lambda_s))| {
                // each cell owns an rng stream derived from (seed, cell index)
                let cell_seed = derive_seed(args.seed, 0x5745 + index as u64);
                let config = TrainConfig {
                    k,
                    alpha,
                    lambda_p: args.lambda_p,
                    lambda_q: args.lambda_q,
                    epochs: args.epochs,
                    seed: cell_seed,
                    ..Default::default()
                };
                let outcome = train_model(&model, &split, &strengths, lambda_s, &config)
                    .and_then(|emb| {
                        score_and_evaluate(
                            &model,
                            Some(&emb),
                            &split,
                            &[5, 10],
                            CandidateMode::Full,
                            args.seed,
                        )
                    });
                match outcome {
                    Ok(report) => SweepRow {
                        alpha,
                        k,
                        lambda_s,
                        seed: cell_seed,
                        status: "ok".into(),
                        hr5: report.metrics[&5].hr,
                        ndcg5: report.metrics[&5].ndcg,
                        hr10: report.metrics[&10].hr,
                        ndcg10: report.metrics[&10].ndcg,
                    },
                    Err(_) => SweepRow {
                        alpha,
                        k,
                        lambda_s,
                        seed: cell_seed,
                        status: "failed".into(),
                        hr5: f64::NAN,
                        ndcg5: f64::NAN,
                        hr10: f64::NAN,
                        ndcg10: f64::NAN,
                    },
                }
            })
            .collect()
    });

    std::fs::create_dir_all(&args.out)?;
    let spath = args.out.join("sweep.csv");
    {
        use std::io::Write;
        let mut file = std::fs::File::create(&spath)?;
        writeln!(file, "model,alpha,K,lambda_s,seed,status,HR@5,NDCG@5,HR@10,NDCG@10")?;
        for row in &rows {
            writeln!(
                file,
                "{},{},{},{},{},{},{},{},{},{}",
                args.model,
                row.alpha,
                row.k,
                row.lambda_s,
                row.seed,
                row.status,
                row.hr5,
                row.ndcg5,
                row.hr10,
                row.ndcg10
            )?;
        }
    }

    // best cell by HR@10, ties by NDCG@10, then lexicographic cell order
    let best = rows
        .iter()
        .filter(|r| r.status == "ok")
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.hr10
                .partial_cmp(&b.hr10)
                .unwrap()
                .then(a.ndcg10.partial_cmp(&b.ndcg10).unwrap())
                .then(ib.cmp(ia))
        })
        .map(|(_, r)| r);
    let bpath = args.out.join("best.json");
    match best {
        Some(row) => {
            std::fs::write(&bpath, serde_json::to_string_pretty(row)?)?;
            println!(
                "best cell: alpha={} K={} lambda_s={} (HR@10={:.4}, NDCG@10={:.4})",
                row.alpha, row.k, row.lambda_s, row.hr10, row.ndcg10
            );
        }
        None => return Err("every sweep cell failed".into()),
    }
    write_manifest(&args.out, "sweep", serde_json::to_value(&args)?, &[spath, bpath])?;
    Ok(())
}
