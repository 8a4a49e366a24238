//! Command implementations: wire configs to the library, write artifacts,
//! keep manifests.

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::{BaselineKind, Command, CommonArgs};
use ean::env::{Endpoint, Evaluator, ExternalEvaluator, PlantedEnv};
use ean::error::{Error, Result};
use ean::scheme::{sample_bernoulli, ConnectionScheme};
use ean::search::{
    baseline_hsp, baseline_random, brute_force, proxy_correlation, run_search, JsonlObserver,
    SearchRun,
};
use ean::seed::{rng, Stream};
use ean::supernet::{
    load_supernet, save_supernet, time_increment, Supernet, SupernetEvaluator, ToyDataset,
};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Pretrain { common } => pretrain(common),
        Command::Search { common, env } => search(common, env),
        Command::Bruteforce { common, m, env } => bruteforce(common, m, env),
        Command::Baseline { kind } => match kind {
            BaselineKind::Random {
                common,
                draws,
                m,
                env,
            } => baseline_random_cmd(common, draws, m, env),
            BaselineKind::Hsp {
                common,
                m,
                period,
                offset,
            } => baseline_hsp_cmd(common, m, period, offset),
        },
        Command::Bench {
            common,
            batch,
            reps,
        } => bench(common, batch, reps),
        Command::Correlate { common } => correlate(common),
        Command::Serve { common, endpoint } => serve(common, endpoint),
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut config = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn run_dir(common: &CommonArgs, command: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| {
        let millis = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        PathBuf::from("runs").join(format!("{command}-{millis}"))
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

/// Build the reward environment named by `config.env`.
fn build_evaluator(config: &RunConfig) -> Result<Box<dyn Evaluator>> {
    match config.env.as_str() {
        "planted" => Ok(Box::new(PlantedEnv::generate(&config.planted_config())?)),
        "supernet" => {
            let path = config.checkpoint.as_deref().ok_or_else(|| {
                Error::InvalidConfig(
                    "field checkpoint: a pretrain checkpoint is required for the supernet environment"
                        .into(),
                )
            })?;
            let net = load_supernet(Path::new(path))?;
            // The dataset is regenerated from the checkpoint's own config so
            // proxy values always match what the supernet was trained on.
            let data = ToyDataset::generate(&net.config().dataset_config())?;
            Ok(Box::new(SupernetEvaluator::new(net, data)))
        }
        other => {
            if let Some(endpoint_text) = other.strip_prefix("external:") {
                let endpoint = Endpoint::parse(endpoint_text)?;
                let timeout = Duration::from_millis(config.timeout_ms);
                let mut last_error = None;
                for attempt in 0..=config.retry_limit {
                    match ExternalEvaluator::connect(
                        &endpoint,
                        &config.stage_sizes,
                        timeout,
                        config.retry_limit,
                    ) {
                        Ok(ev) => return Ok(Box::new(ev)),
                        Err(e) => {
                            last_error = Some(e);
                            if attempt < config.retry_limit {
                                std::thread::sleep(Duration::from_millis(100));
                            }
                        }
                    }
                }
                Err(last_error.expect("at least one attempt"))
            } else {
                Err(Error::InvalidConfig(format!(
                    "field env: unknown environment {other:?}"
                )))
            }
        }
    }
}

fn pretrain(common: CommonArgs) -> Result<()> {
    let config = load_config(&common)?;
    let dir = run_dir(&common, "pretrain");
    let mut manifest = Manifest::start(&dir, "pretrain", common.config.as_deref(), &config)?;

    let supernet_config = config.supernet_config()?;
    let data = ToyDataset::generate(&config.dataset_config())?;
    let mut net = Supernet::new(&supernet_config, &mut rng(config.seed, Stream::SupernetInit))?;
    let losses = net.pretrain(&data, config.pretrain_steps, &mut rng(config.seed, Stream::Pretrain))?;

    let ckpt = dir.join("supernet.ckpt");
    save_supernet(&ckpt, &net)?;
    write_json(
        &dir.join("supernet.ckpt.json"),
        &serde_json::json!({
            "format": "ean-supernet-checkpoint-v1",
            "config": net.config(),
            "pretrain_steps": config.pretrain_steps,
        }),
    )?;
    let mut curve = BufWriter::new(File::create(dir.join("losses.csv"))?);
    writeln!(curve, "step,loss")?;
    for (i, loss) in losses.iter().enumerate() {
        writeln!(curve, "{},{}", i + 1, loss)?;
    }
    curve.flush()?;

    manifest.add_artifact("supernet.ckpt");
    manifest.add_artifact("supernet.ckpt.json");
    manifest.add_artifact("losses.csv");
    manifest.finish("ok")?;
    println!("pretrained {} steps -> {}", config.pretrain_steps, dir.display());
    Ok(())
}

#[derive(Serialize)]
struct SearchSummary<'a> {
    extracted: String,
    best: Option<&'a ean::search::BestSeen>,
    pbar_trace: &'a [f64],
    config: &'a ean::search::SearchConfig,
}

fn write_search_artifacts(dir: &Path, run: &SearchRun, config: &ean::search::SearchConfig) -> Result<()> {
    write_json(
        &dir.join("summary.json"),
        &SearchSummary {
            extracted: run.extracted.encode(),
            best: run.best.as_ref(),
            pbar_trace: &run.pbar_trace,
            config,
        },
    )?;
    let mut curves = BufWriter::new(File::create(dir.join("curves.csv"))?);
    writeln!(curves, "iter,G,g_spa,g_val,g_rnd,pbar")?;
    for r in &run.records {
        writeln!(
            curves,
            "{},{},{},{},{},{}",
            r.iter, r.total, r.g_spa, r.g_val, r.g_rnd, r.pbar
        )?;
    }
    curves.flush()?;
    Ok(())
}

fn search(common: CommonArgs, env: Option<String>) -> Result<()> {
    let mut config = load_config(&common)?;
    if let Some(env) = env {
        config.env = env;
    }
    let dir = run_dir(&common, "search");
    let mut manifest = Manifest::start(&dir, "search", common.config.as_deref(), &config)?;

    let search_config = config.search_config()?;
    let mut evaluator = build_evaluator(&config)?;
    let log = BufWriter::new(File::create(dir.join("run.jsonl"))?);
    let mut observer = JsonlObserver::new(log);
    let abort_ckpt = dir.join("search.ckpt");

    manifest.add_artifact("run.jsonl");
    match run_search(
        &search_config,
        evaluator.as_mut(),
        &mut observer,
        Some(&abort_ckpt),
    ) {
        Ok(run) => {
            write_search_artifacts(&dir, &run, &search_config)?;
            manifest.add_artifact("summary.json");
            manifest.add_artifact("curves.csv");
            manifest.finish("ok")?;
            println!("extracted {} -> {}", run.extracted, dir.display());
            Ok(())
        }
        Err(e) => {
            manifest.add_artifact("search.ckpt");
            manifest.finish("aborted")?;
            Err(e)
        }
    }
}

fn bruteforce(common: CommonArgs, m: Option<usize>, env: Option<String>) -> Result<()> {
    let mut config = load_config(&common)?;
    if let Some(m) = m {
        config.stage_sizes = vec![m];
    }
    if let Some(env) = env {
        config.env = env;
    }
    let dir = run_dir(&common, "bruteforce");
    let mut manifest = Manifest::start(&dir, "bruteforce", common.config.as_deref(), &config)?;

    let weights = config.weights()?;
    let mut evaluator = build_evaluator(&config)?;
    let ranking = brute_force(evaluator.as_mut(), &weights, &config.stage_sizes)?;

    let mut csv = BufWriter::new(File::create(dir.join("ranking.csv"))?);
    writeln!(csv, "scheme,rank,g_spa,g_val,G")?;
    for entry in ranking.iter() {
        writeln!(
            csv,
            "{},{},{},{},{}",
            entry.scheme.encode(),
            entry.rank,
            entry.g_spa,
            entry.g_val,
            entry.total
        )?;
    }
    csv.flush()?;
    manifest.add_artifact("ranking.csv");
    manifest.finish("ok")?;
    let best = ranking.best();
    println!("best {} G={} -> {}", best.scheme, best.total, dir.display());
    Ok(())
}

fn baseline_random_cmd(
    common: CommonArgs,
    draws: Option<usize>,
    m: Option<usize>,
    env: Option<String>,
) -> Result<()> {
    let mut config = load_config(&common)?;
    if let Some(m) = m {
        config.stage_sizes = vec![m];
    }
    if let Some(env) = env {
        config.env = env;
    }
    if let Some(draws) = draws {
        config.draws = draws;
    }
    let dir = run_dir(&common, "baseline-random");
    let mut manifest = Manifest::start(&dir, "baseline random", common.config.as_deref(), &config)?;

    let weights = config.weights()?;
    let mut evaluator = build_evaluator(&config)?;
    let baseline = baseline_random(
        evaluator.as_mut(),
        &weights,
        &config.stage_sizes,
        config.draws,
        &mut rng(config.seed, Stream::Baseline),
    )?;

    let mut csv = BufWriter::new(File::create(dir.join("distribution.csv"))?);
    writeln!(csv, "scheme,g_spa,g_val,G")?;
    for s in &baseline.scores {
        writeln!(csv, "{},{},{},{}", s.scheme.encode(), s.g_spa, s.g_val, s.total)?;
    }
    csv.flush()?;
    manifest.add_artifact("distribution.csv");
    manifest.finish("ok")?;
    let best = baseline.best();
    println!("best {} G={} -> {}", best.scheme, best.total, dir.display());
    Ok(())
}

fn baseline_hsp_cmd(
    common: CommonArgs,
    m: Option<usize>,
    period: Option<usize>,
    offset: Option<usize>,
) -> Result<()> {
    let mut config = load_config(&common)?;
    if let Some(m) = m {
        config.stage_sizes = vec![m];
    }
    if let Some(period) = period {
        config.hsp_period = period;
    }
    if let Some(offset) = offset {
        config.hsp_offset = offset;
    }
    let scheme = baseline_hsp(&config.stage_sizes, config.hsp_period, config.hsp_offset)?;
    println!("{}", scheme.encode());
    if common.out.is_some() {
        let dir = run_dir(&common, "baseline-hsp");
        let mut manifest = Manifest::start(&dir, "baseline hsp", common.config.as_deref(), &config)?;
        write_json(
            &dir.join("hsp.json"),
            &serde_json::json!({
                "scheme": scheme.encode(),
                "period": config.hsp_period,
                "offset": config.hsp_offset,
            }),
        )?;
        manifest.add_artifact("hsp.json");
        manifest.finish("ok")?;
    }
    Ok(())
}

fn bench(common: CommonArgs, batch: Option<usize>, reps: Option<usize>) -> Result<()> {
    let mut config = load_config(&common)?;
    if let Some(batch) = batch {
        config.bench_batch = batch;
    }
    if let Some(reps) = reps {
        config.bench_reps = reps;
    }
    let dir = run_dir(&common, "bench");
    let mut manifest = Manifest::start(&dir, "bench", common.config.as_deref(), &config)?;

    let supernet_config = config.supernet_config()?;
    let scheme = match &config.scheme {
        Some(text) => ConnectionScheme::decode(text)?,
        None => ConnectionScheme::zeros(&config.stage_sizes),
    };
    let result = time_increment(
        &supernet_config,
        &scheme,
        config.bench_batch,
        config.bench_reps,
        config.seed,
    )?;
    write_json(&dir.join("bench.json"), &result)?;
    manifest.add_artifact("bench.json");
    manifest.finish("ok")?;
    println!(
        "scheme {} increment {:.2}% -> {}",
        result.scheme,
        result.increment_pct,
        dir.display()
    );
    Ok(())
}

fn correlate(common: CommonArgs) -> Result<()> {
    let config = load_config(&common)?;
    let dir = run_dir(&common, "correlate");
    let mut manifest = Manifest::start(&dir, "correlate", common.config.as_deref(), &config)?;

    let path = config.checkpoint.as_deref().ok_or_else(|| {
        Error::InvalidConfig("field checkpoint: a pretrain checkpoint is required".into())
    })?;
    let net = load_supernet(Path::new(path))?;
    let data = ToyDataset::generate(&net.config().dataset_config())?;
    let mut scheme_rng = rng(config.seed, Stream::Baseline);
    let schemes: Vec<ConnectionScheme> = (0..config.correlate_schemes)
        .map(|_| sample_bernoulli(&net.config().stage_sizes, 0.5, &mut scheme_rng))
        .collect::<Result<_>>()?;
    let report = proxy_correlation(&net, &schemes, &data, config.seed)?;
    write_json(&dir.join("correlation.json"), &report)?;
    manifest.add_artifact("correlation.json");
    manifest.finish("ok")?;
    println!("r = {:.4} over {} schemes -> {}", report.r, schemes.len(), dir.display());
    Ok(())
}

fn serve(common: CommonArgs, endpoint: Option<String>) -> Result<()> {
    let config = load_config(&common)?;
    let path = config.checkpoint.as_deref().ok_or_else(|| {
        Error::InvalidConfig("field checkpoint: a pretrain checkpoint is required".into())
    })?;
    let net = load_supernet(Path::new(path))?;
    let data = ToyDataset::generate(&net.config().dataset_config())?;
    match endpoint.or_else(|| config.endpoint.clone()) {
        None => {
            let stdin = std::io::stdin();
            let stdout = std::io::stdout();
            ean::env::protocol::serve_lines(stdin.lock(), stdout.lock(), |scheme| {
                net.proxy_eval(scheme, &data)
            })
        }
        Some(text) => match Endpoint::parse(&text)? {
            Endpoint::Tcp(addr) => {
                let listener = std::net::TcpListener::bind(&addr)
                    .map_err(|e| Error::Transport(format!("bind {addr}: {e}")))?;
                eprintln!("serving on tcp:{addr}");
                ean::env::protocol::serve_tcp(listener, move |scheme| {
                    net.proxy_eval(scheme, &data)
                })
            }
            Endpoint::Command(_) => Err(Error::InvalidConfig(
                "serve listens on stdio or tcp:HOST:PORT; cmd: endpoints are for clients".into(),
            )),
        },
    }
}
