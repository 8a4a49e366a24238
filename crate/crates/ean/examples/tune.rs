// Scratch harness for tuning search hyperparameters. Not part of the test suite.

use ean::controller::ControllerConfig;
use ean::env::{Evaluator, PlantedConfig, PlantedEnv, RewardWeights};
use ean::search::{brute_force, run_search, NullObserver, SearchConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("sparsity");
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let steps: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seeds: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(10);
    let hidden: Vec<usize> = args
        .get(5)
        .map(|s| {
            if s == "none" {
                vec![]
            } else {
                s.split(',').map(|x| x.parse().unwrap()).collect()
            }
        })
        .unwrap_or_else(|| vec![64]);

    match mode {
        "sparsity" => {
            let mut ok = 0;
            for seed in 0..seeds {
                let config = SearchConfig {
                    stage_sizes: vec![8],
                    search_steps: steps,
                    ppo_start: steps / 10,
                    seed,
                    weights: RewardWeights::new(1.0, 0.0, 0.0).unwrap(),
                    controller: ControllerConfig {
                        learning_rate: lr,
                        hidden_dims: hidden.clone(),
                        ..ControllerConfig::default()
                    },
                    ..SearchConfig::default()
                };
                let mut env = PlantedEnv::generate(&PlantedConfig {
                    stage_sizes: vec![8],
                    interactions: 2,
                    noise_std: 0.0,
                    seed,
                })
                .unwrap();
                let run = run_search(&config, &mut env, &mut NullObserver, None).unwrap();
                let zero = run.extracted.popcount() == 0;
                if zero {
                    ok += 1;
                }
                println!(
                    "seed {seed}: extracted {} pbar_last {:.3} {}",
                    run.extracted,
                    run.pbar_trace.last().unwrap(),
                    if zero { "OK" } else { "STUCK" }
                );
            }
            println!("lr {lr} steps {steps}: {ok}/{seeds} all-zero");
        }
        "planted" => {
            let m = 10usize;
            let mut hits = 0;
            for seed in 0..seeds {
                let config = SearchConfig {
                    stage_sizes: vec![m],
                    search_steps: steps,
                    ppo_start: 200,
                    seed,
                    controller: ControllerConfig {
                        learning_rate: lr,
                        hidden_dims: hidden.clone(),
                        ..ControllerConfig::default()
                    },
                    ..SearchConfig::default()
                };
                let env_seed: u64 = std::env::var("TUNE_ENV_SEED")
                    .ok()
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(1000 + seed);
                let mut env = PlantedEnv::generate(&PlantedConfig {
                    stage_sizes: vec![m],
                    interactions: 4,
                    noise_std: 0.01,
                    seed: env_seed,
                })
                .unwrap();
                let run = run_search(&config, &mut env, &mut NullObserver, None).unwrap();
                let mut oracle_env = env.clone();
                let ranking =
                    brute_force(&mut oracle_env, &config.weights, &[m]).unwrap();
                let threshold = ranking.total_at((ranking.len() / 100).max(1) - 1);
                let extracted_total = config.weights.lambda1
                    * ean::scheme::sparsity_reward(&run.extracted)
                    + config.weights.lambda2 * env.eval_true(&run.extracted).unwrap();
                let hit = extracted_total >= threshold;
                if hit {
                    hits += 1;
                }
                println!(
                    "seed {seed}: extracted {} total {:.4} threshold {:.4} best-rank-total {:.4} {}",
                    run.extracted,
                    extracted_total,
                    threshold,
                    ranking.best().total,
                    if hit { "HIT" } else { "MISS" }
                );
            }
            println!("lr {lr} steps {steps}: {hits}/{seeds} in top 1%");
        }
        "correlate" => {
            use ean::scheme::sample_bernoulli;
            use ean::supernet::{Supernet, SupernetConfig, ToyDataset};
            let mut wins = 0;
            let t0 = std::time::Instant::now();
            for dataset_seed in 0..seeds {
                let mut config = SupernetConfig {
                    dataset_seed,
                    ..SupernetConfig::default()
                };
                if let Ok(v) = std::env::var("TUNE_BH") {
                    config.block_hidden = v.parse().unwrap();
                }
                if let Ok(v) = std::env::var("TUNE_AB") {
                    config.attention_bottleneck = v.parse().unwrap();
                }
                if let Ok(v) = std::env::var("TUNE_SCRATCH") {
                    config.scratch_steps = v.parse().unwrap();
                }
                let mut dataset_config = config.dataset_config();
                if let Ok(v) = std::env::var("TUNE_NOISE") {
                    dataset_config.noise_std = v.parse().unwrap();
                }
                if let Ok(v) = std::env::var("TUNE_MEAN") {
                    dataset_config.mean_scale = v.parse().unwrap();
                }
                if let Ok(v) = std::env::var("TUNE_IDIMS") {
                    dataset_config.informative_dims = v.parse().unwrap();
                }
                let data = ToyDataset::generate(&dataset_config).unwrap();
                let mut net = Supernet::new(
                    &config,
                    &mut ean::seed::rng(dataset_seed, ean::seed::Stream::SupernetInit),
                )
                .unwrap();
                let losses = net
                    .pretrain(
                        &data,
                        steps,
                        &mut ean::seed::rng(dataset_seed, ean::seed::Stream::Pretrain),
                    )
                    .unwrap();
                let mut r = ean::seed::rng(dataset_seed, ean::seed::Stream::Baseline);
                let schemes: Vec<_> = (0..20)
                    .map(|_| sample_bernoulli(&config.stage_sizes, 0.5, &mut r).unwrap())
                    .collect();
                let report =
                    ean::search::proxy_correlation(&net, &schemes, &data, dataset_seed).unwrap();
                let ok = report.r > 0.3;
                if ok {
                    wins += 1;
                }
                let pmin = report.proxy.iter().cloned().fold(f64::INFINITY, f64::min);
                let pmax = report.proxy.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let smin = report.scratch.iter().cloned().fold(f64::INFINITY, f64::min);
                let smax = report.scratch.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                println!(
                    "seed {dataset_seed}: r {:.3} proxy [{:.3},{:.3}] scratch [{:.3},{:.3}] loss0 {:.3} lossK {:.3} {}",
                    report.r,
                    pmin,
                    pmax,
                    smin,
                    smax,
                    losses[..losses.len() / 10].iter().sum::<f64>() / (losses.len() / 10) as f64,
                    losses[losses.len() - losses.len() / 10..].iter().sum::<f64>()
                        / (losses.len() / 10) as f64,
                    if ok { "OK" } else { "X" }
                );
            }
            println!("r > 0.3 in {wins}/{seeds}; elapsed {:.1}s", t0.elapsed().as_secs_f64());
        }
        "beatsrandom" => {
            let stage_sizes = vec![6usize, 6, 6];
            let weights = RewardWeights::default();
            let mut extracted_rewards = Vec::new();
            for seed in 0..seeds {
                let config = SearchConfig {
                    stage_sizes: stage_sizes.clone(),
                    search_steps: steps,
                    ppo_start: 200,
                    seed,
                    controller: ControllerConfig {
                        learning_rate: lr,
                        hidden_dims: hidden.clone(),
                        ..ControllerConfig::default()
                    },
                    ..SearchConfig::default()
                };
                let mut env = PlantedEnv::generate(&PlantedConfig::default()).unwrap();
                let run = run_search(&config, &mut env, &mut NullObserver, None).unwrap();
                let total = weights.lambda1 * ean::scheme::sparsity_reward(&run.extracted)
                    + weights.lambda2 * env.eval_true(&run.extracted).unwrap();
                println!("seed {seed}: extracted {} total {:.4}", run.extracted, total);
                extracted_rewards.push(total);
            }
            let mut env = PlantedEnv::generate(&PlantedConfig::default()).unwrap();
            let baseline = ean::search::baseline_random(
                &mut env,
                &weights,
                &stage_sizes,
                180,
                &mut ean::seed::rng(0, ean::seed::Stream::Baseline),
            )
            .unwrap();
            let mu0 = baseline.mean_total();
            let (t, pval) = ean::search::t_test_greater(&extracted_rewards, mu0).unwrap();
            println!(
                "ean mean {:.4} random mean {:.4} t {:.3} p {:.2e}",
                ean::search::mean(&extracted_rewards),
                mu0,
                t,
                pval
            );
        }
        "curiosity" => {
            let m = 10usize;
            let mut wins = 0;
            for seed in 0..seeds {
                let crossing = |lambda3: f64| -> usize {
                    let config = SearchConfig {
                        stage_sizes: vec![m],
                        search_steps: steps,
                        ppo_start: 200,
                        seed,
                        weights: RewardWeights::new(0.5, 1.0, lambda3).unwrap(),
                        controller: ControllerConfig {
                            learning_rate: lr,
                            hidden_dims: hidden.clone(),
                            ..ControllerConfig::default()
                        },
                        ..SearchConfig::default()
                    };
                    let mut env = PlantedEnv::generate(&PlantedConfig {
                        stage_sizes: vec![m],
                        interactions: 4,
                        noise_std: 0.01,
                        seed: 0,
                    })
                    .unwrap();
                    let run = run_search(&config, &mut env, &mut NullObserver, None).unwrap();
                    run.pbar_trace
                        .iter()
                        .position(|&p| p > 0.9)
                        .map(|i| i + 1)
                        .unwrap_or(steps + 1)
                };
                let with_rnd = crossing(0.1);
                let without = crossing(0.0);
                let ok = with_rnd >= without;
                if ok {
                    wins += 1;
                }
                println!("seed {seed}: with {with_rnd} without {without} {}", if ok { "OK" } else { "X" });
            }
            println!("curiosity delay held in {wins}/{seeds}");
        }
        "trace" => {
            let m = 10usize;
            let seed = seeds; // reuse the 4th arg as the seed
            let config = SearchConfig {
                stage_sizes: vec![m],
                search_steps: steps,
                ppo_start: 200,
                seed,
                controller: ControllerConfig {
                    learning_rate: lr,
                    hidden_dims: hidden.clone(),
                    ..ControllerConfig::default()
                },
                ..SearchConfig::default()
            };
            let mut env = PlantedEnv::generate(&PlantedConfig {
                stage_sizes: vec![m],
                interactions: 4,
                noise_std: 0.01,
                seed: 1000 + seed,
            })
            .unwrap();
            struct Tracer;
            impl ean::search::SearchObserver for Tracer {
                fn on_iteration(&mut self, r: &ean::search::IterationRecord) -> ean::Result<()> {
                    if r.iter % 100 == 0 {
                        println!(
                            "iter {:4}: pbar {:.3} g_spa {:.3} g_val {:.3} g_rnd {:.4} G {:.3}",
                            r.iter, r.pbar, r.g_spa, r.g_val, r.g_rnd, r.total
                        );
                    }
                    Ok(())
                }
            }
            let run = run_search(&config, &mut env, &mut Tracer, None).unwrap();
            let mut oracle_env = env.clone();
            let ranking = brute_force(&mut oracle_env, &config.weights, &[m]).unwrap();
            let extracted_total = config.weights.lambda1
                * ean::scheme::sparsity_reward(&run.extracted)
                + config.weights.lambda2 * env.eval_true(&run.extracted).unwrap();
            println!(
                "extracted {} total {:.4} threshold {:.4} best {} {:.4}",
                run.extracted,
                extracted_total,
                ranking.total_at((ranking.len() / 100).max(1) - 1),
                ranking.best().scheme,
                ranking.best().total
            );
        }
        other => eprintln!("unknown mode {other}"),
    }
}
