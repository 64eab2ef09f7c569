use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use h2o_core::agents::{load_checkpoint, VariantConfig};
use h2o_core::envs::GapKind;
use h2o_core::error::Error;
use h2o_core::harness::*;
use h2o_core::theory::verify_instance;
use serde_json::json;

#[derive(Parser)]
#[command(name = "h2o", version, about = "Hybrid simulator/offline RL experiments on a pendulum")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed. Repeat for several seeds.
    #[arg(long = "seed", global = true)]
    seeds: Vec<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Variant name such as `h2o`, `cql`, `h2o-reg-dr`.
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Simulator gap: none, gravity, friction, joint_noise, speed_noise.
    #[arg(long, global = true)]
    gap: Option<String>,
}

#[derive(Subcommand)]
enum Verb {
    /// Build an offline dataset in the real pendulum.
    GenData,
    /// Train a variant and write metrics, curves, checkpoints and a report.
    Train,
    /// Evaluate a checkpointed actor in the real pendulum.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Gap measure against angular speed on simulator probes.
    Diagnose {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 512)]
        probes: usize,
    },
    /// Exact tabular check of the value-underestimation condition.
    VerifyTheory {
        #[arg(long, default_value_t = 20)]
        instances: u64,
    },
    /// Overlay the learning curves found in run directories.
    Plot {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn exit_code(category: &str) -> u8 {
    match category {
        "config" => 2,
        "input" => 3,
        "parse" => 4,
        "io" => 5,
        "numeric" => 6,
        "convergence" => 7,
        "verification" => 8,
        _ => 1,
    }
}

struct Failure {
    category: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { category: e.category(), message: e.to_string() }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.category, f.message);
            ExitCode::from(exit_code(f.category))
        }
    }
}

fn load_config(c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(name) = &c.variant {
        let v = VariantConfig::from_variant_name(name)?;
        cfg.variant.algorithm = v.algorithm;
        cfg.variant.adaptive_omega = v.adaptive_omega;
        cfg.variant.use_dynamics_ratio = v.use_dynamics_ratio;
        cfg.variant.use_regularization = v.use_regularization;
    }
    if let Some(g) = &c.gap {
        cfg.env.gap = GapKind::from_name(g).ok_or_else(|| Error::Config(format!("unknown gap `{g}`")))?;
    }
    if let Some(&s) = c.seeds.first() {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Outcome {
    let cfg = load_config(&cli.common)?;
    let out = cli.common.out.clone();
    fs::create_dir_all(&out).map_err(Error::from)?;
    match cli.verb {
        Verb::GenData => gen_data(cfg, &out),
        Verb::Train => train(cfg, &cli.common.seeds, &out),
        Verb::Eval { checkpoint } => eval(cfg, &checkpoint, &out),
        Verb::Diagnose { checkpoint, probes } => diagnose(cfg, &checkpoint, probes, &out),
        Verb::VerifyTheory { instances } => verify_theory(cfg.seed, instances, &out),
        Verb::Plot { inputs } => plot(&inputs, &out),
    }
}

fn gen_data(mut cfg: ExperimentConfig, out: &Path) -> Outcome {
    cfg.dataset.protocol.seed = cfg.seed;
    let outcome = generate_dataset(&cfg.dataset.protocol, &cfg.env.real, &cfg.agent)?;
    let path = out.join("dataset.txt");
    outcome.dataset.save(&path)?;
    let returns = outcome.dataset.episode_returns(cfg.env.real.max_steps);
    let mean = returns.iter().sum::<f64>() / returns.len().max(1) as f64;
    write_json(out.join("report.json"), &json!({ "protocol": outcome.summary, "dataset_mean_episode_return": mean, "path": path }))?;
    println!("wrote {} transitions to {} (mean episode return {mean:.1})", outcome.dataset.len(), path.display());
    Ok(())
}

fn train(cfg: ExperimentConfig, seeds: &[u64], out: &Path) -> Outcome {
    let seeds = if seeds.is_empty() { vec![cfg.seed] } else { seeds.to_vec() };
    let dataset = if cfg.variant.algorithm.uses_dataset() { Some(resolve_dataset(&cfg)?.0) } else { None };
    let mut reports = Vec::new();
    for &seed in &seeds {
        let dir = if seeds.len() == 1 { out.to_path_buf() } else { out.join(format!("seed_{seed}")) };
        let run_cfg = ExperimentConfig { seed, out_dir: Some(dir), ..cfg.clone() };
        let report = run_with_dataset(&run_cfg, dataset.clone())?;
        let e = report.final_eval();
        println!("{} seed {seed}: final return {:.1} +/- {:.1}", report.variant, e.return_mean, e.return_std);
        reports.push(report);
    }
    if reports.len() > 1 {
        write_json(out.join("report.json"), &RunSummary::from_reports(&reports))?;
        let series: Vec<Series> = reports.iter().map(|r| Series::from_evals(format!("seed {}", r.seed), &r.evals)).collect();
        let title = format!("{} / {}", reports[0].variant, reports[0].gap);
        fs::write(out.join("curve.svg"), curve_svg(&title, &series)?).map_err(Error::from)?;
    }
    Ok(())
}

fn eval(cfg: ExperimentConfig, checkpoint: &Path, out: &Path) -> Outcome {
    let ck = load_checkpoint(checkpoint)?;
    let stats = evaluate_policy(&cfg.env.real, &ck.actor, cfg.eval_episodes, cfg.seed)?;
    write_json(out.join("report.json"), &json!({ "checkpoint": checkpoint, "variant": ck.manifest.variant, "return": stats }))?;
    println!("return {:.1} +/- {:.1} over {} episodes", stats.mean, stats.std, cfg.eval_episodes);
    Ok(())
}

fn diagnose(cfg: ExperimentConfig, checkpoint: &Path, probes: usize, out: &Path) -> Outcome {
    let ck = load_checkpoint(checkpoint)?;
    let (dataset, _) = resolve_dataset(&cfg)?;
    let rows = diagnose_checkpoint(&cfg, &ck, &dataset, probes)?;
    let mut csv = String::from("speed,u,q\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{}\n", r.feature, r.u, r.q));
    }
    fs::write(out.join("diagnostic.csv"), csv).map_err(Error::from)?;
    let (bottom, top) = quartile_u_means(&rows)?;
    write_json(out.join("report.json"), &json!({ "probes": rows.len(), "bottom_quartile_mean_u": bottom, "top_quartile_mean_u": top }))?;
    println!("mean u: bottom speed quartile {bottom:.4e}, top quartile {top:.4e}");
    Ok(())
}

fn verify_theory(seed: u64, instances: u64, out: &Path) -> Outcome {
    let mut lines = String::new();
    let mut failures = 0;
    for i in 0..instances {
        for beta in [0.1, 1.0] {
            let r = verify_instance(seed + i, 10, 3, 0.5, beta, 1e-8)?;
            failures += r.counterexamples;
            lines.push_str(&serde_json::to_string(&r).map_err(|e| Error::Parse(e.to_string()))?);
            lines.push('\n');
        }
    }
    fs::write(out.join("theory.jsonl"), &lines).map_err(Error::from)?;
    write_json(out.join("report.json"), &json!({ "instances": instances, "counterexamples": failures }))?;
    print!("{lines}");
    if failures > 0 {
        return Err(Failure { category: "verification", message: format!("{failures} counterexample states") });
    }
    Ok(())
}

fn plot(inputs: &[PathBuf], out: &Path) -> Outcome {
    let mut series = Vec::new();
    for dir in inputs {
        let text = fs::read_to_string(dir.join("metrics.csv")).map_err(Error::from)?;
        series.push(Series::from_evals(dir.display().to_string(), &parse_metrics_csv(&text)?));
    }
    fs::write(out.join("curve.svg"), curve_svg("return vs step", &series)?).map_err(Error::from)?;
    println!("wrote {}", out.join("curve.svg").display());
    Ok(())
}

