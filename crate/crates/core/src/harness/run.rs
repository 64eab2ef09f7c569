use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::eval::evaluate_policy;
use super::plot::emit_curves;
use super::protocol::{generate_dataset, ProtocolSummary};
use crate::agents::{load_checkpoint, save_checkpoint, Algorithm, EnvSpec, Manifest, StepMetrics, Trainer};
use crate::data::Dataset;
use crate::envs::{Environment, Pendulum};
use crate::error::{Error, Result};

/// Evaluation return at one step plus the training metrics averaged since the previous point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: u64,
    pub return_mean: f64,
    pub return_std: f64,
    pub loss_critic: f64,
    pub loss_actor: f64,
    pub mean_u: f64,
    pub mean_w: f64,
    pub omega_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub variant: String,
    pub gap: String,
    pub seed: u64,
    pub evals: Vec<EvalPoint>,
    pub manifest: Option<Manifest>,
}

impl RunReport {
    pub fn final_eval(&self) -> &EvalPoint {
        self.evals.last().expect("a report always has the initial eval point")
    }
}

/// Averages of the finite values of each metric over a window of steps.
#[derive(Default)]
struct Window {
    sums: [f64; 5],
    counts: [u32; 5],
}

impl Window {
    fn add(&mut self, m: &StepMetrics) {
        for (i, v) in [m.critic_loss, m.actor_loss, m.mean_u, m.mean_w, m.omega_entropy].into_iter().enumerate() {
            if v.is_finite() {
                self.sums[i] += v;
                self.counts[i] += 1;
            }
        }
    }

    fn mean(&self, i: usize) -> f64 {
        if self.counts[i] == 0 {
            f64::NAN
        } else {
            self.sums[i] / self.counts[i] as f64
        }
    }
}

/// Loads the configured dataset file or generates one with the configured protocol.
pub fn resolve_dataset(cfg: &ExperimentConfig) -> Result<(Arc<Dataset>, Option<ProtocolSummary>)> {
    match &cfg.dataset.path {
        Some(p) => Ok((Arc::new(Dataset::load(p)?), None)),
        None => {
            let out = generate_dataset(&cfg.dataset.protocol, &cfg.env.real, &cfg.agent)?;
            Ok((Arc::new(out.dataset), Some(out.summary)))
        }
    }
}

/// Resolves the dataset if the variant needs one, then runs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let dataset = if cfg.variant.algorithm.uses_dataset() { Some(resolve_dataset(cfg)?.0) } else { None };
    run_with_dataset(cfg, dataset)
}

/// Trains for `total_steps`, evaluating in the real pendulum at step 0, every
/// `eval_every` steps and at the end. Writes outputs when `out_dir` is set.
pub fn run_with_dataset(cfg: &ExperimentConfig, dataset: Option<Arc<Dataset>>) -> Result<RunReport> {
    cfg.validate()?;
    let sim = Pendulum::new(cfg.env.sim())?;
    let spec = EnvSpec { state_dim: sim.observation_dim(), action_dim: sim.action_dim(), max_action: sim.action_bound() };
    let mut agent_cfg = cfg.agent;
    if let (Some(d), Algorithm::H2o | Algorithm::H2oV) = (&dataset, cfg.variant.algorithm) {
        agent_cfg.buffer_capacity = 10 * d.len();
    }
    let dataset = if cfg.variant.algorithm.uses_dataset() { dataset } else { None };
    let mut trainer = Trainer::new(cfg.variant, agent_cfg, spec, Some(Box::new(sim)), dataset, cfg.seed)?;

    let eval = |t: &Trainer, step: u64, w: &Window| -> Result<EvalPoint> {
        let r = evaluate_policy(&cfg.env.real, &t.agent.actor, cfg.eval_episodes, cfg.seed)?;
        Ok(EvalPoint {
            step,
            return_mean: r.mean,
            return_std: r.std,
            loss_critic: w.mean(0),
            loss_actor: w.mean(1),
            mean_u: w.mean(2),
            mean_w: w.mean(3),
            omega_entropy: w.mean(4),
        })
    };

    let mut evals = vec![eval(&trainer, 0, &Window::default())?];
    let mut window = Window::default();
    let mut last: Option<StepMetrics> = None;
    for step in 1..=cfg.total_steps {
        let m = trainer.train_step().map_err(|e| abort(cfg, step, last.as_ref(), e))?;
        window.add(&m);
        last = Some(m);
        if step % cfg.eval_every == 0 || step == cfg.total_steps {
            evals.push(eval(&trainer, step, &window)?);
            window = Window::default();
        }
    }

    let mut report = RunReport {
        variant: cfg.variant.variant_name(),
        gap: cfg.env.gap.name().to_string(),
        seed: cfg.seed,
        evals,
        manifest: None,
    };
    if let Some(dir) = &cfg.out_dir {
        let ckpt = dir.join("checkpoints").join("final");
        save_checkpoint(&ckpt, &trainer.agent, trainer.pair.as_ref(), &cfg.variant, cfg.total_steps)?;
        report.manifest = Some(load_checkpoint(&ckpt)?.manifest);
        emit_curves(&report, dir)?;
        write_json(dir.join("report.json"), &RunSummary::from_reports(&[report.clone()]))?;
        fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    }
    Ok(report)
}

/// Wraps a training failure with the config, step and last metrics, and writes the
/// bundle to `diagnostic.json` when an output directory is configured.
fn abort(cfg: &ExperimentConfig, step: u64, last: Option<&StepMetrics>, err: Error) -> Error {
    let bundle = serde_json::json!({
        "config": cfg,
        "step": step,
        "last_metrics": last.map(|m| format!("{m:?}")),
        "error": err.to_string(),
    });
    if let Some(dir) = &cfg.out_dir {
        let _ = fs::create_dir_all(dir);
        let _ = fs::write(dir.join("diagnostic.json"), bundle.to_string());
    }
    Error::Aborted { step, category: err.category(), bundle: bundle.to_string() }
}

/// Per-seed final returns, as written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: String,
    pub gap: String,
    pub seeds: Vec<SeedSummary>,
    pub mean_final_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_return_mean: f64,
    pub final_return_std: f64,
    pub steps: u64,
}

impl RunSummary {
    pub fn from_reports(reports: &[RunReport]) -> Self {
        let seeds: Vec<SeedSummary> = reports
            .iter()
            .map(|r| {
                let e = r.final_eval();
                SeedSummary { seed: r.seed, final_return_mean: e.return_mean, final_return_std: e.return_std, steps: e.step }
            })
            .collect();
        let mean = seeds.iter().map(|s| s.final_return_mean).sum::<f64>() / seeds.len().max(1) as f64;
        RunSummary {
            variant: reports.first().map(|r| r.variant.clone()).unwrap_or_default(),
            gap: reports.first().map(|r| r.gap.clone()).unwrap_or_default(),
            seeds,
            mean_final_return: mean,
        }
    }
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}
