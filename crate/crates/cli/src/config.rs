//! Layered configuration: defaults, then the TOML file, then flags.
//! The manifest snapshots the merged result so a run can be replayed.

use std::path::Path;

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use speccurve::exec::ExecMode;
use speccurve::judge::JudgeEndpoint;
use speccurve::metrics::{MetricKind, ScoreOptions};
use speccurve::pipeline::{BudgetSpec, PipelineConfig, SmoothingMode};
use speccurve::smooth::SgConfig;
use speccurve::synth::DEFAULT_MASTER_SEED;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub smooth: SmoothSection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub score: ScoreSection,
    #[serde(default)]
    pub judge: JudgeSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothSection {
    pub window: Option<usize>,
    pub order: Option<usize>,
    /// auto | on | off
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub baseline_fraction: Option<f64>,
    pub budget_fraction: Option<f64>,
    pub epsilon: Option<f64>,
    pub target_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSection {
    pub unit_square: Option<bool>,
    pub strict_eq2: Option<bool>,
    pub penalize_unmatched: Option<bool>,
    /// chamfer | hausdorff
    pub match_metric: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeSection {
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub concurrency: Option<usize>,
    pub max_attempts: Option<u32>,
    pub backoff_ms: Option<u64>,
    pub timeout_secs: Option<u64>,
}

/// Global run state shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub file: FileConfig,
    pub mode: ExecMode,
    pub seed: u64,
    pub command_line: String,
}

impl RunContext {
    pub fn build(
        config_path: Option<&Path>,
        workers: Option<usize>,
        sequential: bool,
        seed: Option<u64>,
    ) -> anyhow::Result<Self> {
        let file: FileConfig = match config_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
            }
            None => FileConfig::default(),
        };

        let workers = workers.or(file.run.workers);
        #[cfg(feature = "parallel")]
        if let Some(w) = workers {
            // First build wins; later commands inherit the pool.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global();
        }
        #[cfg(not(feature = "parallel"))]
        if workers.is_some() {
            eprintln!("note: built without the `parallel` feature; --workers is ignored");
        }

        let mode = if sequential {
            ExecMode::Sequential
        } else {
            ExecMode::default()
        };
        Ok(RunContext {
            mode,
            seed: seed.or(file.run.seed).unwrap_or(DEFAULT_MASTER_SEED),
            command_line: std::env::args().collect::<Vec<_>>().join(" "),
            file,
        })
    }

    /// Effective Savitzky-Golay settings after flag overrides.
    pub fn sg_config(&self, window: Option<usize>, order: Option<usize>) -> SgConfig {
        let default = SgConfig::default();
        SgConfig {
            window: window.or(self.file.smooth.window).unwrap_or(default.window),
            poly_order: order.or(self.file.smooth.order).unwrap_or(default.poly_order),
        }
    }

    pub fn smoothing_mode(&self) -> anyhow::Result<SmoothingMode> {
        match self.file.smooth.mode.as_deref() {
            None | Some("auto") => Ok(SmoothingMode::Auto),
            Some("on") => Ok(SmoothingMode::On),
            Some("off") => Ok(SmoothingMode::Off),
            Some(other) => Err(anyhow!("smooth.mode must be auto|on|off, got `{other}`")),
        }
    }

    pub fn score_options(
        &self,
        strict_eq2: bool,
        penalize_unmatched: bool,
        raw_units: bool,
    ) -> anyhow::Result<ScoreOptions> {
        let defaults = ScoreOptions::default();
        let match_metric = match self.file.score.match_metric.as_deref() {
            None | Some("chamfer") => MetricKind::Chamfer,
            Some("hausdorff") => MetricKind::Hausdorff,
            Some(other) => return Err(anyhow!("score.match_metric must be chamfer|hausdorff, got `{other}`")),
        };
        Ok(ScoreOptions {
            unit_square: !raw_units && self.file.score.unit_square.unwrap_or(defaults.unit_square),
            strict_squared: strict_eq2 || self.file.score.strict_eq2.unwrap_or(defaults.strict_squared),
            penalize_unmatched: penalize_unmatched
                || self.file.score.penalize_unmatched.unwrap_or(defaults.penalize_unmatched),
            match_metric,
        })
    }

    /// Effective pipeline configuration after flag overrides.
    #[allow(clippy::too_many_arguments)]
    pub fn pipeline_config(
        &self,
        window: Option<usize>,
        order: Option<usize>,
        baseline_frac: Option<f64>,
        budget_frac: Option<f64>,
        epsilon: Option<f64>,
        strict_eq2: bool,
        raw_units: bool,
    ) -> anyhow::Result<PipelineConfig> {
        let defaults = PipelineConfig::default();
        let budget = if let Some(e) = epsilon.or(self.file.sampling.epsilon) {
            BudgetSpec::Epsilon(e)
        } else if let Some(k) = self.file.sampling.target_points {
            BudgetSpec::Points(k)
        } else if let Some(f) = budget_frac.or(self.file.sampling.budget_fraction) {
            BudgetSpec::Fraction(f)
        } else {
            defaults.budget
        };
        Ok(PipelineConfig {
            sg: self.sg_config(window, order),
            smoothing: self.smoothing_mode()?,
            baseline_fraction: baseline_frac
                .or(self.file.sampling.baseline_fraction)
                .unwrap_or(defaults.baseline_fraction),
            budget,
            grid: defaults.grid,
            score: self.score_options(strict_eq2, false, raw_units)?,
        })
    }

    pub fn judge_endpoint(
        &self,
        endpoint: Option<&str>,
        model: Option<&str>,
        api_key_env: Option<&str>,
        concurrency: Option<usize>,
    ) -> Option<JudgeEndpoint> {
        let base_url = endpoint.map(str::to_owned).or_else(|| self.file.judge.base_url.clone())?;
        let model = model
            .map(str::to_owned)
            .or_else(|| self.file.judge.model.clone())
            .unwrap_or_else(|| "gpt-o4-mini".to_string());
        let mut ep = JudgeEndpoint::new(base_url, model);
        if let Some(env) = api_key_env.map(str::to_owned).or_else(|| self.file.judge.api_key_env.clone()) {
            ep.api_key_env = env;
        }
        if let Some(c) = concurrency.or(self.file.judge.concurrency) {
            ep.concurrency = c.max(1);
        }
        if let Some(a) = self.file.judge.max_attempts {
            ep.max_attempts = a.max(1);
        }
        if let Some(b) = self.file.judge.backoff_ms {
            ep.backoff_ms = b;
        }
        if let Some(t) = self.file.judge.timeout_secs {
            ep.timeout_secs = t;
        }
        Some(ep)
    }
}

pub fn parse_metric_selector(metric: &str) -> anyhow::Result<Vec<MetricKind>> {
    match metric {
        "cd" => Ok(vec![MetricKind::Chamfer]),
        "hd" => Ok(vec![MetricKind::Hausdorff]),
        "wd" => Ok(vec![MetricKind::Wasserstein]),
        "all" => Ok(MetricKind::ALL.to_vec()),
        other => Err(anyhow!("metric must be cd|hd|wd|all, got `{other}`")),
    }
}

pub fn metric_column_name(kind: MetricKind) -> &'static str {
    match kind {
        MetricKind::Chamfer => "Score-Chamfer Distance",
        MetricKind::Hausdorff => "Score-Hausdorff Distance",
        MetricKind::Wasserstein => "Score-Wasserstein Distance",
    }
}
