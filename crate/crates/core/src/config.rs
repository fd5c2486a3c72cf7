//! Experiment configuration: a flat, diffable key=value format whose
//! serialization round-trips bit-exactly.

use std::fmt;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::synthetic::ShapeSpec;

#[derive(Debug, Clone, PartialEq)]
pub enum StimulusSpec {
    File(PathBuf),
    Synthetic(ShapeSpec),
}

impl fmt::Display for StimulusSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StimulusSpec::File(path) => write!(f, "file:{}", path.display()),
            StimulusSpec::Synthetic(spec) => write!(f, "synthetic:{spec}"),
        }
    }
}

impl StimulusSpec {
    pub fn parse(text: &str) -> Result<Self> {
        match text.split_once(':') {
            Some(("file", path)) if !path.is_empty() => {
                Ok(StimulusSpec::File(PathBuf::from(path)))
            }
            Some(("synthetic", rest)) => Ok(StimulusSpec::Synthetic(ShapeSpec::parse(rest)?)),
            _ => Err(Error::Config(format!(
                "stimulus {text:?} is neither file:<path> nor synthetic:<shape>"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sigma: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub kernel_size: usize,
    pub kernel_zero_mean: bool,
    pub kernel_unit_norm: bool,
    pub blank_fraction: f64,
    pub tile_stride: usize,
    pub novelty_fraction: f64,
    pub var_fraction: f64,
    pub global_beta: bool,
    pub epsilon: f64,
    pub alpha: f64,
    pub grid_radius: i64,
    pub indicator_metric: bool,
    pub coherence_threshold: f64,
    pub feedback: bool,
    pub reset_counters: bool,
    pub resize: bool,
    pub seed: u64,
    pub stimuli: Vec<StimulusSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sigma: 2.8,
            lambda: 3.5,
            gamma: 0.3,
            kernel_size: 7,
            kernel_zero_mean: false,
            kernel_unit_norm: false,
            blank_fraction: 0.1,
            tile_stride: 3,
            novelty_fraction: 0.1,
            var_fraction: 0.1,
            global_beta: false,
            epsilon: 0.1,
            alpha: 0.67,
            grid_radius: 5,
            indicator_metric: false,
            coherence_threshold: 0.5,
            feedback: true,
            reset_counters: false,
            resize: false,
            seed: 42,
            stimuli: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    /// Fixed key order; repeated `stimulus` lines carry the presentation list.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        push("sigma", self.sigma.to_string());
        push("lambda", self.lambda.to_string());
        push("gamma", self.gamma.to_string());
        push("kernel_size", self.kernel_size.to_string());
        push("kernel_zero_mean", self.kernel_zero_mean.to_string());
        push("kernel_unit_norm", self.kernel_unit_norm.to_string());
        push("blank_fraction", self.blank_fraction.to_string());
        push("tile_stride", self.tile_stride.to_string());
        push("novelty_fraction", self.novelty_fraction.to_string());
        push("var_fraction", self.var_fraction.to_string());
        push("global_beta", self.global_beta.to_string());
        push("epsilon", self.epsilon.to_string());
        push("alpha", self.alpha.to_string());
        push("grid_radius", self.grid_radius.to_string());
        push("indicator_metric", self.indicator_metric.to_string());
        push("coherence_threshold", self.coherence_threshold.to_string());
        push("feedback", self.feedback.to_string());
        push("reset_counters", self.reset_counters.to_string());
        push("resize", self.resize.to_string());
        push("seed", self.seed.to_string());
        for s in &self.stimuli {
            push("stimulus", s.to_string());
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key != "stimulus" && seen.contains(&key) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {key}",
                    lineno + 1
                )));
            }
            let bad = |what: &str| Error::Config(format!("line {}: bad {what}: {value:?}", lineno + 1));
            match key {
                "sigma" => config.sigma = value.parse().map_err(|_| bad("sigma"))?,
                "lambda" => config.lambda = value.parse().map_err(|_| bad("lambda"))?,
                "gamma" => config.gamma = value.parse().map_err(|_| bad("gamma"))?,
                "kernel_size" => config.kernel_size = value.parse().map_err(|_| bad("kernel_size"))?,
                "kernel_zero_mean" => {
                    config.kernel_zero_mean = value.parse().map_err(|_| bad("kernel_zero_mean"))?
                }
                "kernel_unit_norm" => {
                    config.kernel_unit_norm = value.parse().map_err(|_| bad("kernel_unit_norm"))?
                }
                "blank_fraction" => {
                    config.blank_fraction = value.parse().map_err(|_| bad("blank_fraction"))?
                }
                "tile_stride" => config.tile_stride = value.parse().map_err(|_| bad("tile_stride"))?,
                "novelty_fraction" => {
                    config.novelty_fraction = value.parse().map_err(|_| bad("novelty_fraction"))?
                }
                "var_fraction" => config.var_fraction = value.parse().map_err(|_| bad("var_fraction"))?,
                "global_beta" => config.global_beta = value.parse().map_err(|_| bad("global_beta"))?,
                "epsilon" => config.epsilon = value.parse().map_err(|_| bad("epsilon"))?,
                "alpha" => config.alpha = value.parse().map_err(|_| bad("alpha"))?,
                "grid_radius" => config.grid_radius = value.parse().map_err(|_| bad("grid_radius"))?,
                "indicator_metric" => {
                    config.indicator_metric = value.parse().map_err(|_| bad("indicator_metric"))?
                }
                "coherence_threshold" => {
                    config.coherence_threshold =
                        value.parse().map_err(|_| bad("coherence_threshold"))?
                }
                "feedback" => config.feedback = value.parse().map_err(|_| bad("feedback"))?,
                "reset_counters" => {
                    config.reset_counters = value.parse().map_err(|_| bad("reset_counters"))?
                }
                "resize" => config.resize = value.parse().map_err(|_| bad("resize"))?,
                "seed" => config.seed = value.parse().map_err(|_| bad("seed"))?,
                "stimulus" => config.stimuli.push(StimulusSpec::parse(value)?),
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
            if key != "stimulus" {
                seen.push(key);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        // NaN must fail every range check, so each test is phrased as
        // "finite and inside", never as a negated comparison.
        let fail = |msg: String| Err(Error::Config(msg));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.sigma) {
            return fail(format!("sigma {} must be positive", self.sigma));
        }
        if !positive(self.lambda) {
            return fail(format!("lambda {} must be positive", self.lambda));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return fail(format!("gamma {} must be nonnegative", self.gamma));
        }
        if self.kernel_size < 3 || self.kernel_size.is_multiple_of(2) {
            return fail(format!("kernel_size {} must be odd and at least 3", self.kernel_size));
        }
        if !(0.0..=1.0).contains(&self.blank_fraction) {
            return fail(format!("blank_fraction {} outside [0,1]", self.blank_fraction));
        }
        if self.tile_stride == 0 {
            return fail("tile_stride must be positive".into());
        }
        if !(self.novelty_fraction.is_finite() && self.novelty_fraction >= 0.0) {
            return fail(format!("novelty_fraction {} negative", self.novelty_fraction));
        }
        if !positive(self.var_fraction) {
            return fail(format!("var_fraction {} must be positive", self.var_fraction));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail(format!("epsilon {} outside (0,1)", self.epsilon));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha {} outside (0,1)", self.alpha));
        }
        if !(0..=100).contains(&self.grid_radius) {
            return fail(format!("grid_radius {} outside 0..=100", self.grid_radius));
        }
        if !(self.coherence_threshold.is_finite()
            && self.coherence_threshold > 0.0
            && self.coherence_threshold <= 1.0)
        {
            return fail(format!(
                "coherence_threshold {} outside (0,1]",
                self.coherence_threshold
            ));
        }
        Ok(())
    }
}
