//! Run configuration: defaults, then a `key = value` file, then flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use neca_core::kv::KeyValues;
use neca_core::{NecaConfig, TrainConfig};
use serde::{Deserialize, Serialize};

/// Every tunable of one embedding run. One seed drives graph construction and initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub heads: usize,
    pub head_dim: usize,
    pub fusion_dim: usize,
    pub leaky_slope: f64,
    pub elu_alpha: f64,
    pub self_loop: bool,
    pub share_projection: bool,
    pub beta_connect: f64,
    pub sigma: f64,
    pub epochs: usize,
    pub lr: f64,
    pub tol: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub clamp_eps: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = NecaConfig::default();
        let train = TrainConfig::default();
        Self {
            seed: 0,
            heads: model.heads,
            head_dim: model.head_dim,
            fusion_dim: model.fusion_dim,
            leaky_slope: model.leaky_slope,
            elu_alpha: model.elu_alpha,
            self_loop: model.include_self_loop,
            share_projection: model.share_projection,
            beta_connect: 0.01,
            sigma: train.kernel_sigma,
            epochs: train.max_epochs,
            lr: train.learning_rate,
            tol: train.rel_tol,
            adam_beta1: train.adam_beta1,
            adam_beta2: train.adam_beta2,
            adam_eps: train.adam_epsilon,
            clamp_eps: train.clamp_eps,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    match v {
        "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
        _ => v
            .parse()
            .with_context(|| format!("{key}: `{v}` is not a number")),
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .with_context(|| format!("{key}: `{v}` is not a non-negative integer"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("{key}: expected true or false, found `{v}`"),
    }
}

impl RunConfig {
    pub fn model(&self) -> NecaConfig {
        NecaConfig {
            heads: self.heads,
            head_dim: self.head_dim,
            fusion_dim: self.fusion_dim,
            leaky_slope: self.leaky_slope,
            elu_alpha: self.elu_alpha,
            include_self_loop: self.self_loop,
            share_projection: self.share_projection,
            seed: self.seed,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_epsilon: self.adam_eps,
            max_epochs: self.epochs,
            rel_tol: self.tol,
            kernel_sigma: self.sigma,
            clamp_eps: self.clamp_eps,
            seed: self.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Overrides fields named in `kv`; unknown keys are errors.
    pub fn apply_kv(&mut self, kv: &KeyValues) -> Result<()> {
        for (key, v) in kv.iter() {
            match key {
                "seed" => {
                    self.seed = v
                        .parse()
                        .with_context(|| format!("seed: `{v}` is not an integer"))?
                }
                "heads" => self.heads = parse_usize(key, v)?,
                "head_dim" => self.head_dim = parse_usize(key, v)?,
                "fusion_dim" => self.fusion_dim = parse_usize(key, v)?,
                "leaky_slope" => self.leaky_slope = parse_f64(key, v)?,
                "elu_alpha" => self.elu_alpha = parse_f64(key, v)?,
                "self_loop" => self.self_loop = parse_bool(key, v)?,
                "share_projection" => self.share_projection = parse_bool(key, v)?,
                "beta_connect" => self.beta_connect = parse_f64(key, v)?,
                "sigma" => self.sigma = parse_f64(key, v)?,
                "epochs" => self.epochs = parse_usize(key, v)?,
                "lr" => self.lr = parse_f64(key, v)?,
                "tol" => self.tol = parse_f64(key, v)?,
                "adam_beta1" => self.adam_beta1 = parse_f64(key, v)?,
                "adam_beta2" => self.adam_beta2 = parse_f64(key, v)?,
                "adam_eps" => self.adam_eps = parse_f64(key, v)?,
                "clamp_eps" => self.clamp_eps = parse_f64(key, v)?,
                other => bail!("unknown config key `{other}`"),
            }
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.insert("seed", self.seed.to_string());
        kv.insert("heads", self.heads.to_string());
        kv.insert("head_dim", self.head_dim.to_string());
        kv.insert("fusion_dim", self.fusion_dim.to_string());
        kv.insert("leaky_slope", self.leaky_slope.to_string());
        kv.insert("elu_alpha", self.elu_alpha.to_string());
        kv.insert("self_loop", self.self_loop.to_string());
        kv.insert("share_projection", self.share_projection.to_string());
        kv.insert("beta_connect", self.beta_connect.to_string());
        kv.insert("sigma", self.sigma.to_string());
        kv.insert("epochs", self.epochs.to_string());
        kv.insert("lr", self.lr.to_string());
        kv.insert("tol", self.tol.to_string());
        kv.insert("adam_beta1", self.adam_beta1.to_string());
        kv.insert("adam_beta2", self.adam_beta2.to_string());
        kv.insert("adam_eps", self.adam_eps.to_string());
        kv.insert("clamp_eps", self.clamp_eps.to_string());
        kv
    }

    pub fn validate(&self) -> Result<()> {
        self.model().validate()?;
        self.train().validate()?;
        if !(self.beta_connect > 0.0 && self.beta_connect.is_finite()) {
            bail!("beta_connect must be positive, got {}", self.beta_connect);
        }
        Ok(())
    }
}

/// Flags that mirror [`RunConfig`].
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// `key = value` file applied before flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Attention heads per network.
    #[arg(long)]
    pub heads: Option<usize>,
    /// Width of each head.
    #[arg(long)]
    pub head_dim: Option<usize>,
    /// Hidden width of the importance score.
    #[arg(long)]
    pub fusion_dim: Option<usize>,
    #[arg(long)]
    pub leaky_slope: Option<f64>,
    #[arg(long)]
    pub elu_alpha: Option<f64>,
    /// Let every node attend to itself.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub self_loop: Option<bool>,
    /// One projection per head for both networks.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub share_projection: Option<bool>,
    /// Affinity of the cross-attribute edges added to the intra network.
    #[arg(long)]
    pub beta_connect: Option<f64>,
    /// Bandwidth of the Gaussian kernel in the loss.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Maximum number of epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Relative loss change below which training stops (`inf` stops after one epoch).
    #[arg(long, value_parser = parse_tol)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub adam_beta1: Option<f64>,
    #[arg(long)]
    pub adam_beta2: Option<f64>,
    #[arg(long)]
    pub adam_eps: Option<f64>,
    #[arg(long)]
    pub clamp_eps: Option<f64>,
}

fn parse_tol(s: &str) -> Result<f64, String> {
    parse_f64("tol", s).map_err(|e| e.to_string())
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        self.resolve_over(RunConfig::default())
    }

    /// Applies the config file and then the flags on top of `base`.
    pub fn resolve_over(&self, base: RunConfig) -> Result<RunConfig> {
        let mut cfg = base;
        if let Some(path) = &self.config {
            cfg.apply_kv(&read_kv(path)?)
                .with_context(|| format!("config file {}", path.display()))?;
        }
        macro_rules! flag {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        flag!(
            seed,
            heads,
            head_dim,
            fusion_dim,
            leaky_slope,
            elu_alpha,
            self_loop,
            share_projection,
            beta_connect,
            sigma,
            epochs,
            lr,
            tol,
            adam_beta1,
            adam_beta2,
            adam_eps,
            clamp_eps
        );
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_kv(path: &Path) -> Result<KeyValues> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    KeyValues::parse(&text).with_context(|| format!("parsing {}", path.display()))
}
