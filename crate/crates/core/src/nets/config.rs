//! Training configuration: presets, flat `key = value` files, validation.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::init::{AScheme, FScheme, InitSpec};
use crate::layers::{round_up, LayerKind};
use crate::norm::VarianceDivisor;

/// Source of the algebra matrices in PH layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgebraKind {
    /// Learned `Aᵢ`.
    Ph,
    /// Fixed Hamilton pattern (`n = 4` only).
    Quaternion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub n: usize,
    pub algebra: AlgebraKind,
    pub image_size: usize,
    pub channels_base: usize,
    pub channels_max: usize,
    pub num_domains: usize,
    pub latent_dim: usize,
    pub style_dim: usize,
    pub mapping_width: usize,
    /// Generator encoder blocks (the decoder mirrors them).
    pub g_blocks: usize,
    /// How many of those blocks pool / upsample.
    pub g_downsample: usize,
    /// Downsampling blocks in the style encoder and discriminator trunk.
    pub trunk_blocks: usize,
    pub batch: usize,
    pub lambda_sty: f64,
    pub lambda_cyc: f64,
    pub lambda_ds_init: f64,
    pub total_iters: u64,
    pub lr: f64,
    pub lr_mapping: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub seed: u64,
    pub a_init: AScheme,
    pub f_init: FScheme,
    pub hin_divisor: VarianceDivisor,
    pub sample_every: u64,
    pub checkpoint_every: u64,
    /// Images generated by `--synthetic`.
    pub synthetic_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::desk()
    }
}

impl TrainConfig {
    /// 32×32 images, trainable on a laptop CPU.
    pub fn desk() -> Self {
        TrainConfig {
            n: 4,
            algebra: AlgebraKind::Ph,
            image_size: 32,
            channels_base: 32,
            channels_max: 128,
            num_domains: 2,
            latent_dim: 16,
            style_dim: 64,
            mapping_width: 128,
            g_blocks: 5,
            g_downsample: 3,
            trunk_blocks: 4,
            batch: 8,
            lambda_sty: 1.0,
            lambda_cyc: 1.0,
            lambda_ds_init: 1.0,
            total_iters: 2000,
            lr: 1e-4,
            lr_mapping: 1e-6,
            adam_beta1: 0.0,
            adam_beta2: 0.99,
            seed: 0,
            a_init: AScheme::RandIntegerA,
            f_init: FScheme::XavierNormal,
            hin_divisor: VarianceDivisor::Spatial,
            sample_every: 500,
            checkpoint_every: 1000,
            synthetic_count: 512,
        }
    }

    /// Full-size 256×256 topology. Used for parameter counting.
    pub fn full() -> Self {
        TrainConfig {
            image_size: 256,
            channels_base: 64,
            channels_max: 512,
            mapping_width: 512,
            g_blocks: 7,
            g_downsample: 5,
            trunk_blocks: 6,
            total_iters: 100_000,
            ..TrainConfig::desk()
        }
    }

    /// Tiny 16×16 topology for quick end-to-end runs.
    pub fn smoke() -> Self {
        TrainConfig {
            image_size: 16,
            channels_base: 8,
            channels_max: 16,
            mapping_width: 32,
            g_blocks: 3,
            g_downsample: 2,
            trunk_blocks: 3,
            batch: 2,
            sample_every: 0,
            checkpoint_every: 0,
            synthetic_count: 64,
            ..TrainConfig::desk()
        }
    }

    /// 8×8 images and width-8 layers, for end-to-end gradient checks.
    pub fn micro() -> Self {
        TrainConfig {
            image_size: 8,
            channels_base: 8,
            channels_max: 8,
            latent_dim: 4,
            style_dim: 8,
            mapping_width: 8,
            g_blocks: 2,
            g_downsample: 1,
            trunk_blocks: 2,
            total_iters: 10,
            synthetic_count: 16,
            ..TrainConfig::smoke()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(TrainConfig::desk()),
            "full" => Ok(TrainConfig::full()),
            "smoke" => Ok(TrainConfig::smoke()),
            "micro" => Ok(TrainConfig::micro()),
            _ => Err(Error::Config(format!("unknown preset `{name}` (expected desk, full, smoke or micro)"))),
        }
    }

    pub fn layer_kind(&self) -> LayerKind {
        match (self.n, self.algebra) {
            (_, AlgebraKind::Quaternion) => LayerKind::Quaternion,
            (1, AlgebraKind::Ph) => LayerKind::Real,
            (n, AlgebraKind::Ph) => LayerKind::Ph(n),
        }
    }

    /// A channel or feature width rounded up to a multiple of `n`.
    pub fn width(&self, w: usize) -> usize {
        round_up(w, self.n)
    }

    /// RGB padded with zero channels up to a multiple of `n`.
    pub fn image_channels(&self) -> usize {
        self.width(3)
    }

    pub fn init_spec(&self) -> InitSpec {
        InitSpec { scheme: self.a_init, f_scheme: self.f_init, seed: self.seed }
    }

    /// `λ_ds · max(0, 1 − iter/total)` for the 1-based iteration `iter`.
    pub fn lambda_ds(&self, iter: u64) -> f64 {
        self.lambda_ds_init * (1.0 - iter as f64 / self.total_iters as f64).max(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(1..=4).contains(&self.n) {
            return bad(format!(
                "n = {} is not supported: n must be 1, 2, 3 or 4 so that the 3 image channels \
                 pad to at most 4 (round_up(3, n) channels) and every width is divisible by n",
                self.n
            ));
        }
        if self.algebra == AlgebraKind::Quaternion && self.n != 4 {
            return bad(format!("algebra = quaternion requires n = 4, got n = {}", self.n));
        }
        if self.a_init == AScheme::QuatPatternA && self.n != 4 {
            return bad(format!("a_init = quat_pattern_A requires n = 4, got n = {}", self.n));
        }
        if !self.image_size.is_power_of_two() {
            return bad(format!("image_size {} must be a power of two", self.image_size));
        }
        if self.g_downsample > self.g_blocks {
            return bad(format!("g_downsample {} exceeds g_blocks {}", self.g_downsample, self.g_blocks));
        }
        if self.image_size < 1 << (self.g_downsample + 1) {
            return bad(format!(
                "image_size {} underflows after {} generator downsamplings (need at least {})",
                self.image_size,
                self.g_downsample,
                1usize << (self.g_downsample + 1)
            ));
        }
        if self.image_size >> self.trunk_blocks == 0 {
            return bad(format!("image_size {} underflows after {} trunk blocks", self.image_size, self.trunk_blocks));
        }
        if self.num_domains < 2 {
            return bad(format!("num_domains must be at least 2, got {}", self.num_domains));
        }
        for (name, v) in [
            ("channels_base", self.channels_base),
            ("channels_max", self.channels_max),
            ("latent_dim", self.latent_dim),
            ("style_dim", self.style_dim),
            ("mapping_width", self.mapping_width),
            ("batch", self.batch),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.channels_max < self.channels_base {
            return bad("channels_max must be at least channels_base".into());
        }
        if self.total_iters == 0 {
            return bad("total_iters must be positive".into());
        }
        for (name, v) in [("lr", self.lr), ("lr_mapping", self.lr_mapping)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be a positive number"));
            }
        }
        for (name, v) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1)"));
            }
        }
        for (name, v) in [
            ("lambda_sty", self.lambda_sty),
            ("lambda_cyc", self.lambda_cyc),
            ("lambda_ds_init", self.lambda_ds_init),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        Ok(())
    }

    /// Parses a `key = value` file. A `preset` key selects the starting
    /// point (default `desk`); all other keys override it. `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut preset = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got `{line}`", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "preset" {
                preset = Some(v.to_string());
            } else {
                pairs.push((lineno + 1, k.to_string(), v.to_string()));
            }
        }
        let mut cfg = match preset {
            Some(p) => TrainConfig::preset(&p)?,
            None => TrainConfig::desk(),
        };
        for (lineno, k, v) in pairs {
            cfg.set(&k, &v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {lineno}: {m}")),
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
        }
        match key {
            "n" => self.n = num(key, value)?,
            "algebra" => {
                self.algebra = match value {
                    "ph" => AlgebraKind::Ph,
                    "quaternion" => AlgebraKind::Quaternion,
                    _ => return Err(Error::Config(format!("`algebra`: expected ph or quaternion, got `{value}`"))),
                }
            }
            "image_size" => self.image_size = num(key, value)?,
            "channels_base" => self.channels_base = num(key, value)?,
            "channels_max" => self.channels_max = num(key, value)?,
            "num_domains" => self.num_domains = num(key, value)?,
            "latent_dim" => self.latent_dim = num(key, value)?,
            "style_dim" => self.style_dim = num(key, value)?,
            "mapping_width" => self.mapping_width = num(key, value)?,
            "g_blocks" => self.g_blocks = num(key, value)?,
            "g_downsample" => self.g_downsample = num(key, value)?,
            "trunk_blocks" => self.trunk_blocks = num(key, value)?,
            "batch" => self.batch = num(key, value)?,
            "lambda_sty" => self.lambda_sty = num(key, value)?,
            "lambda_cyc" => self.lambda_cyc = num(key, value)?,
            "lambda_ds_init" => self.lambda_ds_init = num(key, value)?,
            "total_iters" => self.total_iters = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "lr_mapping" => self.lr_mapping = num(key, value)?,
            "adam_beta1" => self.adam_beta1 = num(key, value)?,
            "adam_beta2" => self.adam_beta2 = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "a_init" => self.a_init = value.parse()?,
            "f_init" => self.f_init = value.parse()?,
            "hin_divisor" => {
                self.hin_divisor = match value {
                    "hw" => VarianceDivisor::Spatial,
                    "n_hw" => VarianceDivisor::ComponentMean,
                    _ => return Err(Error::Config(format!("`hin_divisor`: expected hw or n_hw, got `{value}`"))),
                }
            }
            "sample_every" => self.sample_every = num(key, value)?,
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            "synthetic_count" => self.synthetic_count = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Every field as `key = value`; [`TrainConfig::parse`] reads it back
    /// to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let algebra = match self.algebra {
            AlgebraKind::Ph => "ph",
            AlgebraKind::Quaternion => "quaternion",
        };
        let divisor = match self.hin_divisor {
            VarianceDivisor::Spatial => "hw",
            VarianceDivisor::ComponentMean => "n_hw",
        };
        let fields: [(&str, String); 28] = [
            ("n", self.n.to_string()),
            ("algebra", algebra.into()),
            ("image_size", self.image_size.to_string()),
            ("channels_base", self.channels_base.to_string()),
            ("channels_max", self.channels_max.to_string()),
            ("num_domains", self.num_domains.to_string()),
            ("latent_dim", self.latent_dim.to_string()),
            ("style_dim", self.style_dim.to_string()),
            ("mapping_width", self.mapping_width.to_string()),
            ("g_blocks", self.g_blocks.to_string()),
            ("g_downsample", self.g_downsample.to_string()),
            ("trunk_blocks", self.trunk_blocks.to_string()),
            ("batch", self.batch.to_string()),
            ("lambda_sty", self.lambda_sty.to_string()),
            ("lambda_cyc", self.lambda_cyc.to_string()),
            ("lambda_ds_init", self.lambda_ds_init.to_string()),
            ("total_iters", self.total_iters.to_string()),
            ("lr", self.lr.to_string()),
            ("lr_mapping", self.lr_mapping.to_string()),
            ("adam_beta1", self.adam_beta1.to_string()),
            ("adam_beta2", self.adam_beta2.to_string()),
            ("seed", self.seed.to_string()),
            ("a_init", self.a_init.to_string()),
            ("f_init", self.f_init.to_string()),
            ("hin_divisor", divisor.into()),
            ("sample_every", self.sample_every.to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
            ("synthetic_count", self.synthetic_count.to_string()),
        ];
        for (k, v) in fields {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
