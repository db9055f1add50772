//! The model bundle and the two-phase training step.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::init::initialize;
use crate::layers::{count_params, NamedParam, ParamCount, Params};
use crate::tensor::{no_grad, Tensor};

use super::adam::AdamState;
use super::config::TrainConfig;
use super::losses::{adversarial_loss, cycle_loss, diversification_loss, generator_objective, style_reconstruction_loss, LossWeights, Side};
use super::networks::{Discriminator, Generator, MappingNetwork, StyleEncoder};

/// Where the target style code comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// `s̃ = M(z, ỹ)`
    Latent,
    /// `s̃ = S(x_ref, ỹ)`
    Reference,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Latent => "latent",
            Phase::Reference => "reference",
        })
    }
}

/// Scalar losses of one phase of one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub iter: u64,
    pub phase: Phase,
    pub adv_d: f64,
    pub adv_g: f64,
    pub sty: f64,
    pub ds: f64,
    pub cyc: f64,
    pub lambda_ds: f64,
}

impl LossReport {
    pub const CSV_HEADER: &'static str = "iter,phase,adv_d,adv_g,sty,ds,cyc,lambda_ds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.iter, self.phase, self.adv_d, self.adv_g, self.sty, self.ds, self.cyc, self.lambda_ds
        )
    }

    pub fn is_finite(&self) -> bool {
        [self.adv_d, self.adv_g, self.sty, self.ds, self.cyc].iter().all(|v| v.is_finite())
    }
}

/// Inputs of one iteration.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Tensor,
    pub y: Vec<usize>,
    pub y_trg: Vec<usize>,
    pub x_ref: Tensor,
    pub x_ref2: Tensor,
    pub z: Tensor,
    pub z2: Tensor,
}

/// Draws sources uniformly, target domains uniformly, references from the
/// target domains and two latent codes per sample.
pub fn sample_batch<R: Rng + ?Sized>(data: &Dataset, cfg: &TrainConfig, rng: &mut R) -> Result<Batch> {
    if data.num_domains != cfg.num_domains {
        return Err(Error::Data(format!(
            "dataset has {} domains, config expects {}",
            data.num_domains, cfg.num_domains
        )));
    }
    if data.size != cfg.image_size {
        return Err(Error::Data(format!("dataset images are {0}×{0}, config expects {1}×{1}", data.size, cfg.image_size)));
    }
    let by_domain = data.by_domain();
    if let Some(d) = by_domain.iter().position(|v| v.is_empty()) {
        return Err(Error::Data(format!("domain {d} has no images")));
    }
    let b = cfg.batch;
    let idx: Vec<usize> = (0..b).map(|_| rng.random_range(0..data.len())).collect();
    let y_trg: Vec<usize> = (0..b).map(|_| rng.random_range(0..cfg.num_domains)).collect();
    let mut pick = |d: usize| by_domain[d][rng.random_range(0..by_domain[d].len())];
    let r1: Vec<usize> = y_trg.iter().map(|&d| pick(d)).collect();
    let r2: Vec<usize> = y_trg.iter().map(|&d| pick(d)).collect();
    let c = cfg.image_channels();
    Ok(Batch {
        x: data.batch_tensor(&idx, c)?,
        y: idx.iter().map(|&i| data.labels[i]).collect(),
        x_ref: data.batch_tensor(&r1, c)?,
        x_ref2: data.batch_tensor(&r2, c)?,
        y_trg,
        z: Tensor::randn(&[b, cfg.latent_dim], 1.0, rng),
        z2: Tensor::randn(&[b, cfg.latent_dim], 1.0, rng),
    })
}

/// Generator-side losses of one phase.
#[derive(Debug, Clone)]
pub struct GeneratorLosses {
    pub total: Tensor,
    pub adv: Tensor,
    pub sty: Tensor,
    pub ds: Tensor,
    pub cyc: Tensor,
}

fn tensors(p: &[NamedParam]) -> Vec<Tensor> {
    p.iter().filter(|p| p.trainable).map(|p| p.tensor.clone()).collect()
}

fn round_to_f32(params: &[Tensor]) {
    for p in params {
        p.data_mut().iter_mut().for_each(|v| *v = *v as f32 as f64);
    }
}

/// The four networks with their optimizer states, the sampling RNG and the
/// iteration counter.
pub struct ModelBundle {
    pub cfg: TrainConfig,
    pub generator: Generator,
    pub mapping: MappingNetwork,
    pub style_encoder: StyleEncoder,
    pub discriminator: Discriminator,
    pub opt_g: AdamState,
    pub opt_m: AdamState,
    pub opt_s: AdamState,
    pub opt_d: AdamState,
    pub rng: ChaCha8Rng,
    /// Completed iterations.
    pub iter: u64,
}

pub const NETWORK_NAMES: [&str; 4] = ["generator", "mapping", "style_encoder", "discriminator"];

impl ModelBundle {
    /// Builds and initializes all networks from `cfg`.
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        let b = ModelBundle::uninitialized(cfg)?;
        let all: Vec<NamedParam> = b.networks().iter().flat_map(|(_, n)| n.params()).collect();
        initialize(&all, &cfg.init_spec())?;
        Ok(b)
    }

    /// Networks with construction-time (mostly zero) weights.
    pub fn uninitialized(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let generator = Generator::new(cfg)?;
        let mapping = MappingNetwork::new(cfg)?;
        let style_encoder = StyleEncoder::new(cfg)?;
        let discriminator = Discriminator::new(cfg)?;
        let adam = |n: &dyn Params| AdamState::for_params(&tensors(&n.params()), cfg.adam_beta1, cfg.adam_beta2);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        Ok(ModelBundle {
            cfg: cfg.clone(),
            opt_g: adam(&generator),
            opt_m: adam(&mapping),
            opt_s: adam(&style_encoder),
            opt_d: adam(&discriminator),
            generator,
            mapping,
            style_encoder,
            discriminator,
            rng,
            iter: 0,
        })
    }

    pub fn networks(&self) -> [(&'static str, &dyn Params); 4] {
        [
            (NETWORK_NAMES[0], &self.generator),
            (NETWORK_NAMES[1], &self.mapping),
            (NETWORK_NAMES[2], &self.style_encoder),
            (NETWORK_NAMES[3], &self.discriminator),
        ]
    }

    pub fn optimizers(&self) -> [&AdamState; 4] {
        [&self.opt_g, &self.opt_m, &self.opt_s, &self.opt_d]
    }

    pub fn optimizers_mut(&mut self) -> [&mut AdamState; 4] {
        [&mut self.opt_g, &mut self.opt_m, &mut self.opt_s, &mut self.opt_d]
    }

    pub fn param_counts(&self) -> Vec<(&'static str, ParamCount)> {
        self.networks().iter().map(|(name, n)| (*name, count_params(*n))).collect()
    }

    pub fn total_params(&self) -> usize {
        self.param_counts().iter().map(|(_, c)| c.trainable).sum()
    }

    fn zero_all_grads(&self) {
        for (_, n) in self.networks() {
            for p in n.params() {
                p.tensor.zero_grad();
            }
        }
    }

    fn target_style(&self, b: &Batch, phase: Phase, second: bool) -> Result<Tensor> {
        match (phase, second) {
            (Phase::Latent, false) => self.mapping.forward(&b.z, &b.y_trg),
            (Phase::Latent, true) => self.mapping.forward(&b.z2, &b.y_trg),
            (Phase::Reference, false) => self.style_encoder.forward(&b.x_ref, &b.y_trg),
            (Phase::Reference, true) => self.style_encoder.forward(&b.x_ref2, &b.y_trg),
        }
    }

    /// Discriminator loss with the fake path detached.
    pub fn discriminator_loss(&self, b: &Batch, phase: Phase) -> Result<Tensor> {
        let fake = no_grad(|| {
            let s = self.target_style(b, phase, false)?;
            self.generator.forward(&b.x, &s)
        })?;
        let real = self.discriminator.forward(&b.x, &b.y)?;
        let fake = self.discriminator.forward(&fake, &b.y_trg)?;
        adversarial_loss(Some(&real), &fake, Side::D)
    }

    /// Full generator objective; the second diversification image is
    /// detached.
    pub fn generator_losses(&self, b: &Batch, phase: Phase, lambda_ds: f64) -> Result<GeneratorLosses> {
        let fake2 = self.second_fake(b, phase)?;
        self.generator_losses_against(b, phase, lambda_ds, &fake2)
    }

    /// `G(x, s̃₂)` with the second style code, as a constant.
    pub fn second_fake(&self, b: &Batch, phase: Phase) -> Result<Tensor> {
        no_grad(|| {
            let s2 = self.target_style(b, phase, true)?;
            self.generator.forward(&b.x, &s2)
        })
    }

    /// Generator objective with a given second diversification image.
    pub fn generator_losses_against(&self, b: &Batch, phase: Phase, lambda_ds: f64, fake2: &Tensor) -> Result<GeneratorLosses> {
        let s_trg = self.target_style(b, phase, false)?;
        let fake = self.generator.forward(&b.x, &s_trg)?;
        let adv = adversarial_loss(None, &self.discriminator.forward(&fake, &b.y_trg)?, Side::G)?;
        let s_pred = self.style_encoder.forward(&fake, &b.y_trg)?;
        let sty = style_reconstruction_loss(&s_trg, &s_pred)?;
        let ds = diversification_loss(&fake, fake2)?;
        let s_org = self.style_encoder.forward(&b.x, &b.y)?;
        let rec = self.generator.forward(&fake, &s_org)?;
        let cyc = cycle_loss(&b.x, &rec)?;
        let w = LossWeights { sty: self.cfg.lambda_sty, ds: lambda_ds, cyc: self.cfg.lambda_cyc };
        let total = generator_objective(&adv, &sty, &ds, &cyc, w)?;
        Ok(GeneratorLosses { total, adv, sty, ds, cyc })
    }

    fn phase_step(&mut self, b: &Batch, phase: Phase, iter: u64, lambda_ds: f64) -> Result<LossReport> {
        let non_finite = |what: &str| Error::NonFinite { iter, what: format!("{what} ({phase} phase)") };

        self.zero_all_grads();
        let d_loss = self.discriminator_loss(b, phase)?;
        if !d_loss.item().is_finite() {
            return Err(non_finite("discriminator loss"));
        }
        let adv_d = d_loss.item();
        d_loss.backward()?;
        drop(d_loss);
        let d_params = tensors(&self.discriminator.params());
        self.opt_d.step(&d_params, self.cfg.lr)?;
        round_to_f32(&d_params);

        self.zero_all_grads();
        let g = self.generator_losses(b, phase, lambda_ds)?;
        if !g.total.item().is_finite() {
            return Err(non_finite("generator objective"));
        }
        g.total.backward()?;
        let g_params = tensors(&self.generator.params());
        let s_params = tensors(&self.style_encoder.params());
        self.opt_g.step(&g_params, self.cfg.lr)?;
        self.opt_s.step(&s_params, self.cfg.lr)?;
        round_to_f32(&g_params);
        round_to_f32(&s_params);
        if phase == Phase::Latent {
            let m_params = tensors(&self.mapping.params());
            self.opt_m.step(&m_params, self.cfg.lr_mapping)?;
            round_to_f32(&m_params);
        }
        self.zero_all_grads();
        Ok(LossReport {
            iter,
            phase,
            adv_d,
            adv_g: g.adv.item(),
            sty: g.sty.item(),
            ds: g.ds.item(),
            cyc: g.cyc.item(),
            lambda_ds,
        })
    }

    /// One iteration: a latent-guided then a reference-guided phase, each
    /// updating D first and then the generator side. The mapping network
    /// is only updated in the latent phase.
    pub fn train_step(&mut self, data: &Dataset) -> Result<[LossReport; 2]> {
        let batch = sample_batch(data, &self.cfg, &mut self.rng)?;
        self.train_step_on(&batch)
    }

    /// [`ModelBundle::train_step`] on a given batch.
    pub fn train_step_on(&mut self, batch: &Batch) -> Result<[LossReport; 2]> {
        let iter = self.iter + 1;
        let lambda_ds = self.cfg.lambda_ds(iter);
        let latent = self.phase_step(batch, Phase::Latent, iter, lambda_ds)?;
        let reference = self.phase_step(batch, Phase::Reference, iter, lambda_ds)?;
        for r in [&latent, &reference] {
            if !r.is_finite() {
                return Err(Error::NonFinite { iter, what: format!("loss in {} phase: {}", r.phase, r.csv_row()) });
            }
        }
        self.iter = iter;
        Ok([latent, reference])
    }

    /// `G(x, M(z, ỹ))` without recording gradients.
    pub fn translate_latent(&self, x: &Tensor, y_trg: &[usize], z: &Tensor) -> Result<Tensor> {
        no_grad(|| self.generator.forward(x, &self.mapping.forward(z, y_trg)?))
    }

    /// `G(x, S(x_ref, ỹ))` without recording gradients.
    pub fn translate_reference(&self, x: &Tensor, x_ref: &Tensor, y_trg: &[usize]) -> Result<Tensor> {
        no_grad(|| self.generator.forward(x, &self.style_encoder.forward(x_ref, y_trg)?))
    }
}
