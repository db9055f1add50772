//! Finite-difference gradient suites, one line per component.
//!
//! The layer scope covers every differentiable primitive, layer,
//! normalization, loss and residual block; the network scope checks the
//! full generator objective of micro-sized models on a random sample of
//! their parameters.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{hamilton_kernel, synthesize_ph_weight, AlgebraMatrices, WeightBlocks};
use crate::data::generate_synthetic_dataset;
use crate::error::{Error, Result};
use crate::layers::{Conv2d, Dense, LayerKind, NamedParam, Params, PhcLayer, PhmLayer, QuaternionConvLayer};
use crate::nets::{
    adversarial_loss, cycle_loss, diversification_loss, generator_objective, sample_batch, style_reconstruction_loss,
    AdaResBlk, AlgebraKind, Factory, LossWeights, ModelBundle, Phase, ResBlk, Side, TrainConfig,
};
use crate::norm::{hyper_adain, hyper_instance_norm, instance_norm, HinParams, InParams, VarianceDivisor};
use crate::tensor::{grad_check_params, grad_check_params_sampled_smooth, Tensor};

/// Finite-difference step.
pub const STEP: f64 = 1e-5;
pub const LAYER_TOLERANCE: f64 = 1e-4;
pub const NETWORK_TOLERANCE: f64 = 1e-3;
/// Fraction of each parameter tensor checked in the network scope.
pub const NETWORK_FRACTION: f64 = 0.01;

/// Outcome for one component.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub component: String,
    /// Relative error, or the largest absolute gradient for parameters
    /// whose exact gradient is zero.
    pub error: f64,
    pub checked: usize,
    /// Entries whose finite difference crossed a kink.
    pub skipped: usize,
    pub tolerance: f64,
}

impl CheckLine {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.error < self.tolerance
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<44} {:>10.3e}  (< {:.0e}, {} entries{})  {}",
            self.component,
            self.error,
            self.tolerance,
            self.checked,
            if self.skipped > 0 { format!(", {} at kinks", self.skipped) } else { String::new() },
            if self.passed() { "ok" } else { "FAIL" }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Layer,
    Network,
    All,
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layer" => Ok(Scope::Layer),
            "network" => Ok(Scope::Network),
            "all" => Ok(Scope::All),
            _ => Err(Error::Config(format!("unknown scope `{s}` (expected layer, network or all)"))),
        }
    }
}

pub fn run(scope: Scope, seed: u64) -> Result<Vec<CheckLine>> {
    let mut out = Vec::new();
    if scope != Scope::Network {
        out.extend(layer_suite(seed)?);
    }
    if scope != Scope::Layer {
        out.extend(network_suite(seed)?);
    }
    Ok(out)
}

/// Fixed non-uniform readout `Σ y_i w_i` so that no gradient entry is
/// trivially symmetric.
fn probe(y: &Tensor) -> Result<Tensor> {
    let w: Vec<f64> = (0..y.numel()).map(|i| (0.7 * i as f64 + 0.3).sin()).collect();
    Ok(y.mul(&Tensor::new(y.shape(), w)?)?.sum())
}

fn leaf<R: Rng>(shape: &[usize], rng: &mut R) -> Tensor {
    Tensor::uniform(shape, -1.0, 1.0, rng).into_leaf(true)
}

/// Overwrites every trainable parameter with uniform values in `[-1, 1]`.
fn randomize<R: Rng>(params: &[NamedParam], rng: &mut R) {
    for p in params.iter().filter(|p| p.trainable) {
        p.tensor.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    }
}

fn trainable(params: &[NamedParam]) -> Vec<Tensor> {
    params.iter().filter(|p| p.trainable).map(|p| p.tensor.clone()).collect()
}

struct Suite {
    lines: Vec<CheckLine>,
}

impl Suite {
    fn check<F>(&mut self, name: impl Into<String>, leaves: &[Tensor], f: F) -> Result<()>
    where
        F: Fn() -> Result<Tensor>,
    {
        let r = grad_check_params(|| probe(&f()?), leaves, STEP)?;
        self.lines.push(CheckLine {
            component: name.into(),
            error: r.max_rel_error,
            checked: r.checked,
            skipped: 0,
            tolerance: LAYER_TOLERANCE,
        });
        Ok(())
    }
}

pub fn layer_suite(seed: u64) -> Result<Vec<CheckLine>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    let mut s = Suite { lines: Vec::new() };

    // primitives
    let x = leaf(&[2, 3, 4], r);
    let y = leaf(&[2, 3, 4], r);
    s.check("tensor.add", &[x.clone(), y.clone()], || x.add(&y))?;
    s.check("tensor.sub", &[x.clone(), y.clone()], || x.sub(&y))?;
    s.check("tensor.mul", &[x.clone(), y.clone()], || x.mul(&y))?;
    s.check("tensor.scale", std::slice::from_ref(&x), || Ok(x.scale(-1.7).add_scalar(0.4).neg()))?;
    s.check("tensor.relu", std::slice::from_ref(&x), || Ok(x.relu()))?;
    s.check("tensor.leaky_relu", std::slice::from_ref(&x), || Ok(x.leaky_relu(0.2)))?;
    s.check("tensor.tanh", std::slice::from_ref(&x), || Ok(x.tanh()))?;
    s.check("tensor.abs", std::slice::from_ref(&x), || Ok(x.abs()))?;
    s.check("tensor.mean", std::slice::from_ref(&x), || Ok(x.mul(&x)?.mean()))?;
    s.check("tensor.l1_distance", &[x.clone(), y.clone()], || x.l1_distance(&y))?;
    s.check("tensor.bce_with_logits", std::slice::from_ref(&x), || {
        x.scale(3.0).bce_with_logits(1.0).add(&x.bce_with_logits(0.0))
    })?;
    s.check("tensor.reshape", std::slice::from_ref(&x), || x.reshape(&[6, 4]))?;
    s.check("tensor.narrow", std::slice::from_ref(&x), || x.narrow(1, 1, 2))?;
    s.check("tensor.concat", &[x.clone(), y.clone()], || Tensor::concat(&[x.clone(), y.clone()], 1))?;
    let img = leaf(&[2, 3, 4, 4], r);
    let bias = leaf(&[3], r);
    s.check("tensor.add_bias", &[img.clone(), bias.clone()], || img.add_bias(&bias))?;
    let sc = leaf(&[2, 3], r);
    let sh = leaf(&[2, 3], r);
    s.check("tensor.scale_shift", &[img.clone(), sc.clone(), sh.clone()], || img.scale_shift(&sc, &sh))?;
    s.check("tensor.tile_last", std::slice::from_ref(&sc), || sc.tile_last(3))?;
    s.check("tensor.gather_cols", std::slice::from_ref(&sc), || sc.gather_cols(&[2, 0]))?;
    s.check("tensor.select_rows", &[sc.clone(), sh.clone()], || Tensor::select_rows(&[sc.clone(), sh.clone()], &[1, 0]))?;
    let m1 = leaf(&[3, 5], r);
    let m2 = leaf(&[5, 2], r);
    s.check("tensor.matmul", &[m1.clone(), m2.clone()], || m1.matmul(&m2))?;
    s.check("tensor.transpose", std::slice::from_ref(&m1), || m1.t())?;
    let ker = leaf(&[4, 3, 3, 3], r);
    for (stride, pad) in [(1, 0), (1, 1), (2, 0), (2, 1)] {
        s.check(format!("tensor.conv2d(stride={stride},pad={pad})"), &[img.clone(), ker.clone()], || {
            img.conv2d(&ker, stride, pad)
        })?;
    }
    s.check("tensor.avg_pool2d", std::slice::from_ref(&img), || img.avg_pool2d())?;
    s.check("tensor.upsample_nearest2", std::slice::from_ref(&img), || img.upsample_nearest2())?;

    // hypercomplex weight synthesis
    for n in [2, 3, 4] {
        let alg = AlgebraMatrices::zeros(n)?;
        let blocks = WeightBlocks::zeros(n, 2 * n, n, &[2, 2])?;
        randomize(&[param("A", &alg.a), param("F", &blocks.f)], r);
        s.check(format!("algebra.synthesize(n={n})"), &[alg.a.clone(), blocks.f.clone()], || {
            synthesize_ph_weight(&alg, &blocks)
        })?;
    }
    let w = leaf(&[4, 2, 1, 3, 3], r);
    s.check("algebra.hamilton_kernel", std::slice::from_ref(&w), || hamilton_kernel(&w))?;

    // layers
    for n in [1, 2, 3, 4] {
        let l = PhmLayer::new(n, 3 * n, 2 * n, true)?;
        randomize(&l.params(), r);
        let x = leaf(&[2, 3 * n], r);
        let mut leaves = trainable(&l.params());
        leaves.push(x.clone());
        s.check(format!("layers.phm(n={n})"), &leaves, || l.forward(&x))?;

        let c = PhcLayer::new(n, 2 * n, n, 3, 2, 1, true)?;
        randomize(&c.params(), r);
        let x = leaf(&[2, 2 * n, 5, 5], r);
        let mut leaves = trainable(&c.params());
        leaves.push(x.clone());
        s.check(format!("layers.phc(n={n})"), &leaves, || c.forward(&x))?;
    }
    let q = QuaternionConvLayer::new(8, 4, 3, 1, 1, true)?;
    randomize(&q.params(), r);
    let xq = leaf(&[2, 8, 4, 4], r);
    let mut leaves = trainable(&q.params());
    leaves.push(xq.clone());
    s.check("layers.quaternion_conv", &leaves, || q.forward(&xq))?;
    let d = Dense::new(5, 3, true)?;
    randomize(&d.params(), r);
    let xd = leaf(&[2, 5], r);
    let mut leaves = trainable(&d.params());
    leaves.push(xd.clone());
    s.check("layers.dense", &leaves, || d.forward(&xd))?;
    let c = Conv2d::new(3, 2, 3, 1, 1, true)?;
    randomize(&c.params(), r);
    let mut leaves = trainable(&c.params());
    leaves.push(img.clone());
    s.check("layers.conv2d", &leaves, || c.forward(&img))?;

    // normalization
    let inp = InParams::new(3)?;
    for t in [&inp.gamma, &inp.beta] {
        t.data_mut().iter_mut().for_each(|v| *v += r.random_range(-0.5..0.5));
    }
    s.check("norm.instance_norm", &[img.clone(), inp.gamma.clone(), inp.beta.clone()], || instance_norm(&img, &inp))?;
    for n in [1, 2, 3, 4] {
        for divisor in [VarianceDivisor::Spatial, VarianceDivisor::ComponentMean] {
            let p = HinParams::new(n, 2 * n, divisor)?;
            randomize(&p.params(), r);
            let x = leaf(&[2, 2 * n, 3, 3], r);
            let mut leaves = trainable(&p.params());
            leaves.push(x.clone());
            s.check(format!("norm.hin(n={n},{divisor:?})"), &leaves, || hyper_instance_norm(&x, &p))?;

            let f = Factory { kind: kind_for(n), divisor };
            let a = f.hadain(5, 2 * n)?;
            randomize(&a.params(), r);
            let style = leaf(&[2, 5], r);
            let mut leaves = trainable(&a.params());
            leaves.extend([x.clone(), style.clone()]);
            s.check(format!("norm.hadain(n={n},{divisor:?})"), &leaves, || hyper_adain(&x, &style, &a))?;
        }
    }

    // losses
    let real = leaf(&[3], r);
    let fake = leaf(&[3], r);
    s.check("loss.adversarial(D)", &[real.clone(), fake.clone()], || adversarial_loss(Some(&real), &fake, Side::D))?;
    s.check("loss.adversarial(G)", std::slice::from_ref(&fake), || adversarial_loss(None, &fake, Side::G))?;
    s.check("loss.style_reconstruction", &[sc.clone(), sh.clone()], || style_reconstruction_loss(&sc, &sh))?;
    let a4 = leaf(&[2, 4, 3, 3], r);
    let b4 = leaf(&[2, 4, 3, 3], r);
    s.check("loss.diversification", &[a4.clone(), b4.clone()], || diversification_loss(&a4, &b4))?;
    s.check("loss.cycle", &[a4.clone(), b4.clone()], || cycle_loss(&a4, &b4))?;
    let parts: Vec<Tensor> = (0..4).map(|_| leaf(&[1], r)).collect();
    let w = LossWeights { sty: 1.3, ds: 0.7, cyc: 2.1 };
    s.check("loss.generator_objective", &parts, || generator_objective(&parts[0], &parts[1], &parts[2], &parts[3], w))?;

    // residual blocks
    for kind in [LayerKind::Real, LayerKind::Ph(3), LayerKind::Quaternion] {
        let f = Factory { kind, divisor: VarianceDivisor::Spatial };
        let ch = f.n().max(2);
        let rb = ResBlk::new(&f, ch, 2 * ch, true, true)?;
        let ab = AdaResBlk::new(&f, 2 * ch, ch, 4, true)?;
        randomize(&rb.params(), r);
        randomize(&ab.params(), r);
        scale_down(&rb.params(), &ab.params());
        let x = leaf(&[1, ch, 4, 4], r);
        let style = leaf(&[1, 4], r);
        let named: Vec<NamedParam> = rb.trainable_params().into_iter().chain(ab.trainable_params()).collect();
        // conv1 biases feed a normalization that removes them exactly
        let (cancelled, live): (Vec<_>, Vec<_>) = named.into_iter().partition(|p| p.name == "conv1.bias");
        let mut leaves: Vec<Tensor> = live.into_iter().map(|p| p.tensor).collect();
        leaves.extend([x.clone(), style.clone()]);
        let forward = || ab.forward(&rb.forward(&x)?, &style);
        s.check(format!("blocks.res+adares({kind:?})"), &leaves, forward)?;
        s.lines.push(cancelled_bias_line(format!("blocks.cancelled_bias({kind:?})"), &cancelled, || {
            probe(&forward()?)
        })?);
    }
    Ok(s.lines)
}

fn param(name: &str, t: &Tensor) -> NamedParam {
    NamedParam { name: name.into(), tensor: t.clone(), trainable: true }
}

fn kind_for(n: usize) -> LayerKind {
    if n == 1 {
        LayerKind::Real
    } else {
        LayerKind::Ph(n)
    }
}

/// Shrinks F and W blocks so the synthesized kernels stay O(1).
fn scale_down(a: &[NamedParam], b: &[NamedParam]) {
    for p in a.iter().chain(b) {
        if p.name.ends_with(".F") || p.name.ends_with(".W") || p.name.ends_with(".weight") {
            p.tensor.data_mut().iter_mut().for_each(|v| *v *= 0.3);
        }
    }
}

/// Largest absolute analytic gradient of parameters that cannot influence
/// the output.
fn cancelled_bias_line<F>(component: String, params: &[NamedParam], f: F) -> Result<CheckLine>
where
    F: Fn() -> Result<Tensor>,
{
    for p in params {
        p.tensor.zero_grad();
    }
    f()?.backward()?;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for p in params {
        let g = p.tensor.grad().unwrap_or_default();
        checked += g.len();
        worst = g.iter().fold(worst, |m, v| m.max(v.abs()));
        p.tensor.zero_grad();
    }
    Ok(CheckLine { component, error: worst, checked, skipped: 0, tolerance: 1e-10 })
}

/// Micro models of every layer family.
pub fn network_configs() -> Vec<(String, TrainConfig)> {
    let mut v: Vec<(String, TrainConfig)> = (1..=4)
        .map(|n| (format!("n={n}"), TrainConfig { n, ..TrainConfig::micro() }))
        .collect();
    v.push(("quaternion".into(), TrainConfig { n: 4, algebra: AlgebraKind::Quaternion, ..TrainConfig::micro() }));
    v
}

pub fn network_suite(seed: u64) -> Result<Vec<CheckLine>> {
    let mut lines = Vec::new();
    for (label, cfg) in network_configs() {
        let cfg = TrainConfig { seed, ..cfg };
        let (rel, abs) = end_to_end_check(&cfg, seed)?;
        lines.push(CheckLine { component: format!("network.generator_objective({label})"), ..rel });
        lines.push(CheckLine { component: format!("network.cancelled_bias({label})"), ..abs });
    }
    Ok(lines)
}

/// Generator conv biases only shift channels along paths that end in a
/// normalization (the last one being the `to_rgb` HIN), so their exact
/// gradient is zero.
pub fn is_cancelled_bias(name: &str) -> bool {
    name.starts_with("generator.")
        && name.ends_with(".bias")
        && !name.contains(".proj.")
        && name != "generator.to_rgb.bias"
}

/// Full latent-phase generator objective of a freshly initialized model,
/// checked on a random `NETWORK_FRACTION` of every trainable tensor.
/// Entries whose finite difference crosses a ReLU or L1 kink are skipped
/// and counted.
/// Returns the relative check and the zero-gradient check of
/// [`is_cancelled_bias`] parameters.
pub fn end_to_end_check(cfg: &TrainConfig, seed: u64) -> Result<(CheckLine, CheckLine)> {
    let mut bundle = ModelBundle::new(cfg)?;
    let data = generate_synthetic_dataset(cfg.num_domains, cfg.image_size, cfg.synthetic_count, seed)?;
    let batch = sample_batch(&data, cfg, &mut bundle.rng)?;
    let named: Vec<NamedParam> = bundle
        .networks()
        .iter()
        .flat_map(|(net, p)| {
            p.trainable_params().into_iter().map(move |mut q| {
                q.name = format!("{net}.{}", q.name);
                q
            })
        })
        .collect();
    let (cancelled, live): (Vec<_>, Vec<_>) = named.into_iter().partition(|p| is_cancelled_bias(&p.name));
    let leaves: Vec<Tensor> = live.into_iter().map(|p| p.tensor).collect();
    let lambda_ds = cfg.lambda_ds(1);
    // the second diversification image is a constant of the objective
    let fake2 = bundle.second_fake(&batch, Phase::Latent)?;
    let objective = || Ok(bundle.generator_losses_against(&batch, Phase::Latent, lambda_ds, &fake2)?.total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let r = grad_check_params_sampled_smooth(objective, &leaves, STEP, NETWORK_FRACTION, &mut rng)?;
    let rel = CheckLine {
        component: "network.generator_objective".into(),
        error: r.max_rel_error,
        checked: r.checked,
        skipped: r.skipped,
        tolerance: NETWORK_TOLERANCE,
    };
    let abs = cancelled_bias_line("network.cancelled_bias".into(), &cancelled, objective)?;
    Ok((rel, abs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::set_backward_fault;

    #[test]
    fn layer_suite_passes() {
        let lines = layer_suite(7).unwrap();
        assert!(lines.len() > 50);
        for l in &lines {
            assert!(l.passed(), "{l}");
        }
    }

    #[test]
    fn injected_fault_is_detected() {
        set_backward_fault(true);
        let lines = layer_suite(7);
        set_backward_fault(false);
        let failed: Vec<_> = lines.unwrap().into_iter().filter(|l| !l.passed()).collect();
        assert!(failed.iter().any(|l| l.component == "tensor.leaky_relu"));
    }

    #[test]
    fn network_suite_passes() {
        for l in network_suite(3).unwrap() {
            assert!(l.passed(), "{l}");
        }
    }

    #[test]
    fn scope_names() {
        assert_eq!("layer".parse::<Scope>().unwrap(), Scope::Layer);
        assert!("everything".parse::<Scope>().is_err());
    }
}
