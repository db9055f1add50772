//! Instance normalization and its hypercomplex variants.
//!
//! All three share one kernel, [`group_normalize`]: each hypercomplex
//! channel (the `n` component channels `r·G + j`, `r < n`) is centred per
//! component and divided by a single pooled standard deviation. With
//! `n = 1` this is ordinary instance normalization.

use crate::error::{Error, Result};
use crate::layers::{NamedParam, PaddedLinear, Params};
use crate::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-5;

/// Denominator of the pooled variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceDivisor {
    /// `(1/HW) Σ_hw Σ_c Δ²q_c`: the component sum, as written in the formula.
    #[default]
    Spatial,
    /// `(1/(n·HW)) Σ_hw Σ_c Δ²q_c`: the component average.
    ComponentMean,
}

impl VarianceDivisor {
    fn divisor(self, n: usize, hw: usize) -> f64 {
        match self {
            VarianceDivisor::Spatial => hw as f64,
            VarianceDivisor::ComponentMean => (n * hw) as f64,
        }
    }
}

/// Per-component centring and pooled-variance scaling over spatial axes.
/// `x` is `N×C×H×W` with `C` divisible by `n`.
pub fn group_normalize(x: &Tensor, n: usize, divisor: VarianceDivisor, eps: f64) -> Result<Tensor> {
    let s = x.shape().to_vec();
    if s.len() != 4 {
        return Err(Error::invalid("normalize", format!("needs N×C×H×W, got {s:?}")));
    }
    if n == 0 || !s[1].is_multiple_of(n) {
        return Err(Error::Divisibility { value: s[1], n, context: "normalized channels".into() });
    }
    if eps <= 0.0 {
        return Err(Error::invalid("normalize", "epsilon must be positive"));
    }
    let (batch, c, hw) = (s[0], s[1], s[2] * s[3]);
    let groups = c / n;
    let d = divisor.divisor(n, hw);
    let xv = x.data();
    let mut xhat = vec![0.0; xv.len()];
    let mut inv_std = vec![0.0; batch * groups];
    for b in 0..batch {
        for j in 0..groups {
            let mut ss = 0.0;
            for r in 0..n {
                let off = (b * c + r * groups + j) * hw;
                let mean = xv[off..off + hw].iter().sum::<f64>() / hw as f64;
                for k in off..off + hw {
                    let dev = xv[k] - mean;
                    xhat[k] = dev;
                    ss += dev * dev;
                }
            }
            let inv = 1.0 / (ss / d + eps).sqrt();
            inv_std[b * groups + j] = inv;
            for r in 0..n {
                let off = (b * c + r * groups + j) * hw;
                xhat[off..off + hw].iter_mut().for_each(|v| *v *= inv);
            }
        }
    }
    drop(xv);
    let saved = xhat.clone();
    Ok(Tensor::from_op(
        "group_normalize",
        s,
        xhat,
        vec![x.clone()],
        Box::new(move |g| {
            let mut dx = vec![0.0; g.len()];
            for b in 0..batch {
                for j in 0..groups {
                    let inv = inv_std[b * groups + j];
                    let mut gx = 0.0;
                    for r in 0..n {
                        let off = (b * c + r * groups + j) * hw;
                        gx += g[off..off + hw].iter().zip(&saved[off..off + hw]).map(|(a, b)| a * b).sum::<f64>();
                    }
                    let coef = gx * inv / d;
                    for r in 0..n {
                        let off = (b * c + r * groups + j) * hw;
                        let gmean = g[off..off + hw].iter().sum::<f64>() / hw as f64;
                        for k in off..off + hw {
                            dx[k] = (g[k] - gmean) * inv - saved[k] * coef;
                        }
                    }
                }
            }
            vec![Some(dx)]
        }),
    ))
}

/// Affine parameters of standard instance normalization.
#[derive(Debug, Clone)]
pub struct InParams {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub eps: f64,
}

impl InParams {
    /// `γ = 1`, `β = 0`.
    pub fn new(channels: usize) -> Result<Self> {
        Ok(InParams {
            gamma: Tensor::param(&[channels], vec![1.0; channels])?,
            beta: Tensor::param(&[channels], vec![0.0; channels])?,
            eps: DEFAULT_EPS,
        })
    }
}

/// `γ (x − μ_nc)/sqrt(σ²_nc + ε) + β` per sample and channel.
pub fn instance_norm(x: &Tensor, p: &InParams) -> Result<Tensor> {
    group_normalize(x, 1, VarianceDivisor::Spatial, p.eps)?.scale_shift(&p.gamma, &p.beta)
}

/// Hypercomplex instance normalization: one real scale per hypercomplex
/// channel and a hypercomplex (n-component) shift.
#[derive(Debug, Clone)]
pub struct HinParams {
    pub n: usize,
    /// `[C/n]`
    pub gamma: Tensor,
    /// `[C]`, component-blocked like the features.
    pub beta: Tensor,
    pub eps: f64,
    pub divisor: VarianceDivisor,
}

impl HinParams {
    pub fn new(n: usize, channels: usize, divisor: VarianceDivisor) -> Result<Self> {
        crate::algebra::check_div(channels, n, "HIN channels")?;
        let g = channels / n;
        Ok(HinParams {
            n,
            gamma: Tensor::param(&[g], vec![1.0; g])?,
            beta: Tensor::param(&[channels], vec![0.0; channels])?,
            eps: DEFAULT_EPS,
            divisor,
        })
    }

    pub fn channels(&self) -> usize {
        self.beta.numel()
    }
}

impl Params for HinParams {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        crate::layers::push(out, prefix, "gamma", &self.gamma, true);
        crate::layers::push(out, prefix, "beta", &self.beta, true);
    }
}

pub fn hyper_instance_norm(q: &Tensor, p: &HinParams) -> Result<Tensor> {
    if q.ndim() == 4 && q.shape()[1] != p.channels() {
        return Err(Error::shape("hyper_instance_norm", q.shape(), p.beta.shape()));
    }
    let xhat = group_normalize(q, p.n, p.divisor, p.eps)?;
    xhat.scale_shift(&p.gamma.tile_last(p.n)?, &p.beta)
}

/// Hypercomplex AdaIN: content statistics as in HIN, scale and shift
/// predicted from a style code. The projection emits `C/n` raw scales
/// followed by `C` shift components; the effective scale is `1 + raw`.
#[derive(Debug, Clone)]
pub struct HAdaInParams {
    pub n: usize,
    pub channels: usize,
    pub projection: PaddedLinear,
    pub eps: f64,
    pub divisor: VarianceDivisor,
}

impl HAdaInParams {
    pub fn new(n: usize, channels: usize, projection: PaddedLinear, divisor: VarianceDivisor) -> Result<Self> {
        crate::algebra::check_div(channels, n, "HAdaIN channels")?;
        let want = channels / n + channels;
        if projection.out_features != want {
            return Err(Error::invalid(
                "hyper_adain",
                format!("projection emits {} values, expected C/n + C = {want}", projection.out_features),
            ));
        }
        Ok(HAdaInParams { n, channels, projection, eps: DEFAULT_EPS, divisor })
    }

    pub fn style_dim(&self) -> usize {
        self.projection.in_features
    }
}

impl Params for HAdaInParams {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        self.projection.collect_params(&crate::layers::join(prefix, "proj"), out);
    }
}

/// `σ(y)·(q − μ(q))/σ(q) + μ(y)`. `style` is `[style_dim]` (shared by the
/// batch) or `[N, style_dim]`.
pub fn hyper_adain(q: &Tensor, style: &Tensor, p: &HAdaInParams) -> Result<Tensor> {
    let batch_style = match style.shape() {
        [d] if *d == p.style_dim() => false,
        [nb, d] if *d == p.style_dim() && q.ndim() == 4 && *nb == q.shape()[0] => true,
        _ => return Err(Error::shape("hyper_adain", style.shape(), &[p.style_dim()])),
    };
    if q.ndim() == 4 && q.shape()[1] != p.channels {
        return Err(Error::shape("hyper_adain", q.shape(), &[p.channels]));
    }
    let g = p.channels / p.n;
    let s2 = if batch_style { style.clone() } else { style.reshape(&[1, p.style_dim()])? };
    let stats = p.projection.forward(&s2)?;
    let scale = stats.narrow(1, 0, g)?.add_scalar(1.0).tile_last(p.n)?;
    let shift = stats.narrow(1, g, p.channels)?;
    let (scale, shift) = if batch_style {
        (scale, shift)
    } else {
        (scale.reshape(&[p.channels])?, shift.reshape(&[p.channels])?)
    };
    group_normalize(q, p.n, p.divisor, p.eps)?.scale_shift(&scale, &shift)
}
