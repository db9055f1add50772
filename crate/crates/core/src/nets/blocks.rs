//! Layer factory and the residual blocks shared by all four networks.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::Result;
use crate::layers::{
    join, round_up, Conv, Conv2d, Dense, LayerKind, Linear, NamedParam, PaddedLinear, Params, PhcLayer, PhmLayer,
    QuaternionConvLayer,
};
use crate::norm::{hyper_adain, hyper_instance_norm, HAdaInParams, HinParams, VarianceDivisor};
use crate::tensor::Tensor;

pub const LRELU_SLOPE: f64 = 0.2;

/// Builds layers of one [`LayerKind`].
#[derive(Debug, Clone, Copy)]
pub struct Factory {
    pub kind: LayerKind,
    pub divisor: VarianceDivisor,
}

impl Factory {
    pub fn n(&self) -> usize {
        self.kind.n()
    }

    pub fn conv(&self, inp: usize, out: usize, kernel: usize, padding: usize, bias: bool) -> Result<Conv> {
        Ok(match self.kind {
            LayerKind::Real => Conv::Real(Conv2d::new(inp, out, kernel, 1, padding, bias)?),
            LayerKind::Ph(n) => Conv::Ph(PhcLayer::new(n, inp, out, kernel, 1, padding, bias)?),
            LayerKind::Quaternion => Conv::Quaternion(QuaternionConvLayer::new(inp, out, kernel, 1, padding, bias)?),
        })
    }

    /// Linear map between arbitrary widths; the underlying layer has both
    /// widths rounded up to multiples of `n`.
    pub fn linear(&self, inp: usize, out: usize) -> Result<PaddedLinear> {
        let (pi, po) = (round_up(inp, self.n()), round_up(out, self.n()));
        let inner = match self.kind {
            LayerKind::Real => Linear::Real(Dense::new(pi, po, true)?),
            LayerKind::Ph(n) => Linear::Ph(PhmLayer::new(n, pi, po, true)?),
            LayerKind::Quaternion => Linear::Ph(PhmLayer::quaternion(pi, po, true)?),
        };
        Ok(PaddedLinear { inner, in_features: inp, out_features: out })
    }

    pub fn hin(&self, channels: usize) -> Result<HinParams> {
        HinParams::new(self.n(), channels, self.divisor)
    }

    pub fn hadain(&self, style_dim: usize, channels: usize) -> Result<HAdaInParams> {
        let proj = self.linear(style_dim, channels / self.n() + channels)?;
        HAdaInParams::new(self.n(), channels, proj, self.divisor)
    }
}

/// Pre-activation residual block with optional normalization and 2×
/// average-pool downsampling; output scaled by `1/√2`.
#[derive(Debug, Clone)]
pub struct ResBlk {
    pub norm1: Option<HinParams>,
    pub conv1: Conv,
    pub norm2: Option<HinParams>,
    pub conv2: Conv,
    /// 1×1 projection when the widths differ.
    pub shortcut: Option<Conv>,
    pub downsample: bool,
}

impl ResBlk {
    pub fn new(f: &Factory, dim_in: usize, dim_out: usize, normalize: bool, downsample: bool) -> Result<Self> {
        Ok(ResBlk {
            norm1: normalize.then(|| f.hin(dim_in)).transpose()?,
            conv1: f.conv(dim_in, dim_in, 3, 1, true)?,
            norm2: normalize.then(|| f.hin(dim_in)).transpose()?,
            conv2: f.conv(dim_in, dim_out, 3, 1, true)?,
            shortcut: (dim_in != dim_out).then(|| f.conv(dim_in, dim_out, 1, 0, false)).transpose()?,
            downsample,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut r = x.clone();
        if let Some(n) = &self.norm1 {
            r = hyper_instance_norm(&r, n)?;
        }
        r = self.conv1.forward(&r.leaky_relu(LRELU_SLOPE))?;
        if self.downsample {
            r = r.avg_pool2d()?;
        }
        if let Some(n) = &self.norm2 {
            r = hyper_instance_norm(&r, n)?;
        }
        r = self.conv2.forward(&r.leaky_relu(LRELU_SLOPE))?;

        let mut s = match &self.shortcut {
            Some(c) => c.forward(x)?,
            None => x.clone(),
        };
        if self.downsample {
            s = s.avg_pool2d()?;
        }
        Ok(s.add(&r)?.scale(FRAC_1_SQRT_2))
    }
}

impl Params for ResBlk {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        if let Some(n) = &self.norm1 {
            n.collect_params(&join(prefix, "norm1"), out);
        }
        self.conv1.collect_params(&join(prefix, "conv1"), out);
        if let Some(n) = &self.norm2 {
            n.collect_params(&join(prefix, "norm2"), out);
        }
        self.conv2.collect_params(&join(prefix, "conv2"), out);
        if let Some(c) = &self.shortcut {
            c.collect_params(&join(prefix, "shortcut"), out);
        }
    }
}

/// Style-modulated residual block with optional nearest 2× upsampling.
#[derive(Debug, Clone)]
pub struct AdaResBlk {
    pub norm1: HAdaInParams,
    pub conv1: Conv,
    pub norm2: HAdaInParams,
    pub conv2: Conv,
    pub shortcut: Option<Conv>,
    pub upsample: bool,
}

impl AdaResBlk {
    pub fn new(f: &Factory, dim_in: usize, dim_out: usize, style_dim: usize, upsample: bool) -> Result<Self> {
        Ok(AdaResBlk {
            norm1: f.hadain(style_dim, dim_in)?,
            conv1: f.conv(dim_in, dim_out, 3, 1, true)?,
            norm2: f.hadain(style_dim, dim_out)?,
            conv2: f.conv(dim_out, dim_out, 3, 1, true)?,
            shortcut: (dim_in != dim_out).then(|| f.conv(dim_in, dim_out, 1, 0, false)).transpose()?,
            upsample,
        })
    }

    pub fn forward(&self, x: &Tensor, style: &Tensor) -> Result<Tensor> {
        let mut r = hyper_adain(x, style, &self.norm1)?.leaky_relu(LRELU_SLOPE);
        if self.upsample {
            r = r.upsample_nearest2()?;
        }
        r = self.conv1.forward(&r)?;
        r = hyper_adain(&r, style, &self.norm2)?.leaky_relu(LRELU_SLOPE);
        r = self.conv2.forward(&r)?;

        let mut s = x.clone();
        if self.upsample {
            s = s.upsample_nearest2()?;
        }
        if let Some(c) = &self.shortcut {
            s = c.forward(&s)?;
        }
        Ok(s.add(&r)?.scale(FRAC_1_SQRT_2))
    }
}

impl Params for AdaResBlk {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        self.norm1.collect_params(&join(prefix, "norm1"), out);
        self.conv1.collect_params(&join(prefix, "conv1"), out);
        self.norm2.collect_params(&join(prefix, "norm2"), out);
        self.conv2.collect_params(&join(prefix, "conv2"), out);
        if let Some(c) = &self.shortcut {
            c.collect_params(&join(prefix, "shortcut"), out);
        }
    }
}
