//! Trainable layers: real dense/conv, PHM, PHC and fixed-algebra quaternion
//! convolution, plus parameter accounting.

use crate::algebra::{check_div, hamilton_kernel, quaternion_algebra, synthesize_ph_weight, AlgebraMatrices, WeightBlocks};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A named parameter tensor as seen by optimizers and checkpoints.
#[derive(Debug, Clone)]
pub struct NamedParam {
    pub name: String,
    pub tensor: Tensor,
    pub trainable: bool,
}

/// Anything that owns parameters.
pub trait Params {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>);

    fn params(&self) -> Vec<NamedParam> {
        let mut v = Vec::new();
        self.collect_params("", &mut v);
        v
    }

    fn trainable_params(&self) -> Vec<NamedParam> {
        self.params().into_iter().filter(|p| p.trainable).collect()
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

pub(crate) fn push(out: &mut Vec<NamedParam>, prefix: &str, name: &str, t: &Tensor, trainable: bool) {
    out.push(NamedParam { name: join(prefix, name), tensor: t.clone(), trainable });
}

/// Trainable-scalar census of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCount {
    pub trainable: usize,
    pub by_layer: Vec<(String, usize)>,
    /// Storage at 4 bytes per trainable scalar.
    pub bytes_at_32bit: usize,
}

pub fn count_params(network: &dyn Params) -> ParamCount {
    let mut by_layer: Vec<(String, usize)> = Vec::new();
    for p in network.params().into_iter().filter(|p| p.trainable) {
        let layer = p.name.rsplit_once('.').map_or(p.name.as_str(), |(l, _)| l).to_string();
        match by_layer.last_mut() {
            Some((name, n)) if *name == layer => *n += p.tensor.numel(),
            _ => by_layer.push((layer, p.tensor.numel())),
        }
    }
    let trainable = by_layer.iter().map(|(_, n)| n).sum();
    ParamCount { trainable, by_layer, bytes_at_32bit: 4 * trainable }
}

fn bias_param(out: usize) -> Result<Tensor> {
    Tensor::param(&[out], vec![0.0; out])
}

/// Real-valued fully connected layer, `y = x Wᵀ + b`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

impl Dense {
    pub fn new(in_features: usize, out_features: usize, bias: bool) -> Result<Self> {
        Ok(Dense {
            weight: Tensor::param(&[out_features, in_features], vec![0.0; in_features * out_features])?,
            bias: bias.then(|| bias_param(out_features)).transpose()?,
        })
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        affine(x, &self.weight, self.bias.as_ref())
    }
}

fn affine(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    if x.ndim() != 2 || x.shape()[1] != w.shape()[1] {
        return Err(Error::shape("linear", x.shape(), w.shape()));
    }
    let y = x.matmul(&w.t()?)?;
    match b {
        Some(b) => y.add_bias(b),
        None => Ok(y),
    }
}

impl Params for Dense {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        push(out, prefix, "weight", &self.weight, true);
        if let Some(b) = &self.bias {
            push(out, prefix, "bias", b, true);
        }
    }
}

/// Real-valued convolution.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    pub fn new(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, padding: usize, bias: bool) -> Result<Self> {
        let len = out_ch * in_ch * kernel * kernel;
        Ok(Conv2d {
            weight: Tensor::param(&[out_ch, in_ch, kernel, kernel], vec![0.0; len])?,
            bias: bias.then(|| bias_param(out_ch)).transpose()?,
            stride,
            padding,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        conv_bias(x, &self.weight, self.bias.as_ref(), self.stride, self.padding)
    }
}

fn conv_bias(x: &Tensor, k: &Tensor, b: Option<&Tensor>, stride: usize, padding: usize) -> Result<Tensor> {
    let y = x.conv2d(k, stride, padding)?;
    match b {
        Some(b) => y.add_bias(b),
        None => Ok(y),
    }
}

impl Params for Conv2d {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        push(out, prefix, "weight", &self.weight, true);
        if let Some(b) = &self.bias {
            push(out, prefix, "bias", b, true);
        }
    }
}

/// Parameterized hypercomplex multiplication layer: `y = x Hᵀ + b` with
/// `H = Σ Aᵢ ⊗ Fᵢ` of shape `out×in`.
#[derive(Debug, Clone)]
pub struct PhmLayer {
    pub n: usize,
    pub in_features: usize,
    pub out_features: usize,
    pub alg: AlgebraMatrices,
    pub blocks: WeightBlocks,
    pub bias: Option<Tensor>,
}

impl PhmLayer {
    pub fn new(n: usize, in_features: usize, out_features: usize, bias: bool) -> Result<Self> {
        check_div(in_features, n, "PHM input width")?;
        check_div(out_features, n, "PHM output width")?;
        Ok(PhmLayer {
            n,
            in_features,
            out_features,
            alg: AlgebraMatrices::zeros(n)?,
            blocks: WeightBlocks::zeros(n, out_features, in_features, &[])?,
            bias: bias.then(|| bias_param(out_features)).transpose()?,
        })
    }

    /// Same layer with the Hamilton pattern as a non-trainable algebra.
    pub fn quaternion(in_features: usize, out_features: usize, bias: bool) -> Result<Self> {
        let mut l = PhmLayer::new(4, in_features, out_features, bias)?;
        l.alg = AlgebraMatrices::from_matrices(&quaternion_algebra(), true)?;
        Ok(l)
    }

    pub fn weight(&self) -> Result<Tensor> {
        synthesize_ph_weight(&self.alg, &self.blocks)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.ndim() != 2 || x.shape()[1] != self.in_features {
            return Err(Error::shape("phm_forward", x.shape(), &[self.out_features, self.in_features]));
        }
        affine(x, &self.weight()?, self.bias.as_ref())
    }
}

impl Params for PhmLayer {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        push(out, prefix, "A", &self.alg.a, !self.alg.frozen);
        push(out, prefix, "F", &self.blocks.f, true);
        if let Some(b) = &self.bias {
            push(out, prefix, "bias", b, true);
        }
    }
}

/// Parameterized hypercomplex convolution: conv2d with the synthesized
/// `O×C×kh×kw` kernel.
#[derive(Debug, Clone)]
pub struct PhcLayer {
    pub n: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub alg: AlgebraMatrices,
    pub blocks: WeightBlocks,
    pub bias: Option<Tensor>,
}

impl PhcLayer {
    pub fn new(
        n: usize,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    ) -> Result<Self> {
        check_div(in_channels, n, "PHC input channels")?;
        check_div(out_channels, n, "PHC output channels")?;
        Ok(PhcLayer {
            n,
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            alg: AlgebraMatrices::zeros(n)?,
            blocks: WeightBlocks::zeros(n, out_channels, in_channels, &[kernel, kernel])?,
            bias: bias.then(|| bias_param(out_channels)).transpose()?,
        })
    }

    pub fn kernel_weight(&self) -> Result<Tensor> {
        synthesize_ph_weight(&self.alg, &self.blocks)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.ndim() != 4 || x.shape()[1] != self.in_channels {
            return Err(Error::shape("phc_forward", x.shape(), &[self.out_channels, self.in_channels]));
        }
        conv_bias(x, &self.kernel_weight()?, self.bias.as_ref(), self.stride, self.padding)
    }
}

impl Params for PhcLayer {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        push(out, prefix, "A", &self.alg.a, !self.alg.frozen);
        push(out, prefix, "F", &self.blocks.f, true);
        if let Some(b) = &self.bias {
            push(out, prefix, "bias", b, true);
        }
    }
}

/// Quaternion convolution with the fixed Hamilton sign/position pattern.
/// `weights` holds `W0..W3`, each `(O/4)×(C/4)×k×k`.
#[derive(Debug, Clone)]
pub struct QuaternionConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub padding: usize,
    pub weights: Tensor,
    pub bias: Option<Tensor>,
}

impl QuaternionConvLayer {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    ) -> Result<Self> {
        check_div(in_channels, 4, "quaternion input channels")?;
        check_div(out_channels, 4, "quaternion output channels")?;
        let shape = [4, out_channels / 4, in_channels / 4, kernel, kernel];
        Ok(QuaternionConvLayer {
            in_channels,
            out_channels,
            stride,
            padding,
            weights: Tensor::param(&shape, vec![0.0; shape.iter().product()])?,
            bias: bias.then(|| bias_param(out_channels)).transpose()?,
        })
    }

    pub fn kernel_weight(&self) -> Result<Tensor> {
        hamilton_kernel(&self.weights)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.ndim() != 4 {
            return Err(Error::invalid("quaternion_conv", format!("needs N×C×H×W, got {:?}", x.shape())));
        }
        check_div(x.shape()[1], 4, "quaternion conv input channels")?;
        if x.shape()[1] != self.in_channels {
            return Err(Error::shape("quaternion_conv", x.shape(), &[self.out_channels, self.in_channels]));
        }
        conv_bias(x, &self.kernel_weight()?, self.bias.as_ref(), self.stride, self.padding)
    }
}

impl Params for QuaternionConvLayer {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        push(out, prefix, "W", &self.weights, true);
        if let Some(b) = &self.bias {
            push(out, prefix, "bias", b, true);
        }
    }
}

/// Which family of layers a network is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// Ordinary real-valued layers (n = 1).
    Real,
    /// Learned algebra of dimension `n`.
    Ph(usize),
    /// Fixed Hamilton algebra (n = 4, A not trainable).
    Quaternion,
}

impl LayerKind {
    /// Hypercomplex dimension: channel widths must be multiples of this.
    pub fn n(self) -> usize {
        match self {
            LayerKind::Real => 1,
            LayerKind::Ph(n) => n,
            LayerKind::Quaternion => 4,
        }
    }
}

/// Convolution of any [`LayerKind`].
#[derive(Debug, Clone)]
pub enum Conv {
    Real(Conv2d),
    Ph(PhcLayer),
    Quaternion(QuaternionConvLayer),
}

impl Conv {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Conv::Real(c) => c.forward(x),
            Conv::Ph(c) => c.forward(x),
            Conv::Quaternion(c) => c.forward(x),
        }
    }

    pub fn ph(&self) -> Option<&PhcLayer> {
        match self {
            Conv::Ph(c) => Some(c),
            _ => None,
        }
    }
}

impl Params for Conv {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        match self {
            Conv::Real(c) => c.collect_params(prefix, out),
            Conv::Ph(c) => c.collect_params(prefix, out),
            Conv::Quaternion(c) => c.collect_params(prefix, out),
        }
    }
}

/// Fully connected layer of any [`LayerKind`]; the quaternion kind is a
/// PHM layer whose algebra is frozen to the Hamilton pattern.
#[derive(Debug, Clone)]
pub enum Linear {
    Real(Dense),
    Ph(PhmLayer),
}

impl Linear {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Linear::Real(l) => l.forward(x),
            Linear::Ph(l) => l.forward(x),
        }
    }

    pub fn in_features(&self) -> usize {
        match self {
            Linear::Real(l) => l.in_features(),
            Linear::Ph(l) => l.in_features,
        }
    }

    pub fn out_features(&self) -> usize {
        match self {
            Linear::Real(l) => l.out_features(),
            Linear::Ph(l) => l.out_features,
        }
    }
}

impl Params for Linear {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        match self {
            Linear::Real(l) => l.collect_params(prefix, out),
            Linear::Ph(l) => l.collect_params(prefix, out),
        }
    }
}

/// Linear map between arbitrary widths built on a layer whose widths are
/// rounded up to multiples of `n`: the input is zero-padded and the output
/// truncated.
#[derive(Debug, Clone)]
pub struct PaddedLinear {
    pub inner: Linear,
    pub in_features: usize,
    pub out_features: usize,
}

impl PaddedLinear {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.ndim() != 2 || x.shape()[1] != self.in_features {
            return Err(Error::shape("padded_linear", x.shape(), &[self.out_features, self.in_features]));
        }
        let inner_in = self.inner.in_features();
        let x = if inner_in > self.in_features {
            let pad = Tensor::zeros(&[x.shape()[0], inner_in - self.in_features]);
            Tensor::concat(&[x.clone(), pad], 1)?
        } else {
            x.clone()
        };
        let y = self.inner.forward(&x)?;
        if self.inner.out_features() > self.out_features {
            y.narrow(1, 0, self.out_features)
        } else {
            Ok(y)
        }
    }
}

impl Params for PaddedLinear {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        self.inner.collect_params(prefix, out);
    }
}

/// Smallest multiple of `n` that is `>= width`.
pub fn round_up(width: usize, n: usize) -> usize {
    width.div_ceil(n) * n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fill(t: &Tensor, rng: &mut ChaCha8Rng) {
        let r = Tensor::uniform(t.shape(), -1.0, 1.0, rng).to_vec();
        t.data_mut().copy_from_slice(&r);
    }

    #[test]
    fn phm_identity_layer() {
        let l = PhmLayer::new(1, 3, 3, true).unwrap();
        l.alg.assign(&[1.0]).unwrap();
        l.blocks.f.data_mut().copy_from_slice(&Matrix::identity(3).data);
        let x = Tensor::new(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.25, -4.0]).unwrap();
        assert_eq!(l.forward(&x).unwrap().to_vec(), x.to_vec());
    }

    #[test]
    fn phm_param_count() {
        let l = PhmLayer::new(4, 8, 8, true).unwrap();
        let c = count_params(&l);
        assert_eq!(c.trainable, 16 + 64 + 8);
        assert_eq!(l.blocks.f.numel() * 4, 64);
        let real = Dense::new(64, 64, true).unwrap();
        assert_eq!(count_params(&real).trainable, 4160);
        let ph = PhmLayer::new(4, 64, 64, true).unwrap();
        assert_eq!(count_params(&ph).trainable, 1152);
        assert_eq!(count_params(&ph).bytes_at_32bit, 4 * 1152);
    }

    #[test]
    fn phc_filter_count() {
        let l = PhcLayer::new(4, 64, 64, 3, 1, 1, true).unwrap();
        assert_eq!(l.blocks.f.numel(), 9216);
        assert_eq!(count_params(&l).trainable, 9216 + 64 + 64);
        let q = QuaternionConvLayer::new(64, 64, 3, 1, 1, true).unwrap();
        assert_eq!(count_params(&q).trainable, 9216 + 64);
    }

    #[test]
    fn phc_n1_is_scaled_conv() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = PhcLayer::new(1, 2, 3, 3, 1, 1, false).unwrap();
        l.alg.assign(&[2.5]).unwrap();
        fill(&l.blocks.f, &mut rng);
        let x = Tensor::uniform(&[2, 2, 5, 5], -1.0, 1.0, &mut rng);
        let y = l.forward(&x).unwrap();
        let k = Tensor::new(&[3, 2, 3, 3], l.blocks.f.to_vec()).unwrap();
        let plain = x.conv2d(&k, 1, 1).unwrap().scale(2.5);
        for (a, b) in y.to_vec().iter().zip(plain.to_vec()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn width_checks() {
        assert!(matches!(PhmLayer::new(3, 8, 9, false), Err(Error::Divisibility { .. })));
        assert!(PhcLayer::new(4, 6, 8, 3, 1, 1, false).is_err());
        let q = QuaternionConvLayer::new(4, 4, 1, 1, 0, false).unwrap();
        assert!(q.forward(&Tensor::zeros(&[1, 3, 2, 2])).is_err());
        let l = PhmLayer::new(2, 4, 4, false).unwrap();
        assert!(l.forward(&Tensor::zeros(&[1, 6])).is_err());
        assert_eq!(round_up(3, 4), 4);
        assert_eq!(round_up(64, 3), 66);
    }

    #[test]
    fn quaternion_conv_identity() {
        let q = QuaternionConvLayer::new(4, 4, 1, 1, 0, false).unwrap();
        q.weights.data_mut()[0] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Tensor::uniform(&[2, 4, 3, 3], -1.0, 1.0, &mut rng);
        assert_eq!(q.forward(&x).unwrap().to_vec(), x.to_vec());
    }

    #[test]
    fn frozen_algebra_is_not_trainable() {
        let l = PhmLayer::quaternion(8, 8, true).unwrap();
        let names: Vec<String> = l.trainable_params().into_iter().map(|p| p.name).collect();
        assert_eq!(names, vec!["F", "bias"]);
        assert!(!l.alg.a.requires_grad());
    }
}
