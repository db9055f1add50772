//! Generator, mapping network, style encoder and discriminator.

use crate::error::{Error, Result};
use crate::layers::{join, Dense, NamedParam, PaddedLinear, Params};
use crate::norm::{hyper_instance_norm, HinParams};
use crate::tensor::Tensor;

use super::blocks::{AdaResBlk, Factory, ResBlk, LRELU_SLOPE};
use super::config::TrainConfig;

fn factory(cfg: &TrainConfig) -> Factory {
    Factory { kind: cfg.layer_kind(), divisor: cfg.hin_divisor }
}

fn check_labels(labels: &[usize], batch: usize, domains: usize) -> Result<()> {
    if labels.len() != batch {
        return Err(Error::Data(format!("{} labels for a batch of {batch}", labels.len())));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= domains) {
        return Err(Error::Data(format!("domain {l} out of range (num_domains = {domains})")));
    }
    Ok(())
}

fn check_image(x: &Tensor, cfg: &TrainConfig, what: &str) -> Result<()> {
    let want = [cfg.image_channels(), cfg.image_size, cfg.image_size];
    if x.ndim() != 4 || x.shape()[1..] != want {
        return Err(Error::Data(format!(
            "{what}: expected N×{}×{}×{} images, got {:?}",
            want[0],
            want[1],
            want[2],
            x.shape()
        )));
    }
    Ok(())
}

/// `G(x, s)`: encoder of [`ResBlk`]s, decoder of [`AdaResBlk`]s, output in
/// `[−1, 1]` with padding channels zeroed.
#[derive(Debug, Clone)]
pub struct Generator {
    cfg: TrainConfig,
    pub from_rgb: crate::layers::Conv,
    pub encode: Vec<ResBlk>,
    pub decode: Vec<AdaResBlk>,
    pub to_rgb_norm: HinParams,
    pub to_rgb: crate::layers::Conv,
}

impl Generator {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let f = factory(cfg);
        let img = cfg.image_channels();
        let mut raw_in = cfg.channels_base;
        let base = cfg.width(raw_in);
        let mut encode = Vec::new();
        let mut decode = Vec::new();
        for _ in 0..cfg.g_downsample {
            let raw_out = (raw_in * 2).min(cfg.channels_max);
            let (d_in, d_out) = (cfg.width(raw_in), cfg.width(raw_out));
            encode.push(ResBlk::new(&f, d_in, d_out, true, true)?);
            decode.insert(0, AdaResBlk::new(&f, d_out, d_in, cfg.style_dim, true)?);
            raw_in = raw_out;
        }
        let d = cfg.width(raw_in);
        for _ in cfg.g_downsample..cfg.g_blocks {
            encode.push(ResBlk::new(&f, d, d, true, false)?);
            decode.insert(0, AdaResBlk::new(&f, d, d, cfg.style_dim, false)?);
        }
        Ok(Generator {
            cfg: cfg.clone(),
            from_rgb: f.conv(img, base, 3, 1, true)?,
            encode,
            decode,
            to_rgb_norm: f.hin(base)?,
            to_rgb: f.conv(base, img, 1, 0, true)?,
        })
    }

    /// `x`: `N×C×H×W`, `style`: `N×style_dim`.
    pub fn forward(&self, x: &Tensor, style: &Tensor) -> Result<Tensor> {
        check_image(x, &self.cfg, "generator input")?;
        if style.shape() != [x.shape()[0], self.cfg.style_dim] {
            return Err(Error::shape("generator style", style.shape(), &[x.shape()[0], self.cfg.style_dim]));
        }
        let mut h = self.from_rgb.forward(x)?;
        for b in &self.encode {
            h = b.forward(&h)?;
        }
        for b in &self.decode {
            h = b.forward(&h, style)?;
        }
        h = hyper_instance_norm(&h, &self.to_rgb_norm)?.leaky_relu(LRELU_SLOPE);
        let out = self.to_rgb.forward(&h)?.tanh();
        let c = out.shape()[1];
        if c == 3 {
            return Ok(out);
        }
        let s = out.shape();
        let pad = Tensor::zeros(&[s[0], c - 3, s[2], s[3]]);
        Tensor::concat(&[out.narrow(1, 0, 3)?, pad], 1)
    }
}

impl Params for Generator {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        self.from_rgb.collect_params(&join(prefix, "from_rgb"), out);
        for (i, b) in self.encode.iter().enumerate() {
            b.collect_params(&join(prefix, &format!("encode{i}")), out);
        }
        for (i, b) in self.decode.iter().enumerate() {
            b.collect_params(&join(prefix, &format!("decode{i}")), out);
        }
        self.to_rgb_norm.collect_params(&join(prefix, "to_rgb_norm"), out);
        self.to_rgb.collect_params(&join(prefix, "to_rgb"), out);
    }
}

/// `M(z, y)`: four shared layers, then one four-layer branch per domain.
#[derive(Debug, Clone)]
pub struct MappingNetwork {
    pub shared: Vec<PaddedLinear>,
    pub branches: Vec<Vec<PaddedLinear>>,
    latent_dim: usize,
    num_domains: usize,
}

impl MappingNetwork {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let f = factory(cfg);
        let w = cfg.mapping_width;
        let mut shared = vec![f.linear(cfg.latent_dim, w)?];
        for _ in 0..3 {
            shared.push(f.linear(w, w)?);
        }
        let branches = (0..cfg.num_domains)
            .map(|_| {
                let mut b = Vec::new();
                for _ in 0..3 {
                    b.push(f.linear(w, w)?);
                }
                b.push(f.linear(w, cfg.style_dim)?);
                Ok(b)
            })
            .collect::<Result<_>>()?;
        Ok(MappingNetwork { shared, branches, latent_dim: cfg.latent_dim, num_domains: cfg.num_domains })
    }

    pub fn forward(&self, z: &Tensor, labels: &[usize]) -> Result<Tensor> {
        if z.ndim() != 2 || z.shape()[1] != self.latent_dim {
            return Err(Error::shape("mapping input", z.shape(), &[labels.len(), self.latent_dim]));
        }
        check_labels(labels, z.shape()[0], self.num_domains)?;
        let mut h = z.clone();
        for l in &self.shared {
            h = l.forward(&h)?.relu();
        }
        let outs = self
            .branches
            .iter()
            .map(|b| {
                let mut o = h.clone();
                for (i, l) in b.iter().enumerate() {
                    o = l.forward(&o)?;
                    if i + 1 < b.len() {
                        o = o.relu();
                    }
                }
                Ok(o)
            })
            .collect::<Result<Vec<_>>>()?;
        Tensor::select_rows(&outs, labels)
    }
}

impl Params for MappingNetwork {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        for (i, l) in self.shared.iter().enumerate() {
            l.collect_params(&join(prefix, &format!("shared{i}")), out);
        }
        for (d, b) in self.branches.iter().enumerate() {
            for (i, l) in b.iter().enumerate() {
                l.collect_params(&join(prefix, &format!("branch{d}.{i}")), out);
            }
        }
    }
}

/// Convolutional trunk shared in shape by the style encoder and the
/// discriminator: downsampling blocks, then a conv whose kernel covers the
/// remaining spatial extent. Output `N×dim`.
#[derive(Debug, Clone)]
pub struct Trunk {
    cfg: TrainConfig,
    pub from_rgb: crate::layers::Conv,
    pub blocks: Vec<ResBlk>,
    pub last: crate::layers::Conv,
    pub dim: usize,
}

impl Trunk {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let f = factory(cfg);
        let mut raw_in = cfg.channels_base;
        let mut blocks = Vec::new();
        for _ in 0..cfg.trunk_blocks {
            let raw_out = (raw_in * 2).min(cfg.channels_max);
            blocks.push(ResBlk::new(&f, cfg.width(raw_in), cfg.width(raw_out), false, true)?);
            raw_in = raw_out;
        }
        let dim = cfg.width(raw_in);
        let k = cfg.image_size >> cfg.trunk_blocks;
        Ok(Trunk {
            cfg: cfg.clone(),
            from_rgb: f.conv(cfg.image_channels(), cfg.width(cfg.channels_base), 3, 1, true)?,
            blocks,
            last: f.conv(dim, dim, k, 0, true)?,
            dim,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        check_image(x, &self.cfg, "trunk input")?;
        let mut h = self.from_rgb.forward(x)?;
        for b in &self.blocks {
            h = b.forward(&h)?;
        }
        h = self.last.forward(&h.leaky_relu(LRELU_SLOPE))?.leaky_relu(LRELU_SLOPE);
        h.reshape(&[x.shape()[0], self.dim])
    }
}

impl Params for Trunk {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        self.from_rgb.collect_params(&join(prefix, "from_rgb"), out);
        for (i, b) in self.blocks.iter().enumerate() {
            b.collect_params(&join(prefix, &format!("block{i}")), out);
        }
        self.last.collect_params(&join(prefix, "last"), out);
    }
}

/// `S(x, y)`: trunk plus one hypercomplex head per domain.
#[derive(Debug, Clone)]
pub struct StyleEncoder {
    pub trunk: Trunk,
    pub heads: Vec<PaddedLinear>,
}

impl StyleEncoder {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        let trunk = Trunk::new(cfg)?;
        let f = factory(cfg);
        let heads = (0..cfg.num_domains).map(|_| f.linear(trunk.dim, cfg.style_dim)).collect::<Result<_>>()?;
        Ok(StyleEncoder { trunk, heads })
    }

    pub fn forward(&self, x: &Tensor, labels: &[usize]) -> Result<Tensor> {
        check_labels(labels, x.shape().first().copied().unwrap_or(0), self.heads.len())?;
        let h = self.trunk.forward(x)?;
        let outs = self.heads.iter().map(|l| l.forward(&h)).collect::<Result<Vec<_>>>()?;
        Tensor::select_rows(&outs, labels)
    }
}

impl Params for StyleEncoder {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        self.trunk.collect_params(&join(prefix, "trunk"), out);
        for (d, l) in self.heads.iter().enumerate() {
            l.collect_params(&join(prefix, &format!("head{d}")), out);
        }
    }
}

/// `D(x, y)`: trunk plus a real-valued fully connected layer with one logit
/// per domain, of which the `y` entry is returned.
#[derive(Debug, Clone)]
pub struct Discriminator {
    pub trunk: Trunk,
    pub head: Dense,
}

impl Discriminator {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        let trunk = Trunk::new(cfg)?;
        let head = Dense::new(trunk.dim, cfg.num_domains, true)?;
        Ok(Discriminator { trunk, head })
    }

    /// One logit per sample, shape `[N]`.
    pub fn forward(&self, x: &Tensor, labels: &[usize]) -> Result<Tensor> {
        check_labels(labels, x.shape().first().copied().unwrap_or(0), self.head.out_features())?;
        let h = self.trunk.forward(x)?;
        self.head.forward(&h)?.gather_cols(labels)
    }
}

impl Params for Discriminator {
    fn collect_params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        self.trunk.collect_params(&join(prefix, "trunk"), out);
        self.head.collect_params(&join(prefix, "head"), out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::initialize;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(n: usize) -> TrainConfig {
        TrainConfig { n, image_size: 8, channels_base: 4, channels_max: 8, mapping_width: 8, style_dim: 8, latent_dim: 4, g_blocks: 2, g_downsample: 1, trunk_blocks: 2, ..TrainConfig::smoke() }
    }

    #[test]
    fn shapes_for_every_n() {
        for n in 1..=4 {
            let cfg = tiny(n);
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let g = Generator::new(&cfg).unwrap();
            let m = MappingNetwork::new(&cfg).unwrap();
            let s = StyleEncoder::new(&cfg).unwrap();
            let d = Discriminator::new(&cfg).unwrap();
            for p in [g.params(), m.params(), s.params(), d.params()] {
                initialize(&p, &cfg.init_spec()).unwrap();
            }
            let c = cfg.image_channels();
            let x = Tensor::uniform(&[2, c, 8, 8], -1.0, 1.0, &mut rng);
            let z = Tensor::randn(&[2, 4], 1.0, &mut rng);
            let st = m.forward(&z, &[0, 1]).unwrap();
            assert_eq!(st.shape(), &[2, 8]);
            let y = g.forward(&x, &st).unwrap();
            assert_eq!(y.shape(), &[2, c, 8, 8]);
            if c == 4 {
                assert!(y.narrow(1, 3, 1).unwrap().to_vec().iter().all(|v| *v == 0.0));
            }
            assert!(y.to_vec().iter().all(|v| v.abs() <= 1.0));
            assert_eq!(s.forward(&x, &[1, 0]).unwrap().shape(), &[2, 8]);
            let logits = d.forward(&x, &[1, 1]).unwrap();
            assert_eq!(logits.shape(), &[2]);
            assert!(logits.to_vec().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn branches_and_labels() {
        let cfg = tiny(4);
        let m = MappingNetwork::new(&cfg).unwrap();
        initialize(&m.params(), &cfg.init_spec()).unwrap();
        assert_eq!(m.branches.len(), cfg.num_domains);
        let z = Tensor::full(&[2, 4], 0.7);
        let s = m.forward(&z, &[0, 1]).unwrap().to_vec();
        assert_ne!(s[..8], s[8..]);
        assert!(m.forward(&z, &[0, 2]).is_err());
        assert!(m.forward(&z, &[0]).is_err());
        let enc = StyleEncoder::new(&cfg).unwrap();
        assert_eq!(enc.heads.len(), cfg.num_domains);
    }

    #[test]
    fn discriminator_head_is_real() {
        let cfg = tiny(4);
        let d = Discriminator::new(&cfg).unwrap();
        assert_eq!(d.head.weight.numel(), d.trunk.dim * cfg.num_domains);
    }

    #[test]
    fn rejects_wrong_images() {
        let cfg = tiny(4);
        let g = Generator::new(&cfg).unwrap();
        let x = Tensor::zeros(&[1, 3, 8, 8]);
        assert!(g.forward(&x, &Tensor::zeros(&[1, 8])).is_err());
        let x = Tensor::zeros(&[1, 4, 8, 8]);
        assert!(g.forward(&x, &Tensor::zeros(&[1, 7])).is_err());
    }
}
