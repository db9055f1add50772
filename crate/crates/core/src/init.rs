//! Parameter initialization and the weight-density diagnostic.
//!
//! Values are drawn in `f64` and then rounded to the nearest `f32` so that
//! a freshly initialized model survives a checkpoint round trip unchanged.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::algebra::{quaternion_algebra, synthesize_ph_weight, AlgebraMatrices, WeightBlocks};
use crate::error::{Error, Result};
use crate::layers::NamedParam;
use crate::tensor::Tensor;

/// How the algebra matrices `Aᵢ` start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AScheme {
    XavierA,
    QuatPatternA,
    #[default]
    RandIntegerA,
}

/// How weight tensors (`Fᵢ`, real and quaternion weights) start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FScheme {
    #[default]
    XavierNormal,
    Kaiming,
}

impl fmt::Display for AScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AScheme::XavierA => "xavier_A",
            AScheme::QuatPatternA => "quat_pattern_A",
            AScheme::RandIntegerA => "rand_integer_A",
        })
    }
}

impl FromStr for AScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xavier_A" | "xavier" => Ok(AScheme::XavierA),
            "quat_pattern_A" | "quat" => Ok(AScheme::QuatPatternA),
            "rand_integer_A" | "rand_integer" => Ok(AScheme::RandIntegerA),
            _ => Err(Error::Config(format!(
                "unknown A scheme `{s}` (expected xavier_A, quat_pattern_A or rand_integer_A)"
            ))),
        }
    }
}

impl fmt::Display for FScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FScheme::XavierNormal => "xavier_normal",
            FScheme::Kaiming => "kaiming",
        })
    }
}

impl FromStr for FScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xavier_normal" | "xavier" => Ok(FScheme::XavierNormal),
            "kaiming" => Ok(FScheme::Kaiming),
            _ => Err(Error::Config(format!("unknown F scheme `{s}` (expected xavier_normal or kaiming)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InitSpec {
    pub scheme: AScheme,
    pub f_scheme: FScheme,
    pub seed: u64,
}

fn to_f32(v: f64) -> f64 {
    v as f32 as f64
}

fn fill_normal<R: Rng + ?Sized>(t: &Tensor, std: f64, rng: &mut R) {
    let dist = Normal::new(0.0, std).expect("finite std");
    t.data_mut().iter_mut().for_each(|v| *v = to_f32(dist.sample(rng)));
}

/// Each entry `~ N(0, 2/(n+n))`.
pub fn init_xavier_a<R: Rng + ?Sized>(alg: &AlgebraMatrices, rng: &mut R) {
    fill_normal(&alg.a, (1.0 / alg.n as f64).sqrt(), rng);
}

/// The ±1/0 Hamilton pattern. Only defined for `n = 4`.
pub fn init_quat_pattern_a(alg: &AlgebraMatrices) -> Result<()> {
    if alg.n != 4 {
        return Err(Error::invalid("init_quat_pattern_A", format!("needs n = 4, got n = {}", alg.n)));
    }
    let data: Vec<f64> = quaternion_algebra().iter().flat_map(|m| m.data.clone()).collect();
    alg.assign(&data)
}

/// Each entry uniform over `{−1, 0, 1}`.
pub fn init_rand_integer_a<R: Rng + ?Sized>(alg: &AlgebraMatrices, rng: &mut R) {
    alg.a.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-1i32..=1) as f64);
}

pub fn init_algebra<R: Rng + ?Sized>(alg: &AlgebraMatrices, scheme: AScheme, rng: &mut R) -> Result<()> {
    match scheme {
        AScheme::XavierA => init_xavier_a(alg, rng),
        AScheme::QuatPatternA => init_quat_pattern_a(alg)?,
        AScheme::RandIntegerA => init_rand_integer_a(alg, rng),
    }
    Ok(())
}

fn weight_std(scheme: FScheme, fan_in: usize, fan_out: usize) -> f64 {
    match scheme {
        FScheme::XavierNormal => (2.0 / (fan_in + fan_out) as f64).sqrt(),
        FScheme::Kaiming => (2.0 / fan_in as f64).sqrt(),
    }
}

/// `(fan_in, fan_out)` of the full synthesized layer behind a tensor of the
/// given role and shape.
fn fans(role: &str, shape: &[usize]) -> Option<(usize, usize)> {
    match role {
        // [n, out/n, in/n, spatial..] and quaternion [4, out/4, in/4, k, k]
        "F" | "W" if shape.len() >= 3 => {
            let rf: usize = shape[3..].iter().product();
            Some((shape[0] * shape[2] * rf, shape[0] * shape[1] * rf))
        }
        // dense [out, in] and conv [out, in, k, k]
        "weight" if shape.len() >= 2 => {
            let rf: usize = shape[2..].iter().product();
            Some((shape[1] * rf, shape[0] * rf))
        }
        _ => None,
    }
}

/// Initializes the weight blocks of one PH layer.
pub fn init_blocks<R: Rng + ?Sized>(blocks: &WeightBlocks, scheme: FScheme, rng: &mut R) {
    let (fi, fo) = fans("F", blocks.f.shape()).expect("block tensor rank");
    fill_normal(&blocks.f, weight_std(scheme, fi, fo), rng);
}

/// Initializes every trainable weight of a network in order, dispatching on
/// the parameter's role (the last component of its name). Biases and
/// normalization affines keep their construction values; frozen algebras
/// are left alone.
pub fn initialize(params: &[NamedParam], spec: &InitSpec) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for p in params.iter().filter(|p| p.trainable) {
        let role = p.name.rsplit('.').next().unwrap_or(&p.name);
        if role == "A" {
            let n = p.tensor.shape()[0];
            let alg = AlgebraMatrices { n, a: p.tensor.clone(), frozen: false };
            init_algebra(&alg, spec.scheme, &mut rng)?;
        } else if let Some((fi, fo)) = fans(role, p.tensor.shape()) {
            fill_normal(&p.tensor, weight_std(spec.f_scheme, fi, fo), &mut rng);
        }
    }
    Ok(())
}

/// Which weights a density row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityScheme {
    RealXavier,
    Ph(AScheme),
}

impl fmt::Display for DensityScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityScheme::RealXavier => f.write_str("real_xavier"),
            DensityScheme::Ph(s) => s.fmt(f),
        }
    }
}

pub const DENSITY_SCHEMES: [DensityScheme; 4] = [
    DensityScheme::RealXavier,
    DensityScheme::Ph(AScheme::XavierA),
    DensityScheme::Ph(AScheme::QuatPatternA),
    DensityScheme::Ph(AScheme::RandIntegerA),
];

/// Effective weight of one freshly initialized `out×in×k×k` layer (`k = 1`
/// gives a dense layer) under the given scheme, flattened.
pub fn sample_layer_weight(
    scheme: DensityScheme,
    n: usize,
    in_features: usize,
    out_features: usize,
    kernel: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spatial: &[usize] = if kernel == 1 { &[] } else { &[kernel, kernel] };
    match scheme {
        DensityScheme::RealXavier => {
            let rf = kernel * kernel;
            let std = weight_std(FScheme::XavierNormal, in_features * rf, out_features * rf);
            let t = Tensor::zeros(&[out_features * in_features * rf]);
            fill_normal(&t, std, &mut rng);
            Ok(t.to_vec())
        }
        DensityScheme::Ph(a) => {
            let alg = AlgebraMatrices::zeros(n)?;
            let blocks = WeightBlocks::zeros(n, out_features, in_features, spatial)?;
            init_algebra(&alg, a, &mut rng)?;
            init_blocks(&blocks, FScheme::XavierNormal, &mut rng);
            Ok(synthesize_ph_weight(&alg, &blocks)?.to_vec())
        }
    }
}

/// Histogram and moments of one weight sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    pub scheme: String,
    /// `(left, right, probability mass)`
    pub bins: Vec<(f64, f64, f64)>,
    pub variance: f64,
    pub excess_kurtosis: f64,
}

impl DensityRow {
    pub fn peak(&self) -> f64 {
        self.bins.iter().map(|b| b.2).fold(0.0, f64::max)
    }
}

/// Population variance and excess kurtosis (`m4/m2² − 3`; 0 for constants).
pub fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in values {
        let d = (v - mean) * (v - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    let kurt = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 };
    (m2, kurt)
}

/// Histograms over shared, zero-centred bin edges so that peak heights are
/// comparable across rows.
pub fn weight_density_report(layers: &[(String, Vec<f64>)], bins: usize) -> Result<Vec<DensityRow>> {
    if bins < 2 {
        return Err(Error::invalid("weight_density_report", "need at least 2 bins"));
    }
    if layers.is_empty() || layers.iter().any(|(_, v)| v.is_empty()) {
        return Err(Error::invalid("weight_density_report", "no weights to summarize"));
    }
    let mut half = layers.iter().flat_map(|(_, v)| v.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    if half == 0.0 {
        half = 1.0;
    }
    let width = 2.0 * half / bins as f64;
    Ok(layers
        .iter()
        .map(|(name, v)| {
            let mut counts = vec![0usize; bins];
            for x in v {
                let b = (((x + half) / width).floor() as usize).min(bins - 1);
                counts[b] += 1;
            }
            let (variance, excess_kurtosis) = moments(v);
            DensityRow {
                scheme: name.clone(),
                bins: counts
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let left = -half + i as f64 * width;
                        (left, left + width, *c as f64 / v.len() as f64)
                    })
                    .collect(),
                variance,
                excess_kurtosis,
            }
        })
        .collect())
}

/// `scheme,bin_left,bin_right,density` lines with a header.
pub fn density_csv(rows: &[DensityRow]) -> String {
    let mut s = String::from("scheme,bin_left,bin_right,density\n");
    for r in rows {
        for (l, h, d) in &r.bins {
            s.push_str(&format!("{},{l},{h},{d}\n", r.scheme));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{Params, PhcLayer};

    #[test]
    fn xavier_a_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let alg = AlgebraMatrices::zeros(4).unwrap();
        let mut all = Vec::new();
        while all.len() < 100_000 {
            init_xavier_a(&alg, &mut rng);
            all.extend(alg.a.to_vec());
        }
        let (var, _) = moments(&all);
        assert!((var - 0.25).abs() < 0.0125, "{var}");
    }

    #[test]
    fn schemes_are_deterministic() {
        for s in DENSITY_SCHEMES {
            let a = sample_layer_weight(s, 4, 16, 8, 3, 9).unwrap();
            let b = sample_layer_weight(s, 4, 16, 8, 3, 9).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn quat_pattern_counts_and_n_check() {
        let alg = AlgebraMatrices::zeros(4).unwrap();
        init_quat_pattern_a(&alg).unwrap();
        let a = alg.a.to_vec();
        assert_eq!(a.iter().filter(|v| **v == 1.0).count(), 10);
        assert_eq!(a.iter().filter(|v| **v == -1.0).count(), 6);
        for m in alg.matrices() {
            assert_eq!(m.data.iter().filter(|v| **v != 0.0).count(), 4);
        }
        assert!(init_quat_pattern_a(&AlgebraMatrices::zeros(3).unwrap()).is_err());
    }

    #[test]
    fn rand_integer_support_and_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let alg = AlgebraMatrices::zeros(4).unwrap();
        let mut counts = [0usize; 3];
        let mut total = 0;
        while total < 100_000 {
            init_rand_integer_a(&alg, &mut rng);
            for v in alg.a.to_vec() {
                assert!(v == -1.0 || v == 0.0 || v == 1.0);
                counts[(v + 1.0) as usize] += 1;
                total += 1;
            }
        }
        for c in counts {
            assert!((c as f64 / total as f64 - 1.0 / 3.0).abs() < 0.02);
        }
    }

    #[test]
    fn initialize_respects_frozen_and_rounds() {
        let mut l = PhcLayer::new(4, 8, 8, 3, 1, 1, true).unwrap();
        l.alg = AlgebraMatrices::from_matrices(&quaternion_algebra(), true).unwrap();
        let before = l.alg.a.to_vec();
        initialize(&l.params(), &InitSpec::default()).unwrap();
        assert_eq!(l.alg.a.to_vec(), before);
        let f = l.blocks.f.to_vec();
        assert!(f.iter().all(|v| *v == (*v as f32) as f64));
        assert!(f.iter().any(|v| *v != 0.0));
        assert!(l.bias.as_ref().unwrap().to_vec().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn quat_scheme_rejected_for_other_n() {
        let l = PhcLayer::new(3, 6, 6, 3, 1, 1, false).unwrap();
        let spec = InitSpec { scheme: AScheme::QuatPatternA, ..Default::default() };
        assert!(initialize(&l.params(), &spec).is_err());
    }

    #[test]
    fn report_basics() {
        let rows = weight_density_report(&[("zero".into(), vec![0.0; 50])], 10).unwrap();
        assert_eq!(rows[0].bins.iter().filter(|b| b.2 > 0.0).count(), 1);
        assert_eq!(rows[0].peak(), 1.0);
        let v = sample_layer_weight(DensityScheme::RealXavier, 1, 64, 64, 1, 1).unwrap();
        let rows = weight_density_report(&[("x".into(), v)], 33).unwrap();
        assert!((rows[0].bins.iter().map(|b| b.2).sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(weight_density_report(&[], 10).is_err());
        assert!(weight_density_report(&[("x".into(), vec![1.0])], 1).is_err());
        let csv = density_csv(&rows);
        assert!(csv.starts_with("scheme,bin_left,bin_right,density\nx,"));
        assert_eq!(csv.lines().count(), 34);
    }

    #[test]
    fn xavier_a_has_tallest_peak() {
        let layers: Vec<(String, Vec<f64>)> = DENSITY_SCHEMES
            .iter()
            .map(|s| (s.to_string(), sample_layer_weight(*s, 4, 256, 256, 1, 11).unwrap()))
            .collect();
        let rows = weight_density_report(&layers, 61).unwrap();
        let xa = rows[1].peak();
        for (i, r) in rows.iter().enumerate() {
            if i != 1 {
                assert!(xa > r.peak(), "{} {} vs {}", r.scheme, r.peak(), xa);
            }
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [AScheme::XavierA, AScheme::QuatPatternA, AScheme::RandIntegerA] {
            assert_eq!(s.to_string().parse::<AScheme>().unwrap(), s);
        }
        assert!("bogus".parse::<AScheme>().is_err());
        assert_eq!("kaiming".parse::<FScheme>().unwrap(), FScheme::Kaiming);
    }
}
