//! Three interactive operations for the browser page in `www/`:
//! weight-density histograms of fresh layers, the synthesized weight of a
//! PHM layer, and parameter savings of a layer or a whole model.
//!
//! Each export wraps a plain function that returns `Result<_, String>`, so
//! the logic is testable natively.

use std::str::FromStr;

use wasm_bindgen::prelude::*;

use hyperstar::init::{initialize, sample_layer_weight, weight_density_report, AScheme, DensityScheme, InitSpec};
use hyperstar::layers::{count_params, Conv2d, Params, PhcLayer};
use hyperstar::nets::{ModelBundle, TrainConfig};

fn scheme(name: &str) -> Result<DensityScheme, String> {
    match name.trim() {
        "real_xavier" => Ok(DensityScheme::RealXavier),
        other => AScheme::from_str(other).map(DensityScheme::Ph).map_err(|e| e.to_string()),
    }
}

/// Densities of several schemes over shared bins.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct DensityReport {
    names: Vec<String>,
    edges: Vec<f64>,
    mass: Vec<Vec<f64>>,
    stats: Vec<(f64, f64)>,
}

#[wasm_bindgen]
impl DensityReport {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> String {
        self.names[i].clone()
    }

    /// `bins + 1` bin edges.
    pub fn edges(&self) -> Vec<f64> {
        self.edges.clone()
    }

    /// Probability mass per bin of scheme `i`.
    pub fn mass(&self, i: usize) -> Vec<f64> {
        self.mass[i].clone()
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.stats[i].0
    }

    pub fn kurtosis(&self, i: usize) -> f64 {
        self.stats[i].1
    }
}

/// `schemes` is comma separated.
pub fn density(schemes: &str, n: usize, out: usize, inp: usize, bins: usize, seed: u64) -> Result<DensityReport, String> {
    let layers = schemes
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let sc = scheme(s)?;
            let w = sample_layer_weight(sc, n, inp, out, 1, seed).map_err(|e| e.to_string())?;
            Ok((sc.to_string(), w))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let rows = weight_density_report(&layers, bins).map_err(|e| e.to_string())?;
    let mut edges: Vec<f64> = rows[0].bins.iter().map(|b| b.0).collect();
    edges.push(rows[0].bins.last().map_or(0.0, |b| b.1));
    Ok(DensityReport {
        names: rows.iter().map(|r| r.scheme.clone()).collect(),
        edges,
        mass: rows.iter().map(|r| r.bins.iter().map(|b| b.2).collect()).collect(),
        stats: rows.iter().map(|r| (r.variance, r.excess_kurtosis)).collect(),
    })
}

#[wasm_bindgen(js_name = densityReport)]
pub fn density_js(schemes: &str, n: usize, out: usize, inp: usize, bins: usize, seed: u64) -> Result<DensityReport, JsError> {
    density(schemes, n, out, inp, bins, seed).map_err(|e| JsError::new(&e))
}

/// A synthesized `out×in` PHM weight and its algebra.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct PhWeight {
    n: usize,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    algebra: Vec<f64>,
}

#[wasm_bindgen]
impl PhWeight {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major weight.
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    /// `A₁..Aₙ`, each `n×n`, concatenated.
    pub fn algebra(&self) -> Vec<f64> {
        self.algebra.clone()
    }
}

pub fn ph_weight(n: usize, out: usize, inp: usize, a_scheme: &str, seed: u64) -> Result<PhWeight, String> {
    let scheme = AScheme::from_str(a_scheme.trim()).map_err(|e| e.to_string())?;
    let layer = hyperstar::layers::PhmLayer::new(n, inp, out, false).map_err(|e| e.to_string())?;
    initialize(&layer.params(), &InitSpec { scheme, seed, ..Default::default() }).map_err(|e| e.to_string())?;
    let h = layer.weight().map_err(|e| e.to_string())?;
    Ok(PhWeight { n, rows: out, cols: inp, values: h.to_vec(), algebra: layer.alg.a.to_vec() })
}

#[wasm_bindgen(js_name = phWeight)]
pub fn ph_weight_js(n: usize, out: usize, inp: usize, a_scheme: &str, seed: u64) -> Result<PhWeight, JsError> {
    ph_weight(n, out, inp, a_scheme, seed).map_err(|e| JsError::new(&e))
}

/// Trainable parameters of a real and a PH version of something.
#[wasm_bindgen]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Savings {
    pub real: usize,
    pub ph: usize,
}

#[wasm_bindgen]
impl Savings {
    /// `1 − ph/real` in percent.
    pub fn percent(&self) -> f64 {
        100.0 * (1.0 - self.ph as f64 / self.real as f64)
    }
}

/// One `in→out` convolution with a `k×k` kernel and bias.
pub fn layer_savings(n: usize, inp: usize, out: usize, k: usize) -> Result<Savings, String> {
    let real = Conv2d::new(inp, out, k, 1, k / 2, true).map_err(|e| e.to_string())?;
    let ph = PhcLayer::new(n, inp, out, k, 1, k / 2, true).map_err(|e| e.to_string())?;
    Ok(Savings { real: count_params(&real).trainable, ph: count_params(&ph).trainable })
}

#[wasm_bindgen(js_name = layerSavings)]
pub fn layer_savings_js(n: usize, inp: usize, out: usize, k: usize) -> Result<Savings, JsError> {
    layer_savings(n, inp, out, k).map_err(|e| JsError::new(&e))
}

/// Whole model on a preset. The full preset (about 88M scalars at n = 1)
/// is refused: it does not fit comfortably in browser memory.
pub fn model_savings(preset: &str, n: usize) -> Result<Savings, String> {
    if preset == "full" {
        return Err("the full preset is too large for the browser; use the CLI's report-params".into());
    }
    let cfg = TrainConfig { n, ..TrainConfig::preset(preset).map_err(|e| e.to_string())? };
    cfg.validate().map_err(|e| e.to_string())?;
    let count = |c: &TrainConfig| ModelBundle::uninitialized(c).map(|b| b.total_params()).map_err(|e| e.to_string());
    Ok(Savings { real: count(&TrainConfig { n: 1, ..cfg.clone() })?, ph: count(&cfg)? })
}

#[wasm_bindgen(js_name = modelSavings)]
pub fn model_savings_js(preset: &str, n: usize) -> Result<Savings, JsError> {
    model_savings(preset, n).map_err(|e| JsError::new(&e))
}
