use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use hyperstar::data::{
    generate_synthetic_dataset, image_to_rgb8, load_checkpoint, load_image, load_image_folder, save_png, tensor_image, Dataset,
};
use hyperstar::init::{density_csv, sample_layer_weight, weight_density_report, AScheme, DensityScheme};
use hyperstar::nets::{AlgebraKind, ModelBundle, TrainConfig};
use hyperstar::session::{run_training, RunOptions};
use hyperstar::tensor::set_backward_fault;
use hyperstar::{verify, Error, Tensor};

use crate::{ConfigArgs, GradCheckArgs, InitHistArgs, ReportArgs, SynthArgs, TrainArgs, TranslateArgs};

/// A failed command and its exit status.
#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(Error),
    #[error("{0}")]
    Data(Error),
    #[error("training diverged: {0}\nlower lr / lr_mapping or resume from an earlier checkpoint")]
    Diverged(Error),
    #[error("{failed} of {total} gradient checks failed")]
    GradCheck { failed: usize, total: usize },
    #[error("{0}")]
    Other(Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Diverged(_) => 4,
            Failure::GradCheck { .. } | Failure::Other(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Divisibility { .. } | Error::Invalid { .. } => Failure::Config(e),
            Error::Data(_) | Error::Image { .. } | Error::Checkpoint(_) => Failure::Data(e),
            Error::NonFinite { .. } => Failure::Diverged(e),
            _ => Failure::Other(e),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn resolve_config(a: &ConfigArgs) -> std::result::Result<TrainConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", p.display())))?;
            TrainConfig::parse(&text).map_err(Failure::Config)?
        }
        None => TrainConfig::preset(&a.preset).map_err(Failure::Config)?,
    };
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(Failure::Config)?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))
}

pub fn train(a: TrainArgs) -> Outcome {
    let mut bundle = match &a.resume {
        Some(p) => {
            if a.cfg.config.is_some() || a.cfg.n.is_some() || a.cfg.seed.is_some() {
                log::warn!("--resume uses the config stored in the checkpoint; --config, --n and --seed are ignored");
            }
            let b = load_checkpoint(p).map_err(Failure::Data)?;
            log::info!("resumed {} at iteration {}", p.display(), b.iter);
            b
        }
        None => {
            let mut cfg = resolve_config(&a.cfg)?;
            if let Some(it) = a.iters {
                cfg.total_iters = it;
            }
            cfg.validate().map_err(Failure::Config)?;
            ModelBundle::new(&cfg)?
        }
    };
    if let Some(k) = a.sample_every {
        bundle.cfg.sample_every = k;
    }
    if let Some(k) = a.checkpoint_every {
        bundle.cfg.checkpoint_every = k;
    }
    let cfg = bundle.cfg.clone();

    let data = match &a.data {
        Some(root) => load_image_folder(root, cfg.image_size).map_err(Failure::Data)?,
        None => generate_synthetic_dataset(cfg.num_domains, cfg.image_size, cfg.synthetic_count, cfg.seed).map_err(Failure::Data)?,
    };
    if data.num_domains != cfg.num_domains {
        return Err(Failure::Data(Error::Data(format!(
            "dataset has {} domains ({}) but the config has num_domains = {}",
            data.num_domains,
            data.domain_names.join(", "),
            cfg.num_domains
        ))));
    }

    let iters = a.iters.unwrap_or(cfg.total_iters.saturating_sub(bundle.iter));
    let opts = RunOptions { out_dir: a.out.clone(), iters, sample_every: cfg.sample_every, checkpoint_every: cfg.checkpoint_every };
    log::info!(
        "training n={} ({:?}) on {} images, {} params, {iters} iterations -> {}",
        cfg.n,
        cfg.layer_kind(),
        data.len(),
        bundle.total_params(),
        a.out.display()
    );
    let every = (iters / 20).max(1);
    let summary = run_training(&mut bundle, &data, &opts, |r| {
        if r[0].iter % every == 0 {
            log::info!(
                "iter {:>6}  d {:.4}  adv {:.4}  sty {:.4}  ds {:.4}  cyc {:.4}",
                r[0].iter,
                r[0].adv_d + r[1].adv_d,
                r[0].adv_g + r[1].adv_g,
                r[0].sty + r[1].sty,
                r[0].ds + r[1].ds,
                r[0].cyc + r[1].cyc
            );
        }
    })?;
    for (p, bytes) in &summary.checkpoints {
        println!("checkpoint {} ({bytes} bytes)", p.display());
    }
    for g in &summary.grids {
        println!("samples {}", g.display());
    }
    println!("losses {}", a.out.join(hyperstar::session::LOSS_CSV).display());
    Ok(())
}

fn image_tensor(path: &Path, cfg: &TrainConfig) -> std::result::Result<Tensor, Failure> {
    let img = load_image(path, cfg.image_size).map_err(Failure::Data)?;
    let ds = Dataset { size: cfg.image_size, num_domains: 1, domain_names: vec![], images: vec![img], labels: vec![0] };
    Ok(ds.batch_tensor(&[0], cfg.image_channels())?)
}

pub fn translate(a: TranslateArgs) -> Outcome {
    let bundle = load_checkpoint(&a.checkpoint).map_err(Failure::Data)?;
    let cfg = &bundle.cfg;
    if a.domain >= cfg.num_domains {
        return Err(Failure::Usage(format!("domain {} out of range: the model has {} domains", a.domain, cfg.num_domains)));
    }
    let x = image_tensor(&a.source, cfg)?;
    let y = [a.domain];
    let out = match (a.latent, &a.reference) {
        (Some(seed), _) => {
            let z = Tensor::randn(&[1, cfg.latent_dim], 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
            bundle.translate_latent(&x, &y, &z)?
        }
        (None, Some(r)) => bundle.translate_reference(&x, &image_tensor(r, cfg)?, &y)?,
        (None, None) => unreachable!("clap requires --latent or --reference"),
    };
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    save_png(&tensor_image(&out, 0)?, &a.out)?;
    println!("{}", a.out.display());
    Ok(())
}

pub fn report_params(a: ReportArgs) -> Outcome {
    let cfg = resolve_config(&a.cfg)?;
    let bundle = ModelBundle::uninitialized(&cfg)?;
    let real = ModelBundle::uninitialized(&TrainConfig { n: 1, algebra: AlgebraKind::Ph, ..cfg.clone() })?;
    println!("n = {}, {:?}, image {}x{}", cfg.n, cfg.layer_kind(), cfg.image_size, cfg.image_size);
    println!("{:<16} {:>14} {:>16} {:>14} {:>9}", "network", "params", "storage (32-bit)", "n=1 params", "savings");
    let row = |name: &str, p: usize, base: usize| {
        println!("{name:<16} {p:>14} {:>16} {base:>14} {:>8.2}%", 4 * p, 100.0 * (1.0 - p as f64 / base as f64));
    };
    for ((name, c), (_, b)) in bundle.param_counts().iter().zip(real.param_counts()) {
        row(name, c.trainable, b.trainable);
    }
    row("total", bundle.total_params(), real.total_params());
    if a.layers {
        println!();
        for (name, c) in bundle.param_counts() {
            for (layer, k) in &c.by_layer {
                println!("{name}.{layer} {k}");
            }
        }
    }
    Ok(())
}

pub fn grad_check(a: GradCheckArgs) -> Outcome {
    set_backward_fault(a.inject_fault);
    let lines = verify::run(a.scope, a.seed);
    set_backward_fault(false);
    let lines = lines.map_err(Failure::Other)?;
    for l in &lines {
        println!("{l}");
    }
    let failed = lines.iter().filter(|l| !l.passed()).count();
    if failed > 0 {
        return Err(Failure::GradCheck { failed, total: lines.len() });
    }
    println!("all {} checks passed", lines.len());
    Ok(())
}

fn parse_scheme(s: &str) -> std::result::Result<DensityScheme, Failure> {
    match s.trim() {
        "real_xavier" | "real" => Ok(DensityScheme::RealXavier),
        other => Ok(DensityScheme::Ph(AScheme::from_str(other).map_err(Failure::Config)?)),
    }
}

/// `OxI` or `OxIxKxK` → (out, in, kernel).
fn parse_shape(s: &str) -> std::result::Result<(usize, usize, usize), Failure> {
    let bad = || Failure::Usage(format!("malformed shape `{s}` (expected OxI or OxIxKxK, e.g. 256x256 or 64x64x3x3)"));
    let dims: Vec<usize> = s.split(['x', 'X']).map(|d| d.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
    match dims[..] {
        [o, i] if o > 0 && i > 0 => Ok((o, i, 1)),
        [o, i, k, k2] if o > 0 && i > 0 && k > 0 && k == k2 => Ok((o, i, k)),
        _ => Err(bad()),
    }
}

pub fn init_hist(a: InitHistArgs) -> Outcome {
    let (out_f, in_f, k) = parse_shape(&a.shape)?;
    let schemes: Vec<DensityScheme> = a.schemes.iter().map(|s| parse_scheme(s)).collect::<Result<_, _>>()?;
    if schemes.is_empty() {
        return Err(Failure::Usage("no schemes given".into()));
    }
    let layers = schemes
        .iter()
        .map(|&s| Ok((s.to_string(), sample_layer_weight(s, a.n, in_f, out_f, k, a.seed)?)))
        .collect::<hyperstar::Result<Vec<_>>>()?;
    let rows = weight_density_report(&layers, a.bins)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    fs::write(&a.out, density_csv(&rows)).map_err(|e| Failure::Other(Error::Io { path: a.out.clone(), source: e }))?;
    println!("{:<16} {:>12} {:>12} {:>10}", "scheme", "variance", "ex.kurtosis", "peak");
    for r in &rows {
        println!("{:<16} {:>12.3e} {:>12.3} {:>10.4}", r.scheme, r.variance, r.excess_kurtosis, r.peak());
    }
    println!("{}", a.out.display());
    Ok(())
}

pub fn synth_data(a: SynthArgs) -> Outcome {
    let ds = generate_synthetic_dataset(a.domains, a.size, a.count, a.seed)?;
    let mut written = 0;
    for (i, (img, &label)) in ds.images.iter().zip(&ds.labels).enumerate() {
        let dir: PathBuf = a.out.join(&ds.domain_names[label]);
        ensure_dir(&dir)?;
        save_png(&image_to_rgb8(img, 3, ds.size)?, &dir.join(format!("{i:05}.png")))?;
        written += 1;
    }
    println!("{written} images in {} domains under {}", ds.num_domains, a.out.display());
    Ok(())
}
