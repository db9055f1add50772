//! The training loop with its file outputs: loss CSV, periodic
//! checkpoints and sample grids.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{sample_grid, save_checkpoint, save_png, Dataset, GRID_SOURCES, GRID_STYLES};
use crate::error::{Error, Result};
use crate::nets::{LossReport, ModelBundle};
use crate::tensor::Tensor;

pub const LOSS_CSV: &str = "losses.csv";
/// Checkpoint written when a run finishes.
pub const FINAL_CHECKPOINT: &str = "model.hsg2";

pub fn checkpoint_name(iter: u64) -> String {
    format!("ckpt_{iter:06}.hsg2")
}

pub fn grid_name(iter: u64) -> String {
    format!("samples_{iter:06}.png")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Iterations to run on top of `bundle.iter`.
    pub iters: u64,
    /// 0 disables grids.
    pub sample_every: u64,
    /// 0 disables periodic checkpoints.
    pub checkpoint_every: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub last: Option<[LossReport; 2]>,
    pub checkpoints: Vec<(PathBuf, u64)>,
    pub grids: Vec<PathBuf>,
}

/// Fixed grid inputs drawn from their own stream so that emitting samples
/// never perturbs training.
struct GridInputs {
    sources: Tensor,
    targets: Vec<usize>,
    z: Tensor,
    refs: Tensor,
}

impl GridInputs {
    fn new(bundle: &ModelBundle, data: &Dataset) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(bundle.cfg.seed);
        rng.set_stream(2);
        let c = bundle.cfg.image_channels();
        let pick = |rng: &mut ChaCha8Rng, k: usize| -> Vec<usize> { (0..k).map(|_| rng.random_range(0..data.len())).collect() };
        let src = pick(&mut rng, GRID_SOURCES);
        let refs = pick(&mut rng, GRID_STYLES);
        Ok(GridInputs {
            sources: data.batch_tensor(&src, c)?,
            targets: (0..GRID_SOURCES).map(|r| (data.labels[src[r]] + 1) % data.num_domains).collect(),
            z: Tensor::randn(&[GRID_STYLES, bundle.cfg.latent_dim], 1.0, &mut rng),
            refs: data.batch_tensor(&refs, c)?,
        })
    }
}

/// Appends to `losses.csv` (header written when the file is new) and runs
/// `opts.iters` training iterations. A final checkpoint is always written.
/// `on_step` sees both phase reports of every iteration.
pub fn run_training(
    bundle: &mut ModelBundle,
    data: &Dataset,
    opts: &RunOptions,
    mut on_step: impl FnMut(&[LossReport; 2]),
) -> Result<RunSummary> {
    let dir = &opts.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(LOSS_CSV);
    let fresh = !csv_path.exists();
    let file = OpenOptions::new().create(true).append(true).open(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut csv = BufWriter::new(file);
    let write = |csv: &mut BufWriter<File>, line: &str| writeln!(csv, "{line}").map_err(|e| Error::io(&csv_path, e));
    if fresh {
        write(&mut csv, LossReport::CSV_HEADER)?;
    }
    let grid = if opts.sample_every > 0 { Some(GridInputs::new(bundle, data)?) } else { None };

    let mut summary = RunSummary::default();
    for _ in 0..opts.iters {
        let step = bundle.train_step(data);
        let reports = match step {
            Ok(r) => r,
            Err(e) => {
                csv.flush().map_err(|e| Error::io(&csv_path, e))?;
                return Err(e);
            }
        };
        for r in &reports {
            write(&mut csv, &r.csv_row())?;
        }
        on_step(&reports);
        summary.last = Some(reports);
        let it = bundle.iter;
        if opts.checkpoint_every > 0 && it.is_multiple_of(opts.checkpoint_every) {
            csv.flush().map_err(|e| Error::io(&csv_path, e))?;
            let p = dir.join(checkpoint_name(it));
            let bytes = save_checkpoint(bundle, &p)?;
            log::info!("iter {it}: checkpoint {} ({bytes} bytes)", p.display());
            summary.checkpoints.push((p, bytes));
        }
        if let Some(g) = &grid {
            if it.is_multiple_of(opts.sample_every) {
                let p = dir.join(grid_name(it));
                save_png(&sample_grid(bundle, &g.sources, &g.targets, &g.z, &g.refs)?, &p)?;
                summary.grids.push(p);
            }
        }
    }
    csv.flush().map_err(|e| Error::io(&csv_path, e))?;
    let p = dir.join(FINAL_CHECKPOINT);
    let bytes = save_checkpoint(bundle, &p)?;
    summary.checkpoints.push((p, bytes));
    Ok(summary)
}

/// Data rows of a loss CSV written by [`run_training`].
pub fn read_loss_rows(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().skip(1).map(str::to_string).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic_dataset;
    use crate::nets::TrainConfig;

    #[test]
    fn writes_csv_checkpoints_and_grids() {
        let cfg = TrainConfig { total_iters: 4, ..TrainConfig::micro() };
        let data = generate_synthetic_dataset(2, 8, 16, 0).unwrap();
        let mut b = ModelBundle::new(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions { out_dir: dir.path().join("run"), iters: 4, sample_every: 2, checkpoint_every: 3 };
        let mut seen = 0;
        let s = run_training(&mut b, &data, &opts, |_| seen += 1).unwrap();
        assert_eq!(seen, 4);
        let rows = read_loss_rows(&opts.out_dir.join(LOSS_CSV)).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows[7].starts_with("4,reference,"));
        assert_eq!(s.checkpoints.len(), 2);
        assert!(opts.out_dir.join(checkpoint_name(3)).exists());
        assert!(opts.out_dir.join(FINAL_CHECKPOINT).exists());
        assert_eq!(s.grids.len(), 2);
        let img = image::open(&s.grids[0]).unwrap();
        assert_eq!((img.width(), img.height()), (8 * 9, 8 * 4));
    }
}
