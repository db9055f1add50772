//! Datasets, checkpoints and image output.

mod checkpoint;
mod png;

use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use checkpoint::{
    load_checkpoint, load_checkpoint_into, read_container, save_checkpoint, write_container, Dtype, Entry,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use png::{image_to_rgb8, sample_grid, save_png, tensor_image, GRID_SOURCES, GRID_STYLES};

/// Environment variable capping loader threads.
pub const THREADS_ENV: &str = "HYPERSTAR_THREADS";

/// Labelled RGB images of one size, values in `[−1, 1]`, stored `3×H×W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub size: usize,
    pub num_domains: usize,
    pub domain_names: Vec<String>,
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Image indices grouped by label.
    pub fn by_domain(&self) -> Vec<Vec<usize>> {
        let mut v = vec![Vec::new(); self.num_domains];
        for (i, &l) in self.labels.iter().enumerate() {
            v[l].push(i);
        }
        v
    }

    /// `N×channels×H×W` tensor of the chosen images; channels past the
    /// third are zero.
    pub fn batch_tensor(&self, idx: &[usize], channels: usize) -> Result<Tensor> {
        if channels < 3 {
            return Err(Error::invalid("batch_tensor", "need at least 3 channels"));
        }
        let plane = self.size * self.size;
        let mut data = vec![0.0; idx.len() * channels * plane];
        for (b, &i) in idx.iter().enumerate() {
            let img = self
                .images
                .get(i)
                .ok_or_else(|| Error::Data(format!("image index {i} out of range ({} images)", self.len())))?;
            let off = b * channels * plane;
            data[off..off + 3 * plane].copy_from_slice(img);
        }
        Tensor::new(&[idx.len(), channels, self.size, self.size], data)
    }
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(1.0) * 6.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

/// Shape families, one per domain.
fn inside(shape: usize, u: f64, v: f64) -> bool {
    match shape {
        0 => u * u + v * v <= 1.0,
        1 => u.abs() <= 0.8 && v.abs() <= 0.8,
        // upward triangle with apex at v = −1
        2 => (-1.0..=0.8).contains(&v) && u.abs() <= (v + 1.0) / 1.8 * 0.9,
        _ => (u.abs() <= 0.3 && v.abs() <= 1.0) || (v.abs() <= 0.3 && u.abs() <= 1.0),
    }
}

/// Domain `d` draws filled circles, squares, triangles or crosses (in that
/// order) with random position, scale and a hue from its own sector of the
/// colour wheel. Counts are balanced; leftovers go to the first domains.
pub fn generate_synthetic_dataset(num_domains: usize, size: usize, count: usize, seed: u64) -> Result<Dataset> {
    if !(2..=4).contains(&num_domains) {
        return Err(Error::Data(format!("synthetic data supports 2 to 4 domains, got {num_domains}")));
    }
    if size < 4 {
        return Err(Error::Data(format!("synthetic images need at least 4×4 pixels, got {size}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = size * size;
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for d in 0..num_domains {
        let per = count / num_domains + usize::from(d < count % num_domains);
        for _ in 0..per {
            let hue = (d as f64 + rng.random_range(0.15..0.85)) / num_domains as f64;
            let rgb = hsv_to_rgb(hue, rng.random_range(0.6..1.0), rng.random_range(0.7..1.0));
            let scale = rng.random_range(0.25..0.45) * size as f64;
            let cx = rng.random_range(scale..size as f64 - scale);
            let cy = rng.random_range(scale..size as f64 - scale);
            let bg = rng.random_range(0.0..0.25);
            let mut img = vec![0.0; 3 * plane];
            for y in 0..size {
                for x in 0..size {
                    // 2×2 supersampling
                    let mut cover = 0.0;
                    for (ox, oy) in [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)] {
                        let u = (x as f64 + ox - cx) / scale;
                        let v = (y as f64 + oy - cy) / scale;
                        if inside(d, u, v) {
                            cover += 0.25;
                        }
                    }
                    for c in 0..3 {
                        let val = bg * (1.0 - cover) + rgb[c] * cover;
                        img[c * plane + y * size + x] = 2.0 * val - 1.0;
                    }
                }
            }
            images.push(img);
            labels.push(d);
        }
    }
    Ok(Dataset {
        size,
        num_domains,
        domain_names: ["circle", "square", "triangle", "cross"][..num_domains].iter().map(|s| s.to_string()).collect(),
        images,
        labels,
    })
}

/// Thread budget for loaders: `HYPERSTAR_THREADS` if set, otherwise the
/// available parallelism.
pub fn loader_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn is_png(p: &Path) -> bool {
    p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn open_image(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

fn decode(path: &Path, size: usize) -> Result<Vec<f64>> {
    let img = open_image(path)?.resize_exact(size as u32, size as u32, FilterType::Triangle);
    Ok(rgb_planes(&img.to_rgb8(), size))
}

/// A single `size×size` image as `3×H×W` in `[−1, 1]`. Other sizes are
/// rejected rather than resized.
pub fn load_image(path: &Path, size: usize) -> Result<Vec<f64>> {
    let img = open_image(path)?;
    if (img.width(), img.height()) != (size as u32, size as u32) {
        return Err(Error::Data(format!(
            "{} is {}x{}, expected {size}x{size}",
            path.display(),
            img.width(),
            img.height()
        )));
    }
    Ok(rgb_planes(&img.to_rgb8(), size))
}

fn rgb_planes(rgb: &image::RgbImage, size: usize) -> Vec<f64> {
    let plane = size * size;
    let mut out = vec![0.0; 3 * plane];
    for (i, px) in rgb.pixels().enumerate() {
        for c in 0..3 {
            out[c * plane + i] = px[c] as f64 / 127.5 - 1.0;
        }
    }
    out
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    v.sort();
    Ok(v)
}

/// One subdirectory per domain (labelled in lexicographic order), PNG files
/// inside, resized bilinearly to `size×size`. Unreadable files are skipped
/// with a warning; a domain with no readable image is an error.
pub fn load_image_folder(root: &Path, size: usize) -> Result<Dataset> {
    if size == 0 {
        return Err(Error::Data("image size must be positive".into()));
    }
    let domains: Vec<PathBuf> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
    if domains.is_empty() {
        return Err(Error::Data(format!("{} has no domain subdirectories", root.display())));
    }
    let mut files = Vec::new();
    for (d, dir) in domains.iter().enumerate() {
        files.extend(sorted_entries(dir)?.into_iter().filter(|p| p.is_file() && is_png(p)).map(|p| (p, d)));
    }

    let threads = loader_threads().min(files.len()).max(1);
    let chunk = files.len().div_ceil(threads).max(1);
    let decoded: Vec<Option<Vec<f64>>> = std::thread::scope(|s| {
        let handles: Vec<_> = files
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|(p, _)| decode(p, size)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("loader thread panicked"))
            .zip(&files)
            .map(|(r, (p, _))| match r {
                Ok(img) => Some(img),
                Err(e) => {
                    log::warn!("skipping {}: {e}", p.display());
                    None
                }
            })
            .collect()
    });

    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (img, (_, d)) in decoded.into_iter().zip(&files) {
        if let Some(img) = img {
            images.push(img);
            labels.push(*d);
        }
    }
    let names: Vec<String> = domains
        .iter()
        .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    for (d, name) in names.iter().enumerate() {
        if !labels.contains(&d) {
            return Err(Error::Data(format!("domain `{name}` has no readable PNG images")));
        }
    }
    Ok(Dataset { size, num_domains: domains.len(), domain_names: names, images, labels })
}
